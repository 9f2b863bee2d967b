#pragma once

#include "ctc/lattice.hpp"

#include <cmath>
#include <random>
#include <set>
#include <vector>

namespace oracle {

// Torus neighbours written out by hand: up, down, left, right.
inline std::multiset<std::size_t> torus_neighbors(int rows, int cols, int r, int c) {
    auto id = [&](int rr, int cc) { return static_cast<std::size_t>(((rr + rows) % rows) * cols + (cc + cols) % cols); };
    return {id(r - 1, c), id(r + 1, c), id(r, c - 1), id(r, c + 1)};
}

// Component equations of the mean-field model, term by term.
inline std::vector<std::array<double, 3>> rhs(const ctc::ClusterState& s, double jx, double jy, double jz,
                                              double gamma, int rows, int cols) {
    const double d = 2.0;
    std::vector<std::array<double, 3>> out(s.size());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const std::size_t n = static_cast<std::size_t>(r * cols + c);
            const auto& v = s[n];
            double dx = -gamma / 2 * v.x, dy = -gamma / 2 * v.y, dz = -gamma * (v.z + 1);
            for (std::size_t m : torus_neighbors(rows, cols, r, c)) {
                const auto& w = s[m];
                dx += (jy * v.z * w.y - jz * v.y * w.z) / d;
                dy += (jz * v.x * w.z - jx * v.z * w.x) / d;
                dz += (jx * v.y * w.x - jy * v.x * w.y) / d;
            }
            out[n] = {dx, dy, dz};
        }
    }
    return out;
}

inline ctc::ClusterState random_ball_state(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ctc::ClusterState s(n);
    for (auto& v : s) {
        do {
            v = {u(rng), u(rng), u(rng)};
        } while (v.norm_squared() > 1.0);
    }
    return s;
}

}  // namespace oracle
