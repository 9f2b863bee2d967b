#include "ctc/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ctc {

namespace {

constexpr double kNormTolerance = 1e-9;
constexpr double kBallTolerance = 1e-12;

void require_in_ball(const BlochVector& v, const char* what) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z) ||
        v.norm_squared() > 1.0 + kBallTolerance) {
        throw std::invalid_argument(std::string(what) + ": Bloch vector outside the unit ball");
    }
}

}  // namespace

double BlochVector::norm() const { return std::sqrt(norm_squared()); }

ClusterGeometry::ClusterGeometry(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("cluster geometry needs rows >= 1 and cols >= 1");
    }
    neighbors_.resize(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            neighbors_[site(r, c)] = {
                site((r + rows - 1) % rows, c),
                site((r + 1) % rows, c),
                site(r, (c + cols - 1) % cols),
                site(r, (c + 1) % cols),
            };
        }
    }
}

std::size_t ClusterGeometry::site(int row, int col) const {
    if (row < 0 || row >= rows_ || col < 0 || col >= cols_) {
        throw std::invalid_argument("site coordinates out of range");
    }
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(col);
}

const ClusterGeometry::NeighborList& ClusterGeometry::neighbors(std::size_t site) const {
    if (site >= neighbors_.size()) {
        throw std::invalid_argument("site index " + std::to_string(site) + " out of range");
    }
    return neighbors_[site];
}

int ClusterGeometry::multiplicity(std::size_t site, std::size_t other) const {
    int count = 0;
    for (std::size_t m : neighbors(site)) {
        count += (m == other) ? 1 : 0;
    }
    return count;
}

ClusterGeometry build_cluster_geometry(int rows, int cols) { return ClusterGeometry(rows, cols); }

BlochVector spinor_to_bloch(std::complex<double> a, std::complex<double> b) {
    const double norm = std::norm(a) + std::norm(b);
    if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
        throw std::invalid_argument("spinor is not normalized: |a|^2+|b|^2 = " + std::to_string(norm));
    }
    const std::complex<double> coherence = std::conj(a) * b;
    return {2.0 * coherence.real(), 2.0 * coherence.imag(), std::norm(a) - std::norm(b)};
}

BlochVector spinor_to_bloch(const Spinor& s) { return spinor_to_bloch(s.up, s.down); }

Spinor bloch_to_spinor(const BlochVector& v) {
    const double r = v.norm();
    if (!(r > 0.0)) {
        throw std::invalid_argument("cannot lift a zero Bloch vector to a spinor");
    }
    const double cos_theta = std::clamp(v.z / r, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    const double phi = std::atan2(v.y, v.x);
    return {std::complex<double>(std::cos(theta / 2.0), 0.0), std::polar(std::sin(theta / 2.0), phi)};
}

std::vector<Spinor> build_initial_spinors(const InitialStateSpec& spec, const ClusterGeometry& geom) {
    using std::numbers::pi;
    std::vector<Spinor> out;
    out.reserve(geom.size());

    auto lift = [&](const BlochVector& v) {
        require_in_ball(v, "initial state");
        if (std::abs(v.norm() - 1.0) > kNormTolerance) {
            throw std::invalid_argument("mixed-state site has no spinor representation");
        }
        out.push_back(bloch_to_spinor(v));
    };

    if (std::holds_alternative<EquatorPhase>(spec)) {
        const double amp = 1.0 / std::sqrt(2.0);
        for (std::size_t n = 0; n < geom.size(); ++n) {
            const double phase = static_cast<double>(n + 1) * pi / 9.0;
            out.push_back({amp, std::polar(amp, phase)});
        }
    } else if (std::holds_alternative<RowColPhase>(spec)) {
        const double up = 1.0 / 10.0;
        const double down = std::sqrt(99.0) / 10.0;
        for (std::size_t n = 0; n < geom.size(); ++n) {
            const double phase = static_cast<double>(geom.row(n) + geom.col(n)) * pi / 3.0;
            out.push_back({up, std::polar(down, phase)});
        }
    } else if (const auto* uni = std::get_if<Uniform>(&spec)) {
        for (std::size_t n = 0; n < geom.size(); ++n) lift(uni->bloch);
    } else {
        const auto& sites = std::get<Explicit>(spec).sites;
        if (sites.size() != geom.size()) {
            throw std::invalid_argument("explicit initial state has " + std::to_string(sites.size()) +
                                        " sites, geometry has " + std::to_string(geom.size()));
        }
        for (const auto& v : sites) lift(v);
    }
    return out;
}

ClusterState build_initial_state(const InitialStateSpec& spec, const ClusterGeometry& geom) {
    if (const auto* uni = std::get_if<Uniform>(&spec)) {
        require_in_ball(uni->bloch, "uniform initial state");
        return ClusterState(geom.size(), uni->bloch);
    }
    if (const auto* ex = std::get_if<Explicit>(&spec)) {
        if (ex->sites.size() != geom.size()) {
            throw std::invalid_argument("explicit initial state has " + std::to_string(ex->sites.size()) +
                                        " sites, geometry has " + std::to_string(geom.size()));
        }
        for (const auto& v : ex->sites) require_in_ball(v, "explicit initial state");
        return ex->sites;
    }
    ClusterState state;
    state.reserve(geom.size());
    for (const auto& s : build_initial_spinors(spec, geom)) state.push_back(spinor_to_bloch(s));
    return state;
}

ClusterState paramagnetic_state(const ClusterGeometry& geom) {
    return ClusterState(geom.size(), BlochVector{0.0, 0.0, -1.0});
}

BlochVector cluster_average(const ClusterState& state) {
    BlochVector avg;
    for (const auto& v : state) {
        avg.x += v.x;
        avg.y += v.y;
        avg.z += v.z;
    }
    const double inv = state.empty() ? 0.0 : 1.0 / static_cast<double>(state.size());
    return {avg.x * inv, avg.y * inv, avg.z * inv};
}

}  // namespace ctc
