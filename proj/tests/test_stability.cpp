#include "ctc/stability.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>

using namespace ctc;

namespace {

const ClusterGeometry kGeom(3, 3);

Eigen::MatrixXd finite_difference_jacobian(const ClusterState& s, const CouplingParams& p, int rows, int cols) {
    const std::size_t n = s.size();
    Eigen::MatrixXd fd(3 * n, 3 * n);
    const double h = 1e-6;
    for (std::size_t col = 0; col < 3 * n; ++col) {
        ClusterState plus = s, minus = s;
        double* vp = &plus[col / 3].x + col % 3;
        double* vm = &minus[col / 3].x + col % 3;
        *vp += h;
        *vm -= h;
        const auto fp = oracle::rhs(plus, p.jx, p.jy, p.jz, p.gamma, rows, cols);
        const auto fm = oracle::rhs(minus, p.jx, p.jy, p.jz, p.gamma, rows, cols);
        for (std::size_t row = 0; row < 3 * n; ++row) {
            fd(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                (fp[row / 3][row % 3] - fm[row / 3][row % 3]) / (2 * h);
        }
    }
    return fd;
}

ClusterState sdw_seed(double jx, double jy) {
    return relaxed_guess({jx, jy, 1.0, 1.0}, kGeom, RowColPhase{}, 400.0);
}

}  // namespace

TEST_CASE("analytic Jacobian matches central differences at 100 random points") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> j(-15.0, 15.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int rows = trial % 5 == 0 ? 2 : 3, cols = trial % 7 == 0 ? 1 : 3;
        const ClusterGeometry g(rows, cols);
        const CouplingParams p{j(rng), j(rng), j(rng), 0.1 + std::abs(j(rng))};
        const auto s = oracle::random_ball_state(rng, g.size());
        const Eigen::MatrixXd a = analytic_jacobian(s, p, g);
        const Eigen::MatrixXd fd = finite_difference_jacobian(s, p, rows, cols);
        worst = std::max(worst, (a - fd).norm() / a.norm());
    }
    MESSAGE("worst relative error ", worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("uncoupled Jacobian is the decay diagonal") {
    std::mt19937_64 rng(1);
    const auto s = oracle::random_ball_state(rng, 9);
    const Eigen::MatrixXd a = analytic_jacobian(s, {0, 0, 0, 2.0}, kGeom);
    Eigen::VectorXd diag(27);
    for (int n = 0; n < 9; ++n) diag.segment(3 * n, 3) << -1.0, -1.0, -2.0;
    CHECK(a == Eigen::MatrixXd(diag.asDiagonal()));
}

TEST_CASE("eigenvalue ordering examples") {
    Eigen::MatrixXd d = Eigen::Vector3d(-3, -1, -2).asDiagonal();
    const auto r = eigenvalues_sorted(d);
    CHECK(r.eigenvalues[0].real() == doctest::Approx(-1));
    CHECK(r.eigenvalues[1].real() == doctest::Approx(-2));
    CHECK(r.eigenvalues[2].real() == doctest::Approx(-3));
    CHECK(r.leading_real == doctest::Approx(-1));
    CHECK_FALSE(r.leading_imag_pair);

    Eigen::MatrixXd rot(2, 2);
    rot << 0, -1, 1, 0;
    const auto q = eigenvalues_sorted(rot, true);
    CHECK(q.eigenvalues[0].imag() == doctest::Approx(1.0));
    CHECK(q.eigenvalues[1].imag() == doctest::Approx(-1.0));
    CHECK(std::abs(q.eigenvalues[0].real()) < 1e-14);
    CHECK(q.leading_imag_pair);
    REQUIRE(q.max_relative_residual.has_value());
    CHECK(*q.max_relative_residual < 1e-8);
}

TEST_CASE("eigenvalues of random Jacobians close under conjugation") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> j(-15.0, 15.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = oracle::random_ball_state(rng, 9);
        const auto r = eigenvalues_sorted(analytic_jacobian(s, {j(rng), j(rng), j(rng), 1.0}, kGeom), true);
        CHECK(r.eigenvalues.size() == 27);
        CHECK(*r.max_relative_residual < 1e-8);
        for (const auto& l : r.eigenvalues) {
            double best = 1e9;
            for (const auto& m : r.eigenvalues) best = std::min(best, std::abs(m - std::conj(l)));
            CHECK(best < 1e-8 * std::max(1.0, std::abs(l)));
        }
        for (std::size_t k = 1; k < r.eigenvalues.size(); ++k) {
            CHECK(r.eigenvalues[k - 1].real() >= r.eigenvalues[k].real() - 1e-12);
        }
    }
}

TEST_CASE("PM is a stable exact root on the XXZ line") {
    const auto pm = paramagnetic_state(kGeom);
    const auto fp = find_fixed_point({3.0, 1.2, 1.0, 1.0}, kGeom, pm);
    CHECK(fp.converged);
    CHECK(fp.residual_norm == 0.0);
    CHECK(fp.iterations <= 1);
    for (double j : {0.5, 1.0, 2.0, 5.0}) {
        const auto r = eigenvalues_sorted(analytic_jacobian(pm, {j, j, 1.0, 1.0}, kGeom));
        CHECK(r.leading_real < 0.0);
    }
}

TEST_CASE("XXZ Newton from random in-ball guesses reaches PM") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const auto fp = find_fixed_point({1, 1, 1, 1}, kGeom, oracle::random_ball_state(rng, 9));
        REQUIRE(fp.converged);
        CHECK(fp.residual_norm < 1e-10);
        for (const auto& v : fp.state) {
            CHECK(std::abs(v.x) < 1e-8);
            CHECK(std::abs(v.y) < 1e-8);
            CHECK(std::abs(v.z + 1) < 1e-8);
        }
    }
}

TEST_CASE("SDW fixed point reproduces the trajectory's fate and Newton is idempotent") {
    const CouplingParams p{5.0, 1.1, 1.0, 1.0};
    const auto traj = integrate(build_initial_state(EquatorPhase{}, kGeom), p, kGeom, 500.0, {});
    const auto fp = find_fixed_point(p, kGeom, traj.states.back());
    REQUIRE(fp.converged);
    CHECK(fp.residual_norm < 1e-10);
    double spread = 0.0, gap = 0.0;
    for (std::size_t n = 0; n < 9; ++n) {
        spread = std::max(spread, std::abs(fp.state[n].x - fp.state[0].x));
        gap = std::max({gap, std::abs(fp.state[n].x - traj.states.back()[n].x),
                        std::abs(fp.state[n].z - traj.states.back()[n].z)});
    }
    CHECK(spread > 1e-2);
    CHECK(gap < 1e-6);

    const auto again = find_fixed_point(p, kGeom, fp.state);
    for (std::size_t n = 0; n < 9; ++n) {
        CHECK(std::abs(again.state[n].x - fp.state[n].x) <= 1e-12);
        CHECK(std::abs(again.state[n].y - fp.state[n].y) <= 1e-12);
        CHECK(std::abs(again.state[n].z - fp.state[n].z) <= 1e-12);
    }
}

TEST_CASE("inside the oscillatory window the SDW point is unstable with a complex pair") {
    const CouplingParams p{5.9, 1.2, 1.0, 1.0};
    const auto fp = find_fixed_point(p, kGeom, sdw_seed(5.9, 1.02));
    REQUIRE(fp.converged);
    const auto r = eigenvalues_sorted(analytic_jacobian(fp.state, p, kGeom));
    CHECK(r.leading_real > 0.0);
    CHECK(std::abs(r.eigenvalues[0].imag()) > 1e-3);
    CHECK(r.leading_imag_pair);
}

TEST_CASE("scan on the XXZ line finds no crossing") {
    const auto pm = paramagnetic_state(kGeom);
    const auto scan = scan_stability_boundary({1.0, 1.0, 1.0, 1.0}, kGeom, "jz", 0.2, 4.0, 16, pm);
    CHECK(scan.crossings.empty());
    for (const auto& pt : scan.points) {
        CHECK(pt.converged);
        CHECK(pt.lambda1.real() < 0.0);
    }
    for (double j = 0.5; j <= 15.0; j += 0.5) {
        const auto fp = find_fixed_point({j, j, 1.0, 1.0}, kGeom, pm);
        CHECK(eigenvalues_sorted(analytic_jacobian(fp.state, {j, j, 1, 1}, kGeom)).leading_real < 0.0);
    }
}

TEST_CASE("scan strictly inside the stable SDW region has no crossing") {
    const auto scan = scan_stability_boundary({5.9, 0, 1, 1}, kGeom, "jy", 1.4, 1.5, 10, sdw_seed(5.9, 1.4));
    CHECK(scan.crossings.empty());
    CHECK(scan.gaps.empty());
}

TEST_CASE("scan crossings survive step doubling and parallel execution") {
    const CouplingParams base{5.9, 0, 1, 1};
    const auto seed = sdw_seed(5.9, 1.02);
    const auto coarse = scan_stability_boundary(base, kGeom, "jy", 1.02, 1.5, 24, seed);
    const auto fine = scan_stability_boundary(base, kGeom, "jy", 1.02, 1.5, 48, seed);
    ScanOptions par;
    par.workers = 4;
    const auto parallel = scan_stability_boundary(base, kGeom, "jy", 1.02, 1.5, 24, seed, par);
    REQUIRE(coarse.crossings.size() == 2);
    REQUIRE(fine.crossings.size() == coarse.crossings.size());
    REQUIRE(parallel.crossings.size() == coarse.crossings.size());
    for (std::size_t k = 0; k < coarse.crossings.size(); ++k) {
        CHECK(std::abs(fine.crossings[k] - coarse.crossings[k]) < 1e-3);
        CHECK(std::abs(parallel.crossings[k] - coarse.crossings[k]) < 1e-3);
    }
    CHECK_THROWS_AS(scan_stability_boundary(base, kGeom, "jy", 1.02, 1.5, 7, seed), std::invalid_argument);
    CHECK_THROWS_AS(scan_stability_boundary(base, kGeom, "jy", 1.5, 1.02, 8, seed), std::invalid_argument);
}
