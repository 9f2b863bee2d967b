#pragma once

#include "ctc/dynamics.hpp"
#include "ctc/lattice.hpp"

#include <Eigen/Dense>

#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ctc {

struct FixedPoint {
    ClusterState state;
    double residual_norm = 0.0;  ///< max-norm of the right-hand side at `state`
    bool converged = false;
    int iterations = 0;
};

/// Dense 3N x 3N linearization, site-major with (x, y, z) inside each site.
using JacobianMatrix = Eigen::MatrixXd;

struct StabilityReport {
    /// Sorted by descending real part, ties by descending imaginary part.
    std::vector<std::complex<double>> eigenvalues;
    double leading_real = 0.0;
    /// The two leading eigenvalues form a complex-conjugate pair.
    bool leading_imag_pair = false;
    /// max ||J v - lambda v|| / (||J|| ||v||); only set when eigenvectors were requested.
    std::optional<double> max_relative_residual;
};

struct NewtonOptions {
    int max_iter = 100;
    double tol = 1e-10;
    int max_halvings = 30;
};

/// Damped Newton iteration on the Bloch right-hand side.
///
/// Steps are halved (up to `max_halvings` times) until the residual 2-norm
/// decreases. When the Jacobian is numerically singular a Cauchy-scaled
/// gradient step on |f|^2/2 replaces the Newton step. Returns the best
/// iterate with converged=false if the tolerance is not reached.
FixedPoint find_fixed_point(const CouplingParams& params, const ClusterGeometry& geom, const ClusterState& guess,
                            const NewtonOptions& opts = {});

JacobianMatrix analytic_jacobian(const ClusterState& point, const CouplingParams& params,
                                 const ClusterGeometry& geom);

StabilityReport eigenvalues_sorted(const JacobianMatrix& jac, bool check_vectors = false);

/// Relaxes `spec` under the quiet dynamics (fixed-step rk4) for `t_relax` to produce a Newton seed.
ClusterState relaxed_guess(const CouplingParams& params, const ClusterGeometry& geom, const InitialStateSpec& spec,
                           double t_relax, double dt = 1e-3);

struct ScanPoint {
    double value = 0.0;
    bool converged = false;
    double residual_norm = 0.0;
    std::complex<double> lambda1;
    std::complex<double> lambda2;
    bool conjugate_pair = false;
    ClusterState fixed_point;
};

struct ScanOptions {
    NewtonOptions newton;
    double bisection_tol = 1e-4;
    /// Max per-component jump between neighbouring fixed points before it is reported as a branch switch.
    double branch_jump = 0.2;
    int workers = 1;
};

struct StabilityScan {
    std::string axis;
    std::vector<ScanPoint> points;
    /// Axis values where Re[lambda1] changes sign, refined by bisection.
    std::vector<double> crossings;
    /// [lo, hi] stretches of the grid where Newton lost the branch.
    std::vector<std::pair<double, double>> gaps;
    /// Grid values at which the tracked fixed point jumped.
    std::vector<double> branch_switches;
};

/// Tracks one fixed-point branch over `steps` equal intervals of [lo, hi] by
/// continuation from `seed` and locates the zero crossings of Re[lambda1].
///
/// The continuation pass is serial; eigen-analysis and bisection run over
/// interval chunks on `workers` threads and give the same result as workers=1.
StabilityScan scan_stability_boundary(const CouplingParams& base, const ClusterGeometry& geom,
                                      const std::string& axis, double lo, double hi, int steps,
                                      const ClusterState& seed, const ScanOptions& opts = {});

/// CSV with header axis_value,re_l1,im_l1,re_l2,im_l2,converged.
void write_scan_csv(const StabilityScan& scan, const std::filesystem::path& path);

}  // namespace ctc
