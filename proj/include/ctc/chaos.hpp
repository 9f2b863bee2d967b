#pragma once

#include "ctc/dynamics.hpp"
#include "ctc/lattice.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctc {

struct LyapunovConfig {
    double epsilon = 1e-6;       ///< spinor perturbation scale
    double delta_max = 0.1;      ///< reset threshold on the observable distance
    double t_total = 2e4;
    double t_transient = 500.0;  ///< resets before this time are not summed
    std::uint64_t seed = 0;
    double dt = 1e-3;
    double sample_dt = 0.1;      ///< distance is monitored at this spacing
    bool record_trace = false;

    void validate() const;
};

struct LyapunovResult {
    double lambda = 0.0;
    /// Resets counted in the exponent (after the transient).
    int reset_count = 0;
    /// Every reset time, including those inside the transient.
    std::vector<double> reset_times;
    double delta0 = 0.0;
    /// Perturbation draws needed to get a nonzero initial distance.
    int perturbation_attempts = 1;
    /// (t, delta before any reset at t); filled when record_trace is set.
    std::vector<std::pair<double, double>> trace;
};

/// Largest Lyapunov exponent from a fiducial/auxiliary trajectory pair.
///
/// The auxiliary spinors are the fiducial ones plus epsilon-scaled complex
/// Gaussian noise, renormalized per site. The distance is the difference of
/// the cluster-averaged <sy>. Whenever it exceeds delta_max the auxiliary
/// state is pulled back along the full Bloch difference so the distance
/// returns to its initial value, and ln(delta/delta0) is accumulated.
/// The estimate is never negative.
LyapunovResult lyapunov_exponent(const CouplingParams& params, const ClusterGeometry& geom,
                                 const InitialStateSpec& spec, const LyapunovConfig& cfg);

/// Moves every auxiliary site toward the fiducial one along the full Bloch
/// difference, scaled by `factor`; sites pushed more than 1e-9 outside the
/// unit ball are projected back onto it.
void pull_back(const ClusterState& fiducial, ClusterState& auxiliary, double factor);

/// CSV with header t,delta,reset (reset is 1 on samples where the threshold was crossed).
void write_lyapunov_trace_csv(const LyapunovResult& result, const std::filesystem::path& path);

}  // namespace ctc
