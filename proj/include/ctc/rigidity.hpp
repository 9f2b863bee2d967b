#pragma once

#include "ctc/dynamics.hpp"
#include "ctc/lattice.hpp"
#include "ctc/noise.hpp"
#include "ctc/spectral.hpp"

#include <cstdint>
#include <vector>

namespace ctc {

/// One segment of a staged noise protocol: strength beta held on [t_start, t_end).
struct Stage {
    double t_start = 0.0;
    double t_end = 0.0;
    double beta = 0.0;
    /// Spectral analysis window [window_a, window_b] inside the stage.
    double window_a = 0.0;
    double window_b = 0.0;
};

/// Stages I/II/III with quenches at t=200 and 400, each analysed over its last 120 time units.
std::vector<Stage> default_stages(double beta_ii = 0.04, double beta_iii = 0.2);

/// What each noisy stage window is compared with.
enum class QuietReference {
    /// The first stage's window of the noisy run itself (which must be quiet).
    first_stage,
    /// The same window of a separate noiseless run from the same initial state.
    same_window,
};

struct RigidityConfig {
    CouplingParams params{7.0, 1.5, 1.0, 1.0};
    int rows = 3;
    int cols = 3;
    InitialStateSpec initial = EquatorPhase{};
    NoiseKind kind = NoiseKind::white;
    double dt_noise = 0.01;
    bool independent_components = false;
    std::vector<Stage> stages = default_stages();
    IntegratorConfig integrator;
    SpectralConfig spectral;
    QuietReference reference = QuietReference::first_stage;
    /// Spectrum observable: cluster-averaged Bloch component (0=x, 1=y, 2=z).
    int component = 0;

    void validate() const;
};

/// Contiguous schedule for all stages; stage s draws from derive_seed(seed, s).
NoiseSchedule staged_schedule(const RigidityConfig& cfg, std::uint64_t seed);

struct RigidityRun {
    std::uint64_t seed = 0;
    /// Per-stage spectra of the noisy run.
    std::vector<Spectrum> spectra;
    /// Per-stage quiet reference spectra.
    std::vector<Spectrum> quiet;
    /// Per-stage crystalline fractions of `spectra` against `quiet`.
    std::vector<CrystallineFraction> fractions;
};

/// Integrates the staged protocol and compares every stage's spectrum with its quiet reference.
RigidityRun run_rigidity(const RigidityConfig& cfg, std::uint64_t seed);

struct RigiditySummary {
    std::vector<double> mean;    ///< per stage, over seeds
    std::vector<double> stddev;  ///< per stage, sample standard deviation (0 for one seed)
};

RigiditySummary summarize(const std::vector<RigidityRun>& runs);

}  // namespace ctc
