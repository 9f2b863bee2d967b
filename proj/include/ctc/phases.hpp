#pragma once

#include "ctc/chaos.hpp"
#include "ctc/dynamics.hpp"
#include "ctc/lattice.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ctc {

enum class Phase { PM, FM, SDW, LC, Chaos };

const char* to_string(Phase p);
Phase phase_from_string(const std::string& s);
inline bool is_oscillatory(Phase p) { return p == Phase::LC || p == Phase::Chaos; }

struct PhaseLabel {
    Phase phase = Phase::PM;
    double amplitude = 0.0;      ///< max over sites/components of (max - min) in the analysis window
    double nonuniformity = 0.0;  ///< max inter-site component difference of the final state
    std::optional<double> lambda;
    std::optional<double> omega_p;
};

struct ClassifyConfig {
    double t_total = 600.0;
    double t_relax = 400.0;
    double eps_osc = 1e-4;
    double eps_pm = 1e-3;
    double eps_unif = 1e-3;
    double chaos_threshold = 0.01;
    IntegratorConfig integrator;
    LyapunovConfig lyapunov;

    void validate() const;
};

/// Long-time fate of one parameter point.
///
/// Stationary windows are split into PM (all spins down), FM (uniform) and
/// SDW (modulated); oscillating ones into LC and Chaos by the Lyapunov
/// exponent. LC points also carry the principal frequency of the
/// cluster-averaged <sx> over the analysis window.
PhaseLabel classify(const CouplingParams& params, const ClusterGeometry& geom, const InitialStateSpec& spec,
                    const ClassifyConfig& cfg);

struct GridAxis {
    std::string name;  ///< coupling name: jx, jy, jz or gamma
    double lo = 0.0;
    double hi = 0.0;
    int steps = 1;     ///< number of grid values, lo and hi included

    double value(int i) const;
};

struct SweepConfig {
    GridAxis first{"jx", 1.0, 15.0, 24};
    GridAxis second{"jy", 1.0, 1.6, 10};
    CouplingParams base{0.0, 0.0, 1.0, 1.0};
    int rows = 3;
    int cols = 3;
    InitialStateSpec initial = EquatorPhase{};
    ClassifyConfig classify;
    std::uint64_t base_seed = 0;
    int workers = 1;
    /// Points classified between checkpoints.
    int chunk_size = 8;
    std::filesystem::path checkpoint;
    /// Load completed points from `checkpoint` instead of starting over.
    bool resume = false;
    /// Stop after this many newly classified points (0 = no limit); the sweep can be resumed later.
    std::size_t max_new_points = 0;

    void validate() const;
    std::size_t point_count() const;
    /// Grid point index -> (first-axis index, second-axis index), row-major.
    std::pair<int, int> grid_coords(std::size_t index) const;
    CouplingParams params_at(std::size_t index) const;
    std::uint64_t point_seed(std::size_t index) const;
};

struct PhaseDiagram {
    SweepConfig config;
    /// One entry per grid point in row-major order; empty when not yet computed.
    std::vector<std::optional<PhaseLabel>> points;

    bool complete() const;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using SweepProgress = std::function<void(std::size_t done, std::size_t total)>;

/// Classifies every grid point with per-point seeds derived from base_seed and
/// the grid index, checkpointing after each chunk. A resumed sweep produces
/// exactly the same diagram as an uninterrupted one.
PhaseDiagram sweep(const SweepConfig& cfg, const SweepProgress& progress = {});

/// CSV with header <first>,<second>,label,amplitude,nonuniformity,lambda,omega_p.
void write_phase_csv(const PhaseDiagram& diagram, const std::filesystem::path& path);

/// Stable text identity of everything that determines the diagram's content.
nlohmann::json sweep_identity(const SweepConfig& cfg);

nlohmann::json to_json(const InitialStateSpec& spec);
nlohmann::json to_json(const ClassifyConfig& cfg);

/// 64-bit FNV-1a of a string, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace ctc
