#pragma once

#include "ctc/lattice.hpp"
#include "ctc/noise.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctc {

/// XYZ couplings and decay rate, all in units of Gamma.
struct CouplingParams {
    /// Coordination divisor of the mean-field equations (lattice dimension).
    static constexpr double kDivisor = ClusterGeometry::kDimension;

    double jx = 0.0;
    double jy = 0.0;
    double jz = 0.0;
    double gamma = 1.0;

    void validate() const;

    /// Value of a named coupling ("jx", "jy", "jz" or "gamma").
    double get(const std::string& axis) const;
    CouplingParams with(const std::string& axis, double value) const;

    friend bool operator==(const CouplingParams&, const CouplingParams&) = default;
};

struct FieldVector {
    double bx = 0.0;
    double by = 0.0;
    double bz = 0.0;
};

/// Sum over the neighbour multiset of n of (Jx sx_m, Jy sy_m, Jz sz_m).
FieldVector effective_field(std::size_t n, const ClusterState& state, const CouplingParams& params,
                            const ClusterGeometry& geom);

/// Right-hand side of the mean-field Bloch equations:
///   dv_n/dt = (B_n x v_n)/d - Gamma (x_n/2, y_n/2, z_n + 1).
void bloch_rhs(std::span<const BlochVector> state, const CouplingParams& params, const ClusterGeometry& geom,
               std::span<BlochVector> out);
ClusterState bloch_rhs(const ClusterState& state, const CouplingParams& params, const ClusterGeometry& geom);

/// Largest absolute component of the right-hand side.
double rhs_max_norm(const ClusterState& state, const CouplingParams& params, const ClusterGeometry& geom);

enum class IntegratorMethod { rk4_fixed, rk45_adaptive };

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::rk4_fixed;
    double dt = 1e-3;         ///< fixed step (rk4) or initial step (rk45)
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double sample_dt = 0.1;   ///< output spacing, a multiple of dt for rk4

    void validate() const;
    /// Fixed steps per output sample.
    long steps_per_sample() const;
};

/// Uniformly sampled solution of the Bloch equations.
struct Trajectory {
    std::vector<double> t;
    std::vector<ClusterState> states;
    CouplingParams params;
    /// Coupling noise the run was driven with; null for a quiet run.
    std::shared_ptr<const NoiseSchedule> noise;

    std::size_t size() const { return t.size(); }
    double sample_dt() const { return t.size() > 1 ? t[1] - t[0] : 0.0; }

    /// Component (0=x, 1=y, 2=z) of one site, or of the cluster average when site < 0.
    std::vector<double> series(int component, int site = -1) const;

    /// Largest Bloch-vector length over all samples and sites.
    double max_norm() const;
};

/// Classical fourth-order Runge-Kutta stepper with optional held coupling noise.
///
/// A step from t to t+dt evaluates all four stages with the couplings
/// J + xi(t + dt/2), so a noise value is constant across the whole step.
class Rk4Stepper {
public:
    Rk4Stepper(const ClusterGeometry& geom, const CouplingParams& params, double dt,
               const NoiseSchedule* noise = nullptr);

    double dt() const { return dt_; }
    void step(ClusterState& state, double t);
    /// Takes `steps` steps starting at step index `first_step` (time first_step*dt).
    void advance(ClusterState& state, long first_step, long steps);

private:
    CouplingParams couplings_at(double t) const;

    const ClusterGeometry* geom_;
    CouplingParams params_;
    double dt_;
    const NoiseSchedule* noise_;
    std::vector<BlochVector> k1_, k2_, k3_, k4_, tmp_;
};

/// Integrates from t=0 to t_end and samples every cfg.sample_dt.
///
/// With noise, only rk4_fixed is accepted and dt must divide the hold
/// interval. Throws NumericalError (with the failure time) when the state
/// stops being finite.
Trajectory integrate(const ClusterState& state0, const CouplingParams& params, const ClusterGeometry& geom,
                     double t_end, const IntegratorConfig& cfg, std::shared_ptr<const NoiseSchedule> noise = nullptr);

/// Long-format CSV with header t,site,sx,sy,sz (1-based site labels).
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);

const char* to_string(IntegratorMethod m);
IntegratorMethod integrator_method_from_string(const std::string& name);

}  // namespace ctc
