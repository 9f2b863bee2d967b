#include "ctc/chaos.hpp"

#include "ctc/csv.hpp"
#include "ctc/errors.hpp"
#include "ctc/noise.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ctc {

namespace {

constexpr int kMaxPerturbationAttempts = 16;
constexpr double kMinDelta0 = 1e-12;
constexpr double kBallSlack = 1e-9;

ClusterState perturbed_state(const std::vector<Spinor>& fiducial, double epsilon, std::uint64_t seed) {
    ClusterState out;
    out.reserve(fiducial.size());
    for (std::size_t n = 0; n < fiducial.size(); ++n) {
        const std::uint64_t base = 4 * static_cast<std::uint64_t>(n);
        const std::complex<double> du(counter_normal(seed, base), counter_normal(seed, base + 1));
        const std::complex<double> dd(counter_normal(seed, base + 2), counter_normal(seed, base + 3));
        std::complex<double> up = fiducial[n].up + epsilon * du;
        std::complex<double> down = fiducial[n].down + epsilon * dd;
        const double norm = std::sqrt(std::norm(up) + std::norm(down));
        out.push_back(spinor_to_bloch(up / norm, down / norm));
    }
    return out;
}

double mean_y(const ClusterState& s) { return cluster_average(s).y; }

void require_finite(const ClusterState& s, double t) {
    for (const auto& v : s) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) {
            throw NumericalError("Lyapunov run became non-finite", t);
        }
    }
}

}  // namespace

void pull_back(const ClusterState& fiducial, ClusterState& auxiliary, double factor) {
    for (std::size_t n = 0; n < auxiliary.size(); ++n) {
        const BlochVector& f = fiducial[n];
        BlochVector& a = auxiliary[n];
        BlochVector v{f.x + factor * (a.x - f.x), f.y + factor * (a.y - f.y), f.z + factor * (a.z - f.z)};
        const double r = v.norm();
        if (r > 1.0 + kBallSlack) v = {v.x / r, v.y / r, v.z / r};
        a = v;
    }
}

void LyapunovConfig::validate() const {
    if (!(epsilon > 0.0) || !(epsilon < delta_max) || !(delta_max < 1.0)) {
        throw std::invalid_argument("Lyapunov config needs 0 < epsilon < delta_max < 1");
    }
    if (!(t_transient >= 0.0) || !(t_transient < t_total)) {
        throw std::invalid_argument("Lyapunov config needs 0 <= t_transient < t_total");
    }
    if (!(dt > 0.0) || !(sample_dt > 0.0)) throw std::invalid_argument("Lyapunov steps must be positive");
    const double r = sample_dt / dt;
    if (std::abs(r - std::round(r)) > 1e-9 * r || std::round(r) < 1.0) {
        throw std::invalid_argument("Lyapunov sample_dt must be a multiple of dt");
    }
}

LyapunovResult lyapunov_exponent(const CouplingParams& params, const ClusterGeometry& geom,
                                 const InitialStateSpec& spec, const LyapunovConfig& cfg) {
    params.validate();
    cfg.validate();

    const std::vector<Spinor> spinors = build_initial_spinors(spec, geom);
    ClusterState fid;
    for (const auto& s : spinors) fid.push_back(spinor_to_bloch(s));

    LyapunovResult result;
    ClusterState aux;
    for (int attempt = 0;; ++attempt) {
        if (attempt >= kMaxPerturbationAttempts) {
            throw NumericalError("perturbation does not change the cluster-averaged <sy>");
        }
        aux = perturbed_state(spinors, cfg.epsilon, derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));
        result.delta0 = std::abs(mean_y(fid) - mean_y(aux));
        result.perturbation_attempts = attempt + 1;
        if (result.delta0 >= kMinDelta0) break;
    }

    const long per_sample = std::lround(cfg.sample_dt / cfg.dt);
    const long samples = static_cast<long>(std::floor(cfg.t_total / cfg.sample_dt + 1e-9));
    Rk4Stepper fid_stepper(geom, params, cfg.dt);
    Rk4Stepper aux_stepper(geom, params, cfg.dt);

    double log_sum = 0.0;
    if (cfg.record_trace) result.trace.emplace_back(0.0, result.delta0);
    for (long s = 1; s <= samples; ++s) {
        fid_stepper.advance(fid, (s - 1) * per_sample, per_sample);
        aux_stepper.advance(aux, (s - 1) * per_sample, per_sample);
        const double t = static_cast<double>(s * per_sample) * cfg.dt;
        require_finite(fid, t);
        require_finite(aux, t);

        const double delta = std::abs(mean_y(fid) - mean_y(aux));
        if (cfg.record_trace) result.trace.emplace_back(t, delta);
        if (delta > cfg.delta_max) {
            result.reset_times.push_back(t);
            if (t > cfg.t_transient) {
                log_sum += std::log(delta / result.delta0);
                ++result.reset_count;
            }
            pull_back(fid, aux, result.delta0 / delta);
        }
    }
    result.lambda = result.reset_count == 0 ? 0.0 : log_sum / (cfg.t_total - cfg.t_transient);
    return result;
}

void write_lyapunov_trace_csv(const LyapunovResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "t,delta,reset\n";
    std::size_t next_reset = 0;
    for (const auto& [t, delta] : result.trace) {
        const bool reset = next_reset < result.reset_times.size() && result.reset_times[next_reset] == t;
        if (reset) ++next_reset;
        out << format_exact(t) << ',' << format_exact(delta) << ',' << (reset ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ctc
