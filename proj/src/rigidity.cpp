#include "ctc/rigidity.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace ctc {

std::vector<Stage> default_stages(double beta_ii, double beta_iii) {
    return {{0.0, 200.0, 0.0, 80.0, 200.0}, {200.0, 400.0, beta_ii, 280.0, 400.0},
            {400.0, 600.0, beta_iii, 480.0, 600.0}};
}

void RigidityConfig::validate() const {
    params.validate();
    integrator.validate();
    spectral.validate();
    if (integrator.method != IntegratorMethod::rk4_fixed) {
        throw std::invalid_argument("noise studies need the rk4 integrator");
    }
    if (stages.empty()) throw std::invalid_argument("at least one stage is required");
    if (stages.front().t_start != 0.0) throw std::invalid_argument("the first stage must start at t=0");
    if (reference == QuietReference::first_stage && stages.front().beta != 0.0) {
        throw std::invalid_argument("the first stage is the quiet reference and needs beta=0");
    }
    if (component < 0 || component > 2) throw std::invalid_argument("component must be 0, 1 or 2");
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const Stage& st = stages[s];
        if (!(st.t_start < st.t_end)) throw std::invalid_argument("stage needs t_start < t_end");
        if (s > 0 && st.t_start != stages[s - 1].t_end) throw std::invalid_argument("stages must be contiguous");
        if (!(st.beta >= 0.0)) throw std::invalid_argument("stage beta must be non-negative");
        if (!(st.t_start <= st.window_a && st.window_a < st.window_b && st.window_b <= st.t_end)) {
            throw std::invalid_argument("stage analysis window must lie inside its stage");
        }
        const double w = st.window_b - st.window_a;
        if (std::abs(w - (stages.front().window_b - stages.front().window_a)) > 1e-9) {
            throw std::invalid_argument("all stage windows must have the same length");
        }
    }
}

NoiseSchedule staged_schedule(const RigidityConfig& cfg, std::uint64_t seed) {
    std::vector<NoiseSchedule> parts;
    for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
        NoiseSpec spec;
        spec.kind = cfg.kind;
        spec.beta = cfg.stages[s].beta;
        spec.dt_noise = cfg.dt_noise;
        spec.seed = derive_seed(seed, s);
        spec.t_start = cfg.stages[s].t_start;
        spec.t_end = cfg.stages[s].t_end;
        spec.independent_components = cfg.independent_components;
        parts.push_back(make_noise_schedule(spec));
    }
    return concatenate(parts);
}

RigidityRun run_rigidity(const RigidityConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const ClusterGeometry geom(cfg.rows, cfg.cols);
    auto schedule = std::make_shared<const NoiseSchedule>(staged_schedule(cfg, seed));
    const ClusterState state0 = build_initial_state(cfg.initial, geom);
    const double t_end = cfg.stages.back().t_end;
    const Trajectory traj = integrate(state0, cfg.params, geom, t_end, cfg.integrator, schedule);
    static const char* names[] = {"sx", "sy", "sz"};
    auto spectra_of = [&](const Trajectory& tr) {
        const auto series = tr.series(cfg.component);
        std::vector<Spectrum> out;
        for (const Stage& st : cfg.stages) {
            out.push_back(amplitude_spectrum(series, tr.sample_dt(), st.window_a, st.window_b, 0.0,
                                             kDefaultFrequencyConvention, names[cfg.component]));
        }
        return out;
    };

    RigidityRun run;
    run.seed = seed;
    run.spectra = spectra_of(traj);
    if (cfg.reference == QuietReference::same_window) {
        run.quiet = spectra_of(integrate(state0, cfg.params, geom, t_end, cfg.integrator));
    } else {
        run.quiet.assign(cfg.stages.size(), run.spectra.front());
    }
    for (std::size_t s = 0; s < run.spectra.size(); ++s) {
        run.fractions.push_back(crystalline_fraction(run.spectra[s], run.quiet[s], cfg.spectral));
    }
    return run;
}

RigiditySummary summarize(const std::vector<RigidityRun>& runs) {
    RigiditySummary out;
    if (runs.empty()) return out;
    const std::size_t stages = runs.front().fractions.size();
    out.mean.assign(stages, 0.0);
    out.stddev.assign(stages, 0.0);
    const double n = static_cast<double>(runs.size());
    for (std::size_t s = 0; s < stages; ++s) {
        for (const auto& r : runs) out.mean[s] += r.fractions.at(s).omega_rcf;
        out.mean[s] /= n;
        if (runs.size() < 2) continue;
        double ss = 0.0;
        for (const auto& r : runs) ss += std::pow(r.fractions[s].omega_rcf - out.mean[s], 2);
        out.stddev[s] = std::sqrt(ss / (n - 1.0));
    }
    return out;
}

}  // namespace ctc
