#include "ctc/phases.hpp"

#include "ctc/csv.hpp"
#include "ctc/errors.hpp"
#include "ctc/noise.hpp"
#include "ctc/parallel.hpp"
#include "ctc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ctc {

namespace {

constexpr int kCheckpointVersion = 1;

double component(const BlochVector& v, int c) { return c == 0 ? v.x : c == 1 ? v.y : v.z; }

double window_amplitude(const Trajectory& traj, double t_relax) {
    double amp = 0.0;
    const std::size_t sites = traj.states.front().size();
    for (std::size_t n = 0; n < sites; ++n) {
        for (int c = 0; c < 3; ++c) {
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t i = 0; i < traj.size(); ++i) {
                if (traj.t[i] < t_relax - 1e-9) continue;
                const double v = component(traj.states[i][n], c);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            amp = std::max(amp, hi - lo);
        }
    }
    return amp;
}

double nonuniformity(const ClusterState& s) {
    double u = 0.0;
    for (std::size_t a = 0; a < s.size(); ++a) {
        for (std::size_t b = a + 1; b < s.size(); ++b) {
            u = std::max({u, std::abs(s[a].x - s[b].x), std::abs(s[a].y - s[b].y), std::abs(s[a].z - s[b].z)});
        }
    }
    return u;
}

double distance_from_pm(const ClusterState& s) {
    double d = 0.0;
    for (const auto& v : s) d = std::max({d, std::abs(v.x), std::abs(v.y), std::abs(v.z + 1.0)});
    return d;
}

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_optional(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

nlohmann::json label_to_json(std::size_t index, const PhaseLabel& l) {
    return {{"index", index},
            {"label", to_string(l.phase)},
            {"amplitude", l.amplitude},
            {"nonuniformity", l.nonuniformity},
            {"lambda", optional_number(l.lambda)},
            {"omega_p", optional_number(l.omega_p)}};
}

std::string checkpoint_hash(const SweepConfig& cfg) { return fnv1a_hex(sweep_identity(cfg).dump()); }

void write_checkpoint(const PhaseDiagram& d) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t i = 0; i < d.points.size(); ++i) {
        if (d.points[i]) points.push_back(label_to_json(i, *d.points[i]));
    }
    const std::string body = points.dump();
    const nlohmann::json doc = {{"version", kCheckpointVersion},
                                {"sweep_hash", checkpoint_hash(d.config)},
                                {"points_checksum", fnv1a_hex(body)},
                                {"points", points}};
    const auto tmp = std::filesystem::path(d.config.checkpoint.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out << doc.dump() << '\n';
        if (!out) throw IoError("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, d.config.checkpoint);
}

void load_checkpoint(PhaseDiagram& d) {
    std::ifstream in(d.config.checkpoint, std::ios::binary);
    if (!in) return;
    try {
        const nlohmann::json doc = nlohmann::json::parse(in);
        if (doc.at("version").get<int>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
        if (doc.at("sweep_hash").get<std::string>() != checkpoint_hash(d.config)) {
            throw CheckpointError("checkpoint belongs to a different sweep configuration");
        }
        const auto& points = doc.at("points");
        if (doc.at("points_checksum").get<std::string>() != fnv1a_hex(points.dump())) {
            throw CheckpointError("checkpoint checksum mismatch");
        }
        for (const auto& p : points) {
            const auto index = p.at("index").get<std::size_t>();
            if (index >= d.points.size()) throw CheckpointError("checkpoint point index out of range");
            PhaseLabel l;
            l.phase = phase_from_string(p.at("label").get<std::string>());
            l.amplitude = p.at("amplitude").get<double>();
            l.nonuniformity = p.at("nonuniformity").get<double>();
            l.lambda = read_optional(p.at("lambda"));
            l.omega_p = read_optional(p.at("omega_p"));
            d.points[index] = l;
        }
    } catch (const CheckpointError& e) {
        throw CheckpointError(d.config.checkpoint.string() + ": " + e.what() + "; rerun with an explicit restart");
    } catch (const std::exception& e) {
        throw CheckpointError(d.config.checkpoint.string() + ": corrupt checkpoint (" + e.what() +
                              "); rerun with an explicit restart");
    }
}

}  // namespace

const char* to_string(Phase p) {
    switch (p) {
        case Phase::PM: return "PM";
        case Phase::FM: return "FM";
        case Phase::SDW: return "SDW";
        case Phase::LC: return "LC";
        case Phase::Chaos: return "Chaos";
    }
    return "?";
}

Phase phase_from_string(const std::string& s) {
    for (Phase p : {Phase::PM, Phase::FM, Phase::SDW, Phase::LC, Phase::Chaos}) {
        if (s == to_string(p)) return p;
    }
    throw std::invalid_argument("unknown phase label '" + s + "'");
}

void ClassifyConfig::validate() const {
    if (!(t_relax >= 0.0) || !(t_relax < t_total)) throw std::invalid_argument("classify needs 0 <= t_relax < t_total");
    if (!(eps_osc > 0.0) || !(eps_pm > 0.0) || !(eps_unif > 0.0)) {
        throw std::invalid_argument("classification thresholds must be positive");
    }
    integrator.validate();
    lyapunov.validate();
}

PhaseLabel classify(const CouplingParams& params, const ClusterGeometry& geom, const InitialStateSpec& spec,
                    const ClassifyConfig& cfg) {
    cfg.validate();
    Trajectory traj;
    try {
        traj = integrate(build_initial_state(spec, geom), params, geom, cfg.t_total, cfg.integrator);
    } catch (const NumericalError& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "classification failed at jx=%g jy=%g jz=%g: ", params.jx, params.jy,
                      params.jz);
        throw NumericalError(buf + std::string(e.what()), e.time());
    }

    PhaseLabel label;
    label.amplitude = window_amplitude(traj, cfg.t_relax);
    label.nonuniformity = nonuniformity(traj.states.back());
    if (label.amplitude < cfg.eps_osc) {
        if (distance_from_pm(traj.states.back()) < cfg.eps_pm) {
            label.phase = Phase::PM;
        } else {
            label.phase = label.nonuniformity < cfg.eps_unif ? Phase::FM : Phase::SDW;
        }
        return label;
    }

    const LyapunovResult ly = lyapunov_exponent(params, geom, spec, cfg.lyapunov);
    label.lambda = ly.lambda;
    label.phase = ly.lambda > cfg.chaos_threshold ? Phase::Chaos : Phase::LC;
    if (label.phase == Phase::LC) {
        const auto sx = traj.series(0);
        const double t_end = traj.t.back();
        try {
            label.omega_p = dominant_peak(amplitude_spectrum(sx, traj.sample_dt(), cfg.t_relax, t_end));
        } catch (const PeakNotFound&) {
        } catch (const std::invalid_argument&) {
        }
    }
    return label;
}

double GridAxis::value(int i) const {
    if (steps <= 1) return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

void SweepConfig::validate() const {
    for (const auto* ax : {&first, &second}) {
        base.get(ax->name);
        if (ax->steps < 1) throw std::invalid_argument("sweep axis '" + ax->name + "' needs steps >= 1");
        if (ax->steps > 1 && !(ax->lo < ax->hi)) throw std::invalid_argument("sweep axis needs lo < hi");
    }
    if (first.name == second.name) throw std::invalid_argument("sweep axes must differ");
    if (chunk_size < 1) throw std::invalid_argument("chunk_size must be >= 1");
    ClusterGeometry(rows, cols);
    base.validate();
    classify.validate();
}

std::size_t SweepConfig::point_count() const {
    return static_cast<std::size_t>(first.steps) * static_cast<std::size_t>(second.steps);
}

std::pair<int, int> SweepConfig::grid_coords(std::size_t index) const {
    const auto n2 = static_cast<std::size_t>(second.steps);
    return {static_cast<int>(index / n2), static_cast<int>(index % n2)};
}

CouplingParams SweepConfig::params_at(std::size_t index) const {
    const auto [i, j] = grid_coords(index);
    return base.with(first.name, first.value(i)).with(second.name, second.value(j));
}

std::uint64_t SweepConfig::point_seed(std::size_t index) const {
    return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

bool PhaseDiagram::complete() const {
    return std::all_of(points.begin(), points.end(), [](const auto& p) { return p.has_value(); });
}

PhaseDiagram sweep(const SweepConfig& cfg, const SweepProgress& progress) {
    cfg.validate();
    const ClusterGeometry geom(cfg.rows, cfg.cols);
    PhaseDiagram diagram;
    diagram.config = cfg;
    diagram.points.resize(cfg.point_count());
    if (cfg.resume && !cfg.checkpoint.empty()) load_checkpoint(diagram);

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < diagram.points.size(); ++i) {
        if (!diagram.points[i]) todo.push_back(i);
    }
    if (cfg.max_new_points > 0 && todo.size() > cfg.max_new_points) todo.resize(cfg.max_new_points);

    std::size_t done = diagram.points.size() - std::count_if(diagram.points.begin(), diagram.points.end(),
                                                             [](const auto& p) { return !p.has_value(); });
    const auto chunk = static_cast<std::size_t>(cfg.chunk_size);
    for (std::size_t start = 0; start < todo.size(); start += chunk) {
        const std::size_t count = std::min(chunk, todo.size() - start);
        parallel_for(count, cfg.workers, [&](std::size_t k) {
            const std::size_t index = todo[start + k];
            ClassifyConfig cc = cfg.classify;
            cc.lyapunov.seed = cfg.point_seed(index);
            diagram.points[index] = classify(cfg.params_at(index), geom, cfg.initial, cc);
        });
        done += count;
        if (!cfg.checkpoint.empty()) write_checkpoint(diagram);
        if (progress) progress(done, diagram.points.size());
    }
    return diagram;
}

void write_phase_csv(const PhaseDiagram& diagram, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const auto& cfg = diagram.config;
    out << cfg.first.name << ',' << cfg.second.name << ",label,amplitude,nonuniformity,lambda,omega_p\n";
    for (std::size_t i = 0; i < diagram.points.size(); ++i) {
        if (!diagram.points[i]) continue;
        const auto& l = *diagram.points[i];
        const auto [a, b] = cfg.grid_coords(i);
        out << format_exact(cfg.first.value(a)) << ',' << format_exact(cfg.second.value(b)) << ','
            << to_string(l.phase) << ',' << format_exact(l.amplitude) << ',' << format_exact(l.nonuniformity) << ','
            << (l.lambda ? format_exact(*l.lambda) : "") << ',' << (l.omega_p ? format_exact(*l.omega_p) : "")
            << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json to_json(const InitialStateSpec& spec) {
    auto vec = [](const BlochVector& v) { return nlohmann::json::array({v.x, v.y, v.z}); };
    if (std::holds_alternative<EquatorPhase>(spec)) return {{"kind", "equator_phase"}};
    if (std::holds_alternative<RowColPhase>(spec)) return {{"kind", "row_col_phase"}};
    if (const auto* u = std::get_if<Uniform>(&spec)) return {{"kind", "uniform"}, {"bloch", vec(u->bloch)}};
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& v : std::get<Explicit>(spec).sites) sites.push_back(vec(v));
    return {{"kind", "explicit"}, {"bloch", sites}};
}

nlohmann::json to_json(const ClassifyConfig& c) {
    return {{"t_total", c.t_total},
            {"t_relax", c.t_relax},
            {"eps_osc", c.eps_osc},
            {"eps_pm", c.eps_pm},
            {"eps_unif", c.eps_unif},
            {"chaos_threshold", c.chaos_threshold},
            {"integrator",
             {{"method", to_string(c.integrator.method)},
              {"dt", c.integrator.dt},
              {"abs_tol", c.integrator.abs_tol},
              {"rel_tol", c.integrator.rel_tol},
              {"sample_dt", c.integrator.sample_dt}}},
            {"lyapunov",
             {{"epsilon", c.lyapunov.epsilon},
              {"delta_max", c.lyapunov.delta_max},
              {"t_total", c.lyapunov.t_total},
              {"t_transient", c.lyapunov.t_transient},
              {"dt", c.lyapunov.dt},
              {"sample_dt", c.lyapunov.sample_dt}}}};
}

nlohmann::json sweep_identity(const SweepConfig& cfg) {
    auto axis = [](const GridAxis& a) {
        return nlohmann::json{{"name", a.name}, {"lo", a.lo}, {"hi", a.hi}, {"steps", a.steps}};
    };
    return {{"first", axis(cfg.first)},
            {"second", axis(cfg.second)},
            {"base", {{"jx", cfg.base.jx}, {"jy", cfg.base.jy}, {"jz", cfg.base.jz}, {"gamma", cfg.base.gamma}}},
            {"geometry", {{"rows", cfg.rows}, {"cols", cfg.cols}}},
            {"initial_state", to_json(cfg.initial)},
            {"classify", to_json(cfg.classify)},
            {"base_seed", cfg.base_seed}};
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ctc
