#include "cli.hpp"

#include "ctc/chaos.hpp"
#include "ctc/csv.hpp"
#include "ctc/dynamics.hpp"
#include "ctc/errors.hpp"
#include "ctc/parallel.hpp"
#include "ctc/phases.hpp"
#include "ctc/rigidity.hpp"
#include "ctc/stability.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#ifndef CTC_VERSION
#define CTC_VERSION "0.0.0"
#endif

namespace ctc::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

/// Base point of a noise study did not classify as a limit cycle.
class NotLimitCycle : public std::runtime_error {
public:
    NotLimitCycle(const std::string& what, PhaseLabel label) : std::runtime_error(what), label(label) {}
    PhaseLabel label;
};

// Strict view of a JSON object: every key must be read, or finish() fails.
class Obj {
public:
    Obj(const json& j, std::string where) : j_(&j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const std::string& key) const { return j_->contains(key); }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return need<T>(key);
    }

    template <class T>
    T need(const std::string& key) {
        const json& v = raw(key);
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key) + ": wrong type");
        }
    }

    const json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(path(key) + ": required key missing");
        used_.insert(key);
        return j_->at(key);
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void finish() const {
        for (const auto& item : j_->items()) {
            if (!used_.count(item.key())) throw ConfigError(path(item.key()) + ": unknown key");
        }
    }

private:
    const json* j_;
    std::string where_;
    std::set<std::string> used_;
};

template <class F>
auto with_child(Obj& parent, const std::string& key, F&& fn) {
    Obj child(parent.raw(key), parent.path(key));
    auto result = fn(child);
    child.finish();
    return result;
}

double positive_number(Obj& o, const std::string& key, double fallback) {
    const double v = o.get<double>(key, fallback);
    if (!(v > 0.0)) throw ConfigError(o.path(key) + ": must be positive");
    return v;
}

CouplingParams parse_couplings(Obj& parent, bool require_xy, CouplingParams fallback = {0.0, 0.0, 1.0, 1.0}) {
    if (!parent.has("couplings")) {
        if (require_xy) throw ConfigError(parent.path("couplings") + ": required key missing");
        return fallback;
    }
    return with_child(parent, "couplings", [&](Obj& o) {
        CouplingParams p = fallback;
        p.jx = require_xy ? o.need<double>("jx") : o.get<double>("jx", p.jx);
        p.jy = require_xy ? o.need<double>("jy") : o.get<double>("jy", p.jy);
        p.jz = o.get<double>("jz", p.jz);
        p.gamma = o.get<double>("gamma", p.gamma);
        return p;
    });
}

std::pair<int, int> parse_geometry(Obj& parent) {
    if (!parent.has("geometry")) return {3, 3};
    return with_child(parent, "geometry", [](Obj& o) {
        return std::pair<int, int>{o.get<int>("rows", 3), o.get<int>("cols", 3)};
    });
}

BlochVector parse_bloch(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
    try {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } catch (const json::exception&) {
        throw ConfigError(where + ": expected numbers");
    }
}

InitialStateSpec parse_initial_state(Obj& parent, const std::string& key = "initial_state") {
    if (!parent.has(key)) return EquatorPhase{};
    return with_child(parent, key, [&](Obj& o) -> InitialStateSpec {
        const auto kind = o.need<std::string>("kind");
        if (kind == "equator_phase") return EquatorPhase{};
        if (kind == "row_col_phase") return RowColPhase{};
        if (kind == "uniform") return Uniform{parse_bloch(o.raw("bloch"), o.path("bloch"))};
        if (kind == "explicit") {
            const json& sites = o.raw("bloch");
            if (!sites.is_array()) throw ConfigError(o.path("bloch") + ": expected a list of [x, y, z]");
            Explicit e;
            for (std::size_t i = 0; i < sites.size(); ++i) {
                e.sites.push_back(parse_bloch(sites[i], o.path("bloch") + "[" + std::to_string(i) + "]"));
            }
            return e;
        }
        throw ConfigError(o.path("kind") + ": unknown initial state '" + kind + "'");
    });
}

IntegratorConfig parse_integrator(Obj& parent) {
    IntegratorConfig cfg;
    if (!parent.has("integrator")) return cfg;
    return with_child(parent, "integrator", [&](Obj& o) {
        if (o.has("method")) {
            try {
                cfg.method = integrator_method_from_string(o.need<std::string>("method"));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(o.path("method") + ": " + e.what());
            }
        }
        cfg.dt = positive_number(o, "dt", cfg.dt);
        cfg.abs_tol = positive_number(o, "abs_tol", cfg.abs_tol);
        cfg.rel_tol = positive_number(o, "rel_tol", cfg.rel_tol);
        cfg.sample_dt = positive_number(o, "sample_dt", cfg.sample_dt);
        return cfg;
    });
}

LyapunovConfig parse_lyapunov(Obj& parent) {
    LyapunovConfig cfg;
    if (!parent.has("lyapunov")) return cfg;
    return with_child(parent, "lyapunov", [&](Obj& o) {
        cfg.epsilon = positive_number(o, "epsilon", cfg.epsilon);
        cfg.delta_max = positive_number(o, "delta_max", cfg.delta_max);
        cfg.t_total = positive_number(o, "t_total", cfg.t_total);
        cfg.t_transient = o.get<double>("t_transient", cfg.t_transient);
        cfg.dt = positive_number(o, "dt", cfg.dt);
        cfg.sample_dt = positive_number(o, "sample_dt", cfg.sample_dt);
        return cfg;
    });
}

ClassifyConfig parse_classify(Obj& parent) {
    ClassifyConfig cfg;
    if (!parent.has("classify")) return cfg;
    return with_child(parent, "classify", [&](Obj& o) {
        cfg.t_total = positive_number(o, "t_total", cfg.t_total);
        cfg.t_relax = o.get<double>("t_relax", cfg.t_relax);
        cfg.eps_osc = positive_number(o, "eps_osc", cfg.eps_osc);
        cfg.eps_pm = positive_number(o, "eps_pm", cfg.eps_pm);
        cfg.eps_unif = positive_number(o, "eps_unif", cfg.eps_unif);
        cfg.chaos_threshold = o.get<double>("chaos_threshold", cfg.chaos_threshold);
        cfg.integrator = parse_integrator(o);
        cfg.lyapunov = parse_lyapunov(o);
        return cfg;
    });
}

NoiseKind parse_noise_kind(Obj& o) {
    const auto kind = o.get<std::string>("kind", "white");
    if (kind == "white") return NoiseKind::white;
    if (kind == "pink") return NoiseKind::pink;
    throw ConfigError(o.path("kind") + ": expected 'white' or 'pink'");
}

GridAxis parse_axis(Obj& parent, const std::string& key, GridAxis fallback) {
    if (!parent.has(key)) return fallback;
    return with_child(parent, key, [&](Obj& o) {
        GridAxis a;
        a.name = o.need<std::string>("name");
        a.lo = o.need<double>("lo");
        a.hi = o.need<double>("hi");
        a.steps = o.need<int>("steps");
        return a;
    });
}

std::uint64_t parse_seed(Obj& o) { return o.get<std::uint64_t>("seed", 0); }

json read_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct Context {
    std::string command;
    json config;
    fs::path out_dir;
    int workers = 1;
    bool resume = false;
    bool restart = false;
    std::size_t max_points = 0;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;

    json meta(json seeds) const {
        return {{"tool", "ctc"},
                {"version", CTC_VERSION},
                {"command", command},
                {"config_hash", fnv1a_hex(config.dump())},
                {"config", config},
                {"seeds", std::move(seeds)}};
    }

    void progress(std::size_t done, std::size_t total) const {
        *err << "progress " << command << ' ' << done << '/' << total << std::endl;
    }
};

void prepare_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    const fs::path probe = dir / ".ctc-write-test";
    {
        std::ofstream test(probe, std::ios::binary);
        if (!test) throw IoError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

json label_json(const PhaseLabel& l) {
    return {{"label", to_string(l.phase)},
            {"amplitude", l.amplitude},
            {"nonuniformity", l.nonuniformity},
            {"lambda", l.lambda ? json(*l.lambda) : json(nullptr)},
            {"omega_p", l.omega_p ? json(*l.omega_p) : json(nullptr)}};
}

int cmd_trajectory(Context& ctx) {
    Obj root(ctx.config, "config");
    const CouplingParams params = parse_couplings(root, true);
    const auto [rows, cols] = parse_geometry(root);
    const InitialStateSpec init = parse_initial_state(root);
    const IntegratorConfig integrator = parse_integrator(root);
    const double t_end = positive_number(root, "t_end", 600.0);
    const std::uint64_t seed = parse_seed(root);
    std::shared_ptr<const NoiseSchedule> noise;
    if (root.has("noise")) {
        NoiseSpec spec = with_child(root, "noise", [&](Obj& o) {
            NoiseSpec s;
            s.kind = parse_noise_kind(o);
            s.beta = o.get<double>("beta", 0.0);
            s.dt_noise = positive_number(o, "dt_noise", s.dt_noise);
            s.t_start = o.get<double>("t_start", 0.0);
            s.t_end = o.get<double>("t_end", t_end);
            s.independent_components = o.get<bool>("independent_components", false);
            return s;
        });
        spec.seed = seed;
        noise = std::make_shared<const NoiseSchedule>(make_noise_schedule(spec));
    }
    root.finish();

    const ClusterGeometry geom(rows, cols);
    prepare_out_dir(ctx.out_dir);
    const Trajectory traj = integrate(build_initial_state(init, geom), params, geom, t_end, integrator, noise);
    write_trajectory_csv(traj, ctx.out_dir / "trajectory.csv");
    if (noise) write_schedule_csv(*noise, ctx.out_dir / "noise.csv");
    write_json(ctx.out_dir / "meta.json", ctx.meta({{"noise", seed}}));
    *ctx.out << "wrote " << (ctx.out_dir / "trajectory.csv").string() << '\n';
    return kOk;
}

int cmd_phase_diagram(Context& ctx) {
    Obj root(ctx.config, "config");
    SweepConfig cfg;
    cfg.base = parse_couplings(root, false, cfg.base);
    std::tie(cfg.rows, cfg.cols) = parse_geometry(root);
    cfg.initial = parse_initial_state(root);
    cfg.first = parse_axis(root, "first_axis", cfg.first);
    cfg.second = parse_axis(root, "second_axis", cfg.second);
    cfg.classify = parse_classify(root);
    cfg.base_seed = parse_seed(root);
    cfg.chunk_size = root.get<int>("chunk_size", cfg.chunk_size);
    root.finish();

    cfg.workers = ctx.workers;
    cfg.checkpoint = ctx.out_dir / "checkpoint.json";
    cfg.resume = ctx.resume;
    cfg.max_new_points = ctx.max_points;
    cfg.validate();

    prepare_out_dir(ctx.out_dir);
    if (ctx.restart) fs::remove(cfg.checkpoint);
    const PhaseDiagram diagram = sweep(cfg, [&](std::size_t done, std::size_t total) { ctx.progress(done, total); });

    json seeds = json::array();
    for (std::size_t i = 0; i < cfg.point_count(); ++i) seeds.push_back(cfg.point_seed(i));
    json meta = ctx.meta({{"base", cfg.base_seed}, {"per_point", seeds}});
    meta["grid"] = sweep_identity(cfg);
    write_json(ctx.out_dir / "meta.json", meta);
    if (!diagram.complete()) {
        const auto missing = std::count_if(diagram.points.begin(), diagram.points.end(),
                                           [](const auto& p) { return !p.has_value(); });
        *ctx.out << "incomplete: " << missing << " of " << diagram.points.size()
                 << " points left; rerun with --resume\n";
        return kOk;
    }
    write_phase_csv(diagram, ctx.out_dir / "phase_diagram.csv");
    *ctx.out << "wrote " << (ctx.out_dir / "phase_diagram.csv").string() << '\n';
    return kOk;
}

int cmd_stability_scan(Context& ctx) {
    Obj root(ctx.config, "config");
    const CouplingParams base = parse_couplings(root, true);
    const auto [rows, cols] = parse_geometry(root);
    const GridAxis axis = parse_axis(root, "axis", GridAxis{"jy", 1.02, 1.5, 48});
    InitialStateSpec seed_state = RowColPhase{};
    double t_relax = 400.0;
    if (root.has("seed_state")) {
        with_child(root, "seed_state", [&](Obj& o) {
            seed_state = o.has("initial_state") ? parse_initial_state(o) : InitialStateSpec{RowColPhase{}};
            t_relax = o.get<double>("t_relax", t_relax);
            return 0;
        });
    }
    ScanOptions opts;
    if (root.has("newton")) {
        opts.newton = with_child(root, "newton", [](Obj& o) {
            NewtonOptions n;
            n.max_iter = o.get<int>("max_iter", n.max_iter);
            n.tol = positive_number(o, "tol", n.tol);
            n.max_halvings = o.get<int>("max_halvings", n.max_halvings);
            return n;
        });
    }
    opts.bisection_tol = positive_number(root, "bisection_tol", opts.bisection_tol);
    opts.branch_jump = positive_number(root, "branch_jump", opts.branch_jump);
    root.finish();
    opts.workers = ctx.workers;
    if (axis.steps < 8) throw ConfigError("config.axis.steps: a scan needs at least 8 intervals");
    base.validate();

    const ClusterGeometry geom(rows, cols);
    prepare_out_dir(ctx.out_dir);
    const CouplingParams start = base.with(axis.name, axis.lo);
    const ClusterState guess = relaxed_guess(start, geom, seed_state, t_relax);
    const StabilityScan scan =
        scan_stability_boundary(base, geom, axis.name, axis.lo, axis.hi, axis.steps, guess, opts);
    write_scan_csv(scan, ctx.out_dir / "stability_scan.csv");

    json gaps = json::array();
    for (const auto& [a, b] : scan.gaps) gaps.push_back({a, b});
    bool pair_throughout = true;
    for (const auto& p : scan.points) pair_throughout = pair_throughout && p.conjugate_pair;
    json meta = ctx.meta(json::object());
    meta["result"] = {{"crossings", scan.crossings},
                      {"gaps", gaps},
                      {"branch_switches", scan.branch_switches},
                      {"conjugate_pair_throughout", pair_throughout}};
    write_json(ctx.out_dir / "meta.json", meta);
    for (double c : scan.crossings) *ctx.out << "crossing " << axis.name << '=' << format_exact(c) << '\n';
    return kOk;
}

int cmd_lyapunov(Context& ctx) {
    Obj root(ctx.config, "config");
    const CouplingParams params = parse_couplings(root, true);
    const auto [rows, cols] = parse_geometry(root);
    const InitialStateSpec init = parse_initial_state(root);
    LyapunovConfig cfg = parse_lyapunov(root);
    cfg.seed = parse_seed(root);
    cfg.record_trace = root.get<bool>("write_trace", false);
    root.finish();

    const ClusterGeometry geom(rows, cols);
    prepare_out_dir(ctx.out_dir);
    const LyapunovResult r = lyapunov_exponent(params, geom, init, cfg);
    if (cfg.record_trace) write_lyapunov_trace_csv(r, ctx.out_dir / "lyapunov_trace.csv");
    write_json(ctx.out_dir / "lyapunov.json", {{"lambda", r.lambda},
                                                {"reset_count", r.reset_count},
                                                {"reset_count_with_transient", r.reset_times.size()},
                                                {"delta0", r.delta0},
                                                {"perturbation_attempts", r.perturbation_attempts}});
    write_json(ctx.out_dir / "meta.json", ctx.meta({{"perturbation", cfg.seed}}));
    *ctx.out << "lambda " << format_exact(r.lambda) << " resets " << r.reset_count << '\n';
    return kOk;
}

std::string file_number(double v) {
    std::string s = format_exact(v);
    for (char& c : s) {
        if (c == '.') c = 'p';
        if (c == '-') c = 'm';
    }
    return s;
}

int cmd_noise_rigidity(Context& ctx) {
    Obj root(ctx.config, "config");
    RigidityConfig base;
    base.params = parse_couplings(root, true);
    std::tie(base.rows, base.cols) = parse_geometry(root);
    base.initial = parse_initial_state(root);
    base.integrator = parse_integrator(root);
    if (root.has("noise")) {
        with_child(root, "noise", [&](Obj& o) {
            base.kind = parse_noise_kind(o);
            base.dt_noise = positive_number(o, "dt_noise", base.dt_noise);
            base.independent_components = o.get<bool>("independent_components", false);
            return 0;
        });
    }
    if (root.has("spectral")) {
        base.spectral = with_child(root, "spectral", [](Obj& o) {
            SpectralConfig s;
            s.delta_omega = positive_number(o, "delta_omega", s.delta_omega);
            s.Delta_omega = positive_number(o, "Delta_omega", s.Delta_omega);
            return s;
        });
    }
    const auto reference = root.get<std::string>("quiet_reference", "first_stage");
    if (reference == "same_window") base.reference = QuietReference::same_window;
    else if (reference == "first_stage") base.reference = QuietReference::first_stage;
    else throw ConfigError("config.quiet_reference: expected same_window or first_stage");
    const auto component = root.get<std::string>("observable", "sx");
    if (component == "sx") base.component = 0;
    else if (component == "sy") base.component = 1;
    else if (component == "sz") base.component = 2;
    else throw ConfigError("config.observable: expected sx, sy or sz");

    std::vector<Stage> stages = default_stages();
    if (root.has("stages")) {
        const json& js = root.raw("stages");
        if (!js.is_array() || js.empty()) throw ConfigError("config.stages: expected a non-empty list");
        stages.clear();
        for (std::size_t i = 0; i < js.size(); ++i) {
            Obj o(js[i], "config.stages[" + std::to_string(i) + "]");
            Stage st;
            st.t_start = o.need<double>("t_start");
            st.t_end = o.need<double>("t_end");
            const auto w = o.need<std::vector<double>>("window");
            if (w.size() != 2) throw ConfigError(o.path("window") + ": expected [t_a, t_b]");
            st.window_a = w[0];
            st.window_b = w[1];
            o.finish();
            stages.push_back(st);
        }
    }
    std::vector<double> stage_betas = root.get<std::vector<double>>("stage_betas", {0.0, 0.04, 0.2});
    if (stage_betas.size() != stages.size()) {
        throw ConfigError("config.stage_betas: need one beta per stage (" + std::to_string(stages.size()) + ")");
    }
    for (std::size_t s = 0; s < stages.size(); ++s) stages[s].beta = stage_betas[s];
    const std::vector<double> beta_scan = root.get<std::vector<double>>("beta_scan", {});
    const int seed_count = root.get<int>("seeds", 8);
    if (seed_count < 1) throw ConfigError("config.seeds: need at least one seed");
    const std::uint64_t seed = parse_seed(root);
    const bool check_base = root.get<bool>("check_base", true);
    ClassifyConfig classify_cfg = parse_classify(root);
    root.finish();

    base.stages = stages;
    try {
        base.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!beta_scan.empty() && stages.size() < 2) throw ConfigError("config.beta_scan: needs at least two stages");

    prepare_out_dir(ctx.out_dir);
    if (check_base) {
        classify_cfg.lyapunov.seed = derive_seed(seed, 0xC1A55);
        const PhaseLabel label = classify(base.params, ClusterGeometry(base.rows, base.cols), base.initial, classify_cfg);
        write_json(ctx.out_dir / "classification.json", label_json(label));
        if (label.phase != Phase::LC) {
            throw NotLimitCycle(std::string("base point classifies as ") + to_string(label.phase) +
                                    ", not LC; see classification.json",
                                label);
        }
    }

    struct Job {
        std::string mode;
        RigidityConfig cfg;
        double beta;
    };
    std::vector<Job> jobs{{"staged", base, stages.back().beta}};
    for (double b : beta_scan) {
        RigidityConfig c = base;
        c.stages.resize(2);
        c.stages[1].beta = b;
        jobs.push_back({"scan", c, b});
    }

    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < seed_count; ++i) seeds.push_back(derive_seed(seed, static_cast<std::uint64_t>(i)));

    const std::size_t total = jobs.size() * seeds.size();
    std::vector<RigidityRun> runs(total);
    std::size_t done = 0;
    const std::size_t chunk = static_cast<std::size_t>(std::max(ctx.workers, 1));
    for (std::size_t start = 0; start < total; start += chunk) {
        const std::size_t count = std::min(chunk, total - start);
        parallel_for(count, ctx.workers, [&](std::size_t k) {
            const std::size_t idx = start + k;
            runs[idx] = run_rigidity(jobs[idx / seeds.size()].cfg, seeds[idx % seeds.size()]);
        });
        done += count;
        ctx.progress(done, total);
    }

    fs::create_directories(ctx.out_dir / "spectra");
    std::ostringstream rcf, scan, detail, summary;
    rcf << "beta,seed,omega_rcf\n";
    scan << "beta,seed,omega_rcf\n";
    detail << "mode,stage,beta,seed,omega,omega_quiet,omega_rcf\n";
    summary << "mode,stage,beta,mean,stddev,seeds\n";
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const Job& job = jobs[j];
        const bool staged = job.mode == "staged";
        std::vector<RigidityRun> group(runs.begin() + static_cast<std::ptrdiff_t>(j * seeds.size()),
                                       runs.begin() + static_cast<std::ptrdiff_t>((j + 1) * seeds.size()));
        for (std::size_t k = 0; k < group.size(); ++k) {
            const RigidityRun& r = group[k];
            for (std::size_t s = 0; s < r.fractions.size(); ++s) {
                const double beta = job.cfg.stages[s].beta;
                const auto& f = r.fractions[s];
                detail << job.mode << ',' << s + 1 << ',' << format_exact(beta) << ',' << r.seed << ','
                       << format_exact(f.omega) << ',' << format_exact(f.omega_quiet) << ','
                       << format_exact(f.omega_rcf) << '\n';
                if (staged) {
                    rcf << format_exact(beta) << ',' << r.seed << ',' << format_exact(f.omega_rcf) << '\n';
                } else if (s == 1) {
                    scan << format_exact(beta) << ',' << r.seed << ',' << format_exact(f.omega_rcf) << '\n';
                }
                const std::string name = job.mode + "_beta" + file_number(job.beta) + "_seed" + std::to_string(k) +
                                         "_stage" + std::to_string(s + 1) + ".csv";
                write_spectrum_csv(r.spectra[s], ctx.out_dir / "spectra" / name);
            }
        }
        const RigiditySummary sum = summarize(group);
        for (std::size_t s = 0; s < sum.mean.size(); ++s) {
            summary << job.mode << ',' << s + 1 << ',' << format_exact(job.cfg.stages[s].beta) << ','
                    << format_exact(sum.mean[s]) << ',' << format_exact(sum.stddev[s]) << ',' << group.size() << '\n';
            if (staged) {
                *ctx.out << "stage " << s + 1 << " beta " << format_exact(job.cfg.stages[s].beta) << " rcf "
                         << format_exact(sum.mean[s]) << " +- " << format_exact(sum.stddev[s]) << '\n';
            }
        }
    }
    write_text(ctx.out_dir / "rcf.csv", rcf.str());
    if (!beta_scan.empty()) write_text(ctx.out_dir / "rcf_scan.csv", scan.str());
    write_text(ctx.out_dir / "rcf_detail.csv", detail.str());
    write_text(ctx.out_dir / "rcf_summary.csv", summary.str());
    write_json(ctx.out_dir / "meta.json",
               ctx.meta({{"base", seed}, {"per_seed", seeds}, {"stage_derivation", "derive_seed(per_seed, stage)"}}));
    return kOk;
}

void write_failure(const Context& ctx, const std::string& kind, const std::string& message,
                   std::optional<double> time = std::nullopt) {
    if (ctx.out_dir.empty() || !fs::is_directory(ctx.out_dir)) return;
    json j = {{"error", kind}, {"message", message}, {"command", ctx.command}};
    if (time) j["time"] = *time;
    std::ofstream out(ctx.out_dir / "error.json", std::ios::binary);
    out << j.dump(2) << '\n';
}

int default_workers() {
    if (const char* env = std::getenv("CTC_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w >= 1) return w;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mean-field dissipative spin-lattice simulator", "ctc"};
    app.set_version_flag("--version", std::string(CTC_VERSION));
    app.require_subcommand(1);

    Context ctx;
    ctx.out = &out;
    ctx.err = &err;
    ctx.workers = default_workers();
    std::string config_path, out_dir;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"trajectory", "integrate one trajectory"},
        {"phase-diagram", "classify a two-parameter grid (checkpointed)"},
        {"stability-scan", "track a fixed point and its leading eigenvalues along one coupling"},
        {"lyapunov", "largest Lyapunov exponent at one point"},
        {"noise-rigidity", "staged coupling-noise study of a limit cycle"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config_path, "JSON run configuration")->required();
        sub->add_option("-o,--out", out_dir, "output directory")->required();
        sub->add_option("-w,--workers", ctx.workers, "worker threads (default: $CTC_WORKERS or 1)")
            ->check(CLI::PositiveNumber);
        if (name == "phase-diagram") {
            sub->add_flag("--resume", ctx.resume, "continue from the checkpoint in the output directory");
            sub->add_flag("--restart", ctx.restart, "discard any existing checkpoint");
            sub->add_option("--max-points", ctx.max_points, "stop after classifying this many new points");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        const int code = app.exit(e, o, er);
        out << o.str();
        err << er.str();
        return code == 0 ? kOk : kConfigError;
    }
    for (CLI::App* sub : app.get_subcommands()) ctx.command = sub->get_name();
    ctx.out_dir = out_dir;

    try {
        if (ctx.resume && ctx.restart) throw ConfigError("--resume and --restart are mutually exclusive");
        ctx.config = read_config(config_path);
        if (ctx.command == "trajectory") return cmd_trajectory(ctx);
        if (ctx.command == "phase-diagram") return cmd_phase_diagram(ctx);
        if (ctx.command == "stability-scan") return cmd_stability_scan(ctx);
        if (ctx.command == "lyapunov") return cmd_lyapunov(ctx);
        if (ctx.command == "noise-rigidity") return cmd_noise_rigidity(ctx);
        throw ConfigError("unknown command " + ctx.command);
    } catch (const NotLimitCycle& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << '\n';
        return kIoError;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIoError;
    } catch (const fs::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return kIoError;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << " (t=" << e.time() << ")\n";
        write_failure(ctx, "numerical", e.what(), e.time());
        return kNumericalError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::out_of_range& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        write_failure(ctx, "numerical", e.what());
        return kNumericalError;
    }
}

}  // namespace ctc::cli
