#include "ctc/dynamics.hpp"

#include "ctc/csv.hpp"
#include "ctc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace ctc {

namespace {

bool all_finite(const ClusterState& s) {
    return std::all_of(s.begin(), s.end(), [](const BlochVector& v) {
        return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
    });
}

void axpy(std::span<const BlochVector> x, double a, std::span<const BlochVector> k, std::span<BlochVector> out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = {x[i].x + a * k[i].x, x[i].y + a * k[i].y, x[i].z + a * k[i].z};
    }
}

long checked_ratio(double big, double small, const char* what) {
    const double r = big / small;
    const long n = std::lround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r)) {
        throw std::invalid_argument(what);
    }
    return n;
}

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

class AdaptiveStepper {
public:
    AdaptiveStepper(const ClusterGeometry& geom, const CouplingParams& params, const IntegratorConfig& cfg)
        : geom_(geom), params_(params), cfg_(cfg), h_(cfg.dt) {
        const std::size_t n = geom.size();
        for (auto* v : {&k1_, &k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &tmp_, &y5_}) v->resize(n);
    }

    // Advances state from t0 to t1 exactly, adapting the internal step.
    void advance(ClusterState& y, double t0, double t1) {
        using DP = DormandPrince;
        double t = t0;
        bool fsal = false;
        while (t < t1) {
            double h = std::min(h_, t1 - t);
            const bool last = (h == t1 - t);
            if (!fsal) bloch_rhs(y, params_, geom_, k1_);
            axpy(y, h * DP::a21, k1_, tmp_);
            bloch_rhs(tmp_, params_, geom_, k2_);
            combine(y, h, {{DP::a31, &k1_}, {DP::a32, &k2_}});
            bloch_rhs(tmp_, params_, geom_, k3_);
            combine(y, h, {{DP::a41, &k1_}, {DP::a42, &k2_}, {DP::a43, &k3_}});
            bloch_rhs(tmp_, params_, geom_, k4_);
            combine(y, h, {{DP::a51, &k1_}, {DP::a52, &k2_}, {DP::a53, &k3_}, {DP::a54, &k4_}});
            bloch_rhs(tmp_, params_, geom_, k5_);
            combine(y, h, {{DP::a61, &k1_}, {DP::a62, &k2_}, {DP::a63, &k3_}, {DP::a64, &k4_}, {DP::a65, &k5_}});
            bloch_rhs(tmp_, params_, geom_, k6_);
            combine(y, h, {{DP::b1, &k1_}, {DP::b3, &k3_}, {DP::b4, &k4_}, {DP::b5, &k5_}, {DP::b6, &k6_}});
            y5_ = tmp_;
            bloch_rhs(y5_, params_, geom_, k7_);

            double err = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) {
                auto comp = [&](auto get) {
                    const double e = h * (DP::e1 * get(k1_[i]) + DP::e3 * get(k3_[i]) + DP::e4 * get(k4_[i]) +
                                          DP::e5 * get(k5_[i]) + DP::e6 * get(k6_[i]) + DP::e7 * get(k7_[i]));
                    const double scale = cfg_.abs_tol +
                                         cfg_.rel_tol * std::max(std::abs(get(y[i])), std::abs(get(y5_[i])));
                    err = std::max(err, std::abs(e) / scale);
                };
                comp([](const BlochVector& v) { return v.x; });
                comp([](const BlochVector& v) { return v.y; });
                comp([](const BlochVector& v) { return v.z; });
            }
            if (!std::isfinite(err)) throw NumericalError("adaptive step produced a non-finite state", t);

            if (err <= 1.0) {
                t = last ? t1 : t + h;
                y = y5_;
                k1_ = k7_;
                fsal = true;
            } else {
                fsal = false;
            }
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            // Keep the controller's step when the last step was shortened to land on t1.
            if (!(err <= 1.0 && last)) h_ = h * factor;
            if (h_ < 1e-14 * std::max(1.0, std::abs(t))) throw NumericalError("adaptive step size underflow", t);
        }
    }

private:
    using Term = std::pair<double, const std::vector<BlochVector>*>;

    void combine(const ClusterState& y, double h, std::initializer_list<Term> terms) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            BlochVector v = y[i];
            for (const auto& [a, k] : terms) {
                v.x += h * a * (*k)[i].x;
                v.y += h * a * (*k)[i].y;
                v.z += h * a * (*k)[i].z;
            }
            tmp_[i] = v;
        }
    }

    const ClusterGeometry& geom_;
    CouplingParams params_;
    IntegratorConfig cfg_;
    double h_;
    std::vector<BlochVector> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, y5_;
};

}  // namespace

void CouplingParams::validate() const {
    if (!std::isfinite(jx) || !std::isfinite(jy) || !std::isfinite(jz)) {
        throw std::invalid_argument("couplings must be finite");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("decay rate gamma must be positive");
}

double CouplingParams::get(const std::string& axis) const {
    if (axis == "jx") return jx;
    if (axis == "jy") return jy;
    if (axis == "jz") return jz;
    if (axis == "gamma") return gamma;
    throw std::invalid_argument("unknown coupling axis '" + axis + "'");
}

CouplingParams CouplingParams::with(const std::string& axis, double value) const {
    CouplingParams p = *this;
    if (axis == "jx") p.jx = value;
    else if (axis == "jy") p.jy = value;
    else if (axis == "jz") p.jz = value;
    else if (axis == "gamma") p.gamma = value;
    else throw std::invalid_argument("unknown coupling axis '" + axis + "'");
    return p;
}

FieldVector effective_field(std::size_t n, const ClusterState& state, const CouplingParams& params,
                            const ClusterGeometry& geom) {
    if (state.size() != geom.size()) throw std::invalid_argument("state size does not match geometry");
    if (n >= geom.size()) throw std::invalid_argument("site index out of range");
    FieldVector b;
    for (std::size_t m : geom.neighbors(n)) {
        b.bx += params.jx * state[m].x;
        b.by += params.jy * state[m].y;
        b.bz += params.jz * state[m].z;
    }
    return b;
}

void bloch_rhs(std::span<const BlochVector> state, const CouplingParams& params, const ClusterGeometry& geom,
               std::span<BlochVector> out) {
    if (state.size() != geom.size() || out.size() != geom.size()) {
        throw std::invalid_argument("state size does not match geometry");
    }
    constexpr double inv_d = 1.0 / CouplingParams::kDivisor;
    const double g = params.gamma;
    for (std::size_t n = 0; n < state.size(); ++n) {
        double sx = 0.0, sy = 0.0, sz = 0.0;
        for (std::size_t m : geom.neighbors(n)) {
            sx += state[m].x;
            sy += state[m].y;
            sz += state[m].z;
        }
        const double bx = params.jx * sx * inv_d;
        const double by = params.jy * sy * inv_d;
        const double bz = params.jz * sz * inv_d;
        const BlochVector& v = state[n];
        out[n] = {
            by * v.z - bz * v.y - 0.5 * g * v.x,
            bz * v.x - bx * v.z - 0.5 * g * v.y,
            bx * v.y - by * v.x - g * (v.z + 1.0),
        };
    }
}

ClusterState bloch_rhs(const ClusterState& state, const CouplingParams& params, const ClusterGeometry& geom) {
    ClusterState out(state.size());
    bloch_rhs(state, params, geom, out);
    return out;
}

double rhs_max_norm(const ClusterState& state, const CouplingParams& params, const ClusterGeometry& geom) {
    double m = 0.0;
    for (const auto& v : bloch_rhs(state, params, geom)) {
        m = std::max({m, std::abs(v.x), std::abs(v.y), std::abs(v.z)});
    }
    return m;
}

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("integrator dt must be positive");
    if (!(sample_dt > 0.0)) throw std::invalid_argument("sample_dt must be positive");
    if (method == IntegratorMethod::rk45_adaptive) {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("tolerances must be positive");
    } else {
        steps_per_sample();
    }
}

long IntegratorConfig::steps_per_sample() const {
    return checked_ratio(sample_dt, dt, "sample_dt must be an integer multiple of dt");
}

std::vector<double> Trajectory::series(int component, int site) const {
    if (component < 0 || component > 2) throw std::invalid_argument("component must be 0, 1 or 2");
    std::vector<double> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        BlochVector v;
        if (site < 0) {
            v = cluster_average(s);
        } else {
            if (static_cast<std::size_t>(site) >= s.size()) throw std::invalid_argument("site out of range");
            v = s[static_cast<std::size_t>(site)];
        }
        out.push_back(component == 0 ? v.x : component == 1 ? v.y : v.z);
    }
    return out;
}

double Trajectory::max_norm() const {
    double m = 0.0;
    for (const auto& s : states) {
        for (const auto& v : s) m = std::max(m, v.norm());
    }
    return m;
}

Rk4Stepper::Rk4Stepper(const ClusterGeometry& geom, const CouplingParams& params, double dt,
                       const NoiseSchedule* noise)
    : geom_(&geom), params_(params), dt_(dt), noise_(noise) {
    if (!(dt > 0.0)) throw std::invalid_argument("step must be positive");
    for (auto* v : {&k1_, &k2_, &k3_, &k4_, &tmp_}) v->resize(geom.size());
}

CouplingParams Rk4Stepper::couplings_at(double t) const {
    if (noise_ == nullptr) return params_;
    const auto xi = noise_->at(t);
    CouplingParams p = params_;
    p.jx += xi[0];
    p.jy += xi[1];
    p.jz += xi[2];
    return p;
}

void Rk4Stepper::step(ClusterState& y, double t) {
    const CouplingParams p = couplings_at(t + 0.5 * dt_);
    const double h = dt_;
    bloch_rhs(y, p, *geom_, k1_);
    axpy(y, 0.5 * h, k1_, tmp_);
    bloch_rhs(tmp_, p, *geom_, k2_);
    axpy(y, 0.5 * h, k2_, tmp_);
    bloch_rhs(tmp_, p, *geom_, k3_);
    axpy(y, h, k3_, tmp_);
    bloch_rhs(tmp_, p, *geom_, k4_);
    const double w = h / 6.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i].x += w * (k1_[i].x + 2.0 * (k2_[i].x + k3_[i].x) + k4_[i].x);
        y[i].y += w * (k1_[i].y + 2.0 * (k2_[i].y + k3_[i].y) + k4_[i].y);
        y[i].z += w * (k1_[i].z + 2.0 * (k2_[i].z + k3_[i].z) + k4_[i].z);
    }
}

void Rk4Stepper::advance(ClusterState& y, long first_step, long steps) {
    for (long i = 0; i < steps; ++i) step(y, static_cast<double>(first_step + i) * dt_);
}

Trajectory integrate(const ClusterState& state0, const CouplingParams& params, const ClusterGeometry& geom,
                     double t_end, const IntegratorConfig& cfg, std::shared_ptr<const NoiseSchedule> noise) {
    params.validate();
    cfg.validate();
    if (state0.size() != geom.size()) throw std::invalid_argument("initial state size does not match geometry");
    if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
    if (noise && !noise->empty()) {
        if (cfg.method != IntegratorMethod::rk4_fixed) {
            throw std::invalid_argument("noisy runs require the fixed-step rk4 integrator");
        }
        checked_ratio(noise->dt_noise(), cfg.dt, "integrator dt must divide the noise hold interval");
        const double offset = noise->t_start() / cfg.dt;
        if (std::abs(offset - std::round(offset)) > 1e-9 * std::max(1.0, std::abs(offset))) {
            throw std::invalid_argument("noise schedule must start on the integrator step grid");
        }
    }

    const long samples = static_cast<long>(std::floor(t_end / cfg.sample_dt + 1e-9));
    Trajectory traj;
    traj.params = params;
    traj.noise = noise;
    traj.t.reserve(static_cast<std::size_t>(samples) + 1);
    traj.states.reserve(static_cast<std::size_t>(samples) + 1);

    ClusterState y = state0;
    traj.t.push_back(0.0);
    traj.states.push_back(y);

    if (cfg.method == IntegratorMethod::rk4_fixed) {
        const long per_sample = cfg.steps_per_sample();
        Rk4Stepper stepper(geom, params, cfg.dt, noise ? noise.get() : nullptr);
        for (long s = 1; s <= samples; ++s) {
            stepper.advance(y, (s - 1) * per_sample, per_sample);
            const double t = static_cast<double>(s * per_sample) * cfg.dt;
            if (!all_finite(y)) throw NumericalError("state became non-finite", t);
            traj.t.push_back(t);
            traj.states.push_back(y);
        }
    } else {
        AdaptiveStepper stepper(geom, params, cfg);
        for (long s = 1; s <= samples; ++s) {
            const double t0 = static_cast<double>(s - 1) * cfg.sample_dt;
            const double t1 = static_cast<double>(s) * cfg.sample_dt;
            stepper.advance(y, t0, t1);
            if (!all_finite(y)) throw NumericalError("state became non-finite", t1);
            traj.t.push_back(t1);
            traj.states.push_back(y);
        }
    }
    return traj;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "t,site,sx,sy,sz\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const std::string t = format_exact(traj.t[i]);
        for (std::size_t n = 0; n < traj.states[i].size(); ++n) {
            const auto& v = traj.states[i][n];
            out << t << ',' << (n + 1) << ',' << format_exact(v.x) << ',' << format_exact(v.y) << ','
                << format_exact(v.z) << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

const char* to_string(IntegratorMethod m) {
    return m == IntegratorMethod::rk4_fixed ? "rk4_fixed" : "rk45_adaptive";
}

IntegratorMethod integrator_method_from_string(const std::string& name) {
    if (name == "rk4_fixed" || name == "rk4") return IntegratorMethod::rk4_fixed;
    if (name == "rk45_adaptive" || name == "rk45") return IntegratorMethod::rk45_adaptive;
    throw std::invalid_argument("unknown integrator method '" + name + "'");
}

}  // namespace ctc
