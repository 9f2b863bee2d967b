#include "ctc/noise.hpp"

#include "ctc/csv.hpp"

#include "fftw_guard.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ctc {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
constexpr std::size_t kMinPinkSamples = 8;

std::size_t window_samples(const NoiseSpec& spec) {
    if (!(spec.dt_noise > 0.0)) throw std::invalid_argument("noise hold interval must be positive");
    if (!(spec.beta >= 0.0)) throw std::invalid_argument("noise strength must be non-negative");
    if (!(spec.t_start < spec.t_end)) throw std::invalid_argument("noise window needs t_start < t_end");
    return static_cast<std::size_t>(std::llround((spec.t_end - spec.t_start) / spec.dt_noise));
}

std::vector<double> white_offsets(std::uint64_t seed, std::size_t n, double beta) {
    std::vector<double> out(n, 0.0);
    if (beta == 0.0) return out;
    for (std::size_t i = 0; i < n; ++i) out[i] = beta * counter_normal(seed, i);
    return out;
}

// 1/f spectral synthesis: bin k gets amplitude k^{-1/2} and phase 2*pi*u_k,
// DC is zero, and the inverse real transform is rescaled to std = beta.
std::vector<double> pink_offsets(std::uint64_t seed, std::size_t n, double beta) {
    std::vector<double> out(n, 0.0);
    if (beta == 0.0) return out;

    const std::size_t bins = n / 2 + 1;
    auto* spectrum = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
    spectrum[0][0] = 0.0;
    spectrum[0][1] = 0.0;
    for (std::size_t k = 1; k < bins; ++k) {
        const double amp = 1.0 / std::sqrt(static_cast<double>(k));
        const double phase = 2.0 * std::numbers::pi * counter_uniform(seed, k);
        spectrum[k][0] = amp * std::cos(phase);
        spectrum[k][1] = (2 * k == n) ? 0.0 : amp * std::sin(phase);
    }
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(static_cast<int>(n), spectrum, out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(spectrum);

    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double& v : out) {
        v -= mean;
        var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& v : out) v *= beta / sd;
    return out;
}

template <class Gen>
NoiseSchedule build_schedule(const NoiseSpec& spec, std::size_t n, Gen gen) {
    if (!spec.independent_components) {
        return NoiseSchedule(spec.dt_noise, spec.t_start, gen(spec.seed, n, spec.beta));
    }
    std::array<std::vector<double>, 3> parts;
    for (int c = 0; c < 3; ++c) parts[c] = gen(derive_seed(spec.seed, static_cast<std::uint64_t>(c)), n, spec.beta);
    return NoiseSchedule(spec.dt_noise, spec.t_start, std::move(parts));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + (counter + 1) * kGolden;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(splitmix64(seed, counter) >> 11) * 0x1.0p-53;
}

double counter_normal(std::uint64_t seed, std::uint64_t index) {
    const double u1 = counter_uniform(seed, 2 * index);
    const double u2 = counter_uniform(seed, 2 * index + 1);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ kStreamSalt, stream);
}

NoiseSchedule::NoiseSchedule(double dt_noise, double t_start, std::vector<double> offsets)
    : dt_noise_(dt_noise), t_start_(t_start) {
    if (!(dt_noise > 0.0)) throw std::invalid_argument("noise hold interval must be positive");
    offsets_[0] = std::move(offsets);
}

NoiseSchedule::NoiseSchedule(double dt_noise, double t_start, std::array<std::vector<double>, 3> component_offsets)
    : dt_noise_(dt_noise), t_start_(t_start), isotropic_(false), offsets_(std::move(component_offsets)) {
    if (!(dt_noise > 0.0)) throw std::invalid_argument("noise hold interval must be positive");
    if (offsets_[1].size() != offsets_[0].size() || offsets_[2].size() != offsets_[0].size()) {
        throw std::invalid_argument("component noise schedules differ in length");
    }
}

double NoiseSchedule::t_end() const { return time(size()); }

double NoiseSchedule::time(std::size_t k) const { return t_start_ + static_cast<double>(k) * dt_noise_; }

const std::vector<double>& NoiseSchedule::offsets(int component) const {
    if (component < 0 || component > 2) throw std::invalid_argument("coupling component must be 0, 1 or 2");
    return isotropic_ ? offsets_[0] : offsets_[static_cast<std::size_t>(component)];
}

std::array<double, 3> NoiseSchedule::at(double t) const {
    if (empty() || t < t_start_) return {0.0, 0.0, 0.0};
    const double pos = std::floor((t - t_start_) / dt_noise_);
    if (pos >= static_cast<double>(size())) return {0.0, 0.0, 0.0};
    const auto k = static_cast<std::size_t>(pos);
    if (isotropic_) return {offsets_[0][k], offsets_[0][k], offsets_[0][k]};
    return {offsets_[0][k], offsets_[1][k], offsets_[2][k]};
}

NoiseSchedule white_noise_schedule(const NoiseSpec& spec) {
    if (spec.kind != NoiseKind::white) throw std::invalid_argument("white_noise_schedule needs kind = white");
    return build_schedule(spec, window_samples(spec), white_offsets);
}

NoiseSchedule pink_noise_schedule(const NoiseSpec& spec) {
    if (spec.kind != NoiseKind::pink) throw std::invalid_argument("pink_noise_schedule needs kind = pink");
    const std::size_t n = window_samples(spec);
    if (n < kMinPinkSamples) {
        throw std::invalid_argument("pink noise window must span at least 8 hold intervals");
    }
    return build_schedule(spec, n, pink_offsets);
}

NoiseSchedule make_noise_schedule(const NoiseSpec& spec) {
    return spec.kind == NoiseKind::white ? white_noise_schedule(spec) : pink_noise_schedule(spec);
}

NoiseSchedule concatenate(std::span<const NoiseSchedule> parts) {
    if (parts.empty()) return {};
    const double dt = parts.front().dt_noise();
    bool isotropic = true;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (std::abs(parts[i].dt_noise() - dt) > 1e-12 * dt) {
            throw std::invalid_argument("cannot join noise schedules with different hold intervals");
        }
        if (i > 0 && std::abs(parts[i].t_start() - parts[i - 1].t_end()) > 1e-9 * dt) {
            throw std::invalid_argument("noise schedules are not contiguous");
        }
        isotropic = isotropic && parts[i].isotropic();
    }
    std::array<std::vector<double>, 3> joined;
    for (const auto& p : parts) {
        for (int c = 0; c < 3; ++c) {
            const auto& src = p.offsets(c);
            joined[c].insert(joined[c].end(), src.begin(), src.end());
        }
    }
    if (isotropic) return NoiseSchedule(dt, parts.front().t_start(), std::move(joined[0]));
    return NoiseSchedule(dt, parts.front().t_start(), std::move(joined));
}

void write_schedule_csv(const NoiseSchedule& schedule, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << (schedule.isotropic() ? "t,offset\n" : "t,offset_x,offset_y,offset_z\n");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        out << format_exact(schedule.time(k));
        for (int c = 0; c < (schedule.isotropic() ? 1 : 3); ++c) out << ',' << format_exact(schedule.offsets(c)[k]);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

NoiseSchedule read_schedule_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const bool isotropic = table.header == std::vector<std::string>{"t", "offset"};
    if (!isotropic && table.header != std::vector<std::string>{"t", "offset_x", "offset_y", "offset_z"}) {
        throw std::invalid_argument(path.string() + ": not a noise schedule CSV");
    }
    if (table.rows.size() < 2) throw std::invalid_argument(path.string() + ": schedule needs at least two rows");
    const std::size_t n = table.rows.size();
    const double t0 = parse_double(table.rows.front()[0]);
    const double t_last = parse_double(table.rows.back()[0]);
    const double dt = (t_last - t0) / static_cast<double>(n - 1);
    std::array<std::vector<double>, 3> cols;
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c + 1 < row.size(); ++c) cols[c].push_back(parse_double(row[c + 1]));
    }
    if (isotropic) return NoiseSchedule(dt, t0, std::move(cols[0]));
    return NoiseSchedule(dt, t0, std::move(cols));
}

}  // namespace ctc
