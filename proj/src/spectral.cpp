#include "ctc/spectral.hpp"

#include "ctc/csv.hpp"
#include "ctc/errors.hpp"

#include "fftw_guard.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace ctc {

namespace {

constexpr std::size_t kMinSamples = 64;

}  // namespace

double frequency_scale(FrequencyConvention convention) {
    return convention == FrequencyConvention::angular ? 2.0 * std::numbers::pi : 1.0;
}

double Spectrum::bin_width() const {
    return frequency_scale(convention) / (static_cast<double>(samples) * sample_dt);
}

Spectrum amplitude_spectrum(std::span<const double> series, double sample_dt, double t_a, double t_b, double t0,
                            FrequencyConvention convention, std::string observable) {
    if (!(sample_dt > 0.0)) throw std::invalid_argument("sample_dt must be positive");
    if (!(t_a < t_b)) throw std::invalid_argument("spectral window needs t_a < t_b");
    const double span_end = t0 + static_cast<double>(series.size() - 1) * sample_dt;
    const double slack = 1e-9 * sample_dt;
    if (series.empty() || t_a < t0 - slack || t_b > span_end + slack) {
        throw std::invalid_argument("spectral window lies outside the series");
    }
    const auto first = static_cast<std::size_t>(std::ceil((t_a - t0) / sample_dt - 1e-9));
    const auto last = static_cast<std::size_t>(std::floor((t_b - t0) / sample_dt + 1e-9));
    const std::size_t m = last - first + 1;
    if (m < kMinSamples) {
        throw std::invalid_argument("spectral window has " + std::to_string(m) + " samples, need at least 64");
    }

    std::vector<double> x(series.begin() + static_cast<std::ptrdiff_t>(first),
                          series.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
    for (double& v : x) v -= mean;

    const std::size_t bins = m / 2 + 1;
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), x.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }

    Spectrum s;
    s.t_a = t_a;
    s.t_b = t_b;
    s.sample_dt = sample_dt;
    s.samples = m;
    s.observable = std::move(observable);
    s.convention = convention;
    const double df = s.bin_width();
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 1; k < bins; ++k) {
        const double mag = std::hypot(out[k][0], out[k][1]);
        const bool nyquist = (2 * k == m);
        s.omega.push_back(static_cast<double>(k) * df);
        s.amp.push_back((nyquist ? std::numbers::sqrt2 : 2.0) * mag * inv_m);
    }
    fftw_free(out);
    return s;
}

double dominant_peak(const Spectrum& s, double omega_min) {
    std::size_t best = s.amp.size();
    for (std::size_t k = 0; k < s.amp.size(); ++k) {
        if (s.omega[k] < omega_min * (1.0 - 1e-12)) continue;
        if (best == s.amp.size() || s.amp[k] > s.amp[best]) best = k;
    }
    if (best == s.amp.size()) throw PeakNotFound("no spectral bin above the requested frequency");
    if (best == 0 || best + 1 >= s.amp.size()) return s.omega[best];
    const double a = s.amp[best - 1];
    const double b = s.amp[best];
    const double c = s.amp[best + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom == 0.0 ? 0.0 : 0.5 * (a - c) / denom;
    return s.omega[best] + std::clamp(shift, -0.5, 0.5) * s.bin_width();
}

double dominant_peak(const Spectrum& s) { return dominant_peak(s, s.bin_width()); }

void SpectralConfig::validate() const {
    if (!(delta_omega > 0.0) || !(delta_omega < Delta_omega)) {
        throw std::invalid_argument("spectral config needs 0 < delta_omega < Delta_omega");
    }
}

CrystallineFraction crystalline_fraction(const Spectrum& noisy, const Spectrum& quiet, const SpectralConfig& cfg) {
    cfg.validate();
    if (noisy.samples != quiet.samples || noisy.convention != quiet.convention ||
        std::abs(noisy.sample_dt - quiet.sample_dt) > 1e-12 * quiet.sample_dt) {
        throw std::invalid_argument("noisy and quiet spectra are on different frequency grids");
    }
    CrystallineFraction cf;
    cf.omega_quiet_p = dominant_peak(quiet);

    auto band_sum = [](const Spectrum& s, double lo, double hi) {
        double sum = 0.0;
        for (std::size_t k = 0; k < s.amp.size(); ++k) {
            if (s.omega[k] >= lo && s.omega[k] <= hi) sum += s.amp[k];
        }
        return sum;
    };
    const double lo = cf.omega_quiet_p - cfg.delta_omega;
    const double hi = cf.omega_quiet_p + cfg.delta_omega;
    const double denom = band_sum(quiet, 0.0, cfg.Delta_omega);
    if (!(denom > 0.0)) throw std::invalid_argument("quiet spectrum has no weight below Delta_omega");
    cf.omega = band_sum(noisy, lo, hi) / denom;
    cf.omega_quiet = band_sum(quiet, lo, hi) / denom;
    cf.omega_rcf = cf.omega / cf.omega_quiet;
    return cf;
}

void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "omega,amp\n";
    for (std::size_t k = 0; k < s.amp.size(); ++k) {
        out << format_exact(s.omega[k]) << ',' << format_exact(s.amp[k]) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ctc
