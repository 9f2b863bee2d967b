#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctc {

/// How the frequency axis of a spectrum is labelled.
///
/// `ordinary` reports cycles per unit time (k / (M dt)); `angular` multiplies
/// that by 2 pi. The default reproduces the reference principal frequency of
/// the Jx=7, Jy=1.5 limit cycle (0.18); the acceptance suite re-checks this.
enum class FrequencyConvention { angular, ordinary };

inline constexpr FrequencyConvention kDefaultFrequencyConvention = FrequencyConvention::ordinary;

double frequency_scale(FrequencyConvention convention);

struct Spectrum {
    /// Frequencies of bins k = 1 .. floor((M-1)/2) (plus M/2 when M is even).
    std::vector<double> omega;
    /// One-sided amplitudes 2|X_k|/M of the mean-removed window; the Nyquist
    /// bin carries sqrt(2)|X|/M so that sum(amp^2)/2 equals the variance.
    std::vector<double> amp;
    double t_a = 0.0;
    double t_b = 0.0;
    double sample_dt = 0.0;
    std::size_t samples = 0;
    std::string observable;
    FrequencyConvention convention = kDefaultFrequencyConvention;

    double bin_width() const;
};

/// Rectangular-window amplitude spectrum of the samples of `series` whose
/// times (t0 + i*sample_dt) lie in [t_a, t_b]. Needs at least 64 samples.
Spectrum amplitude_spectrum(std::span<const double> series, double sample_dt, double t_a, double t_b,
                            double t0 = 0.0, FrequencyConvention convention = kDefaultFrequencyConvention,
                            std::string observable = {});

/// Thrown when no spectral bin lies above the requested lower frequency.
class PeakNotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Location of the largest bin at or above omega_min, refined by a parabola
/// through the bin and its two neighbours.
double dominant_peak(const Spectrum& s, double omega_min);
/// dominant_peak with omega_min set to one bin width.
double dominant_peak(const Spectrum& s);

struct SpectralConfig {
    double delta_omega = 0.08;  ///< half-width of the principal-peak band
    double Delta_omega = 0.6;   ///< upper edge of the normalizing band

    void validate() const;
};

struct CrystallineFraction {
    double omega_quiet_p = 0.0;  ///< principal frequency of the quiet spectrum
    double omega = 0.0;          ///< crystalline fraction of the noisy spectrum
    double omega_quiet = 0.0;    ///< crystalline fraction of the quiet spectrum
    double omega_rcf = 0.0;      ///< omega / omega_quiet
};

/// Peak-band amplitude sum of `noisy` around the quiet principal frequency,
/// over the quiet amplitude sum on (0, Delta_omega]; both spectra must share
/// a frequency grid.
CrystallineFraction crystalline_fraction(const Spectrum& noisy, const Spectrum& quiet, const SpectralConfig& cfg);

/// CSV with header omega,amp.
void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path);

}  // namespace ctc
