#include "ctc/spectral.hpp"
#include "ctc/dynamics.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace ctc;

namespace {

std::vector<double> sampled(double dt, double t_end, auto f) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(f(static_cast<double>(i) * dt));
    return out;
}

std::size_t argmax(const Spectrum& s) {
    return static_cast<std::size_t>(std::max_element(s.amp.begin(), s.amp.end()) - s.amp.begin());
}

double band_energy(const Spectrum& s, double omega, int half_width) {
    const auto k0 = static_cast<long>(std::llround(omega / s.bin_width())) - 1;
    double e = 0.0;
    for (long k = k0 - half_width; k <= k0 + half_width; ++k) {
        if (k >= 0 && k < static_cast<long>(s.amp.size())) e += s.amp[static_cast<std::size_t>(k)] * s.amp[static_cast<std::size_t>(k)];
    }
    return std::sqrt(e);
}

constexpr auto kAngular = FrequencyConvention::angular;
constexpr auto kOrdinary = FrequencyConvention::ordinary;

}  // namespace

TEST_CASE("pure tone gives a single dominant bin") {
    const auto x = sampled(0.1, 1200.0, [](double t) { return std::sin(0.18 * t); });
    const auto s = amplitude_spectrum(x, 0.1, 0.0, 1200.0, 0.0, kAngular);
    CHECK(s.samples == 12001);
    CHECK(std::abs(s.omega[argmax(s)] - 0.18) <= s.bin_width());

    const auto f = sampled(0.1, 1200.0, [](double t) { return std::sin(2 * std::numbers::pi * 0.18 * t); });
    const auto so = amplitude_spectrum(f, 0.1, 0.0, 1200.0, 0.0, kOrdinary);
    CHECK(std::abs(so.omega[argmax(so)] - 0.18) <= so.bin_width());
    CHECK(so.bin_width() * 2 * std::numbers::pi == doctest::Approx(s.bin_width()));
}

TEST_CASE("two tones keep their 5:1 amplitude ratio") {
    const auto x = sampled(0.1, 1200.0, [](double t) { return std::sin(0.18 * t) + 0.2 * std::sin(0.54 * t); });
    const auto s = amplitude_spectrum(x, 0.1, 0.0, 1200.0, 0.0, kAngular);
    const double ratio = band_energy(s, 0.18, 5) / band_energy(s, 0.54, 5);
    CHECK(ratio == doctest::Approx(5.0).epsilon(0.05));
    const double peak = dominant_peak(s);
    CHECK(std::abs(peak - 0.18) <= s.bin_width() / 2);
    CHECK(std::abs(dominant_peak(s, 0.4) - 0.54) <= s.bin_width() / 2);
}

TEST_CASE("constant series has an all-zero spectrum") {
    const std::vector<double> x(500, 0.37);
    const auto s = amplitude_spectrum(x, 0.1, 0.0, 49.9);
    for (double a : s.amp) CHECK(a == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("dominant peak of a unit-frequency tone") {
    const auto x = sampled(0.1, 600.0, [](double t) { return std::cos(1.0 * t + 0.3); });
    const auto s = amplitude_spectrum(x, 0.1, 0.0, 600.0, 0.0, kAngular);
    CHECK(std::abs(dominant_peak(s) - 1.0) <= s.bin_width() / 2);
    CHECK_THROWS_AS(dominant_peak(s, 1e6), PeakNotFound);
}

TEST_CASE("Parseval identity holds to 1e-6") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (std::size_t m : {64u, 65u, 1000u, 1201u, 4096u}) {
        std::vector<double> x(m);
        for (auto& v : x) v = g(rng) + 0.5;
        const auto s = amplitude_spectrum(x, 0.1, 0.0, 0.1 * static_cast<double>(m - 1));
        REQUIRE(s.samples == m);
        const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        var /= static_cast<double>(m);
        double power = 0.0;
        for (double a : s.amp) power += a * a / 2;
        CHECK(std::abs(power - var) / var < 1e-6);
    }
}

TEST_CASE("analysis windows are inclusive and validated") {
    const std::vector<double> x(6001, 0.0);
    CHECK(amplitude_spectrum(x, 0.1, 80.0, 200.0).samples == 1201);
    CHECK(amplitude_spectrum(x, 0.1, 480.0, 600.0).samples == 1201);
    CHECK_THROWS_AS(amplitude_spectrum(x, 0.1, 0.0, 6.0), std::invalid_argument);
    CHECK_THROWS_AS(amplitude_spectrum(x, 0.1, 500.0, 700.0), std::invalid_argument);
    CHECK_THROWS_AS(amplitude_spectrum(x, 0.1, 200.0, 80.0), std::invalid_argument);
}

TEST_CASE("crystalline fraction of a quiet run against itself is exactly one") {
    const auto x = sampled(0.1, 200.0, [](double t) { return std::sin(2 * std::numbers::pi * 0.18 * t) + 0.1 * std::sin(7 * t); });
    const auto q = amplitude_spectrum(x, 0.1, 80.0, 200.0);
    const auto cf = crystalline_fraction(q, q, {});
    CHECK(cf.omega_rcf == 1.0);
    CHECK(cf.omega == cf.omega_quiet);
    CHECK(cf.omega_quiet_p == doctest::Approx(0.18).epsilon(0.05));
}

TEST_CASE("crystalline fraction is scale equivariant") {
    const auto q = sampled(0.1, 200.0, [](double t) { return std::sin(2 * std::numbers::pi * 0.18 * t); });
    const auto n = sampled(0.1, 200.0, [](double t) { return 0.7 * std::sin(2 * std::numbers::pi * 0.17 * t) + 0.1 * std::cos(t); });
    const auto qs = amplitude_spectrum(q, 0.1, 80.0, 200.0);
    const auto base = crystalline_fraction(amplitude_spectrum(n, 0.1, 80.0, 200.0), qs, {});
    for (double c : {0.5, 2.0, 3.7}) {
        std::vector<double> scaled(n);
        for (auto& v : scaled) v *= c;
        const auto cf = crystalline_fraction(amplitude_spectrum(scaled, 0.1, 80.0, 200.0), qs, {});
        CHECK(cf.omega == doctest::Approx(c * base.omega).epsilon(1e-12));
        CHECK(cf.omega_rcf == doctest::Approx(c * base.omega_rcf).epsilon(1e-12));
    }
}

TEST_CASE("mismatched grids and bad configs are rejected") {
    const std::vector<double> x(3000, 0.0);
    auto a = sampled(0.1, 200.0, [](double t) { return std::sin(t); });
    const auto s1 = amplitude_spectrum(a, 0.1, 80.0, 200.0);
    const auto s2 = amplitude_spectrum(a, 0.1, 100.0, 200.0);
    CHECK_THROWS_AS(crystalline_fraction(s1, s2, {}), std::invalid_argument);
    CHECK_THROWS_AS(crystalline_fraction(s1, s1, {0.7, 0.6}), std::invalid_argument);
}

TEST_CASE("band sums of a converged limit cycle barely depend on window length") {
    const ClusterGeometry g(3, 3);
    const auto traj = integrate(build_initial_state(EquatorPhase{}, g), {7, 1.5, 1, 1}, g, 600.0, {});
    const auto x = traj.series(0);
    const auto shorter = amplitude_spectrum(x, 0.1, 360.0, 600.0);
    const auto longer = amplitude_spectrum(x, 0.1, 120.0, 600.0);
    const double a = crystalline_fraction(shorter, shorter, {}).omega_quiet;
    const double b = crystalline_fraction(longer, longer, {}).omega_quiet;
    MESSAGE("fractions ", a, " ", b);
    CHECK(b == doctest::Approx(a).epsilon(0.02));
}
