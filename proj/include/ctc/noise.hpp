#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ctc {

// Counter-based randomness.
//
// Every random number is a pure function of (seed, counter): the counter is
// advanced by the golden-ratio increment and passed through the SplitMix64
// finalizer. Uniforms take the top 53 bits. Normal sample i uses counters 2i
// and 2i+1 through Box-Muller (cosine branch only). This layout is fixed so
// schedules can be regenerated bit-for-bit from any language.

std::uint64_t splitmix64(std::uint64_t seed, std::uint64_t counter);

/// Uniform in [0, 1).
double counter_uniform(std::uint64_t seed, std::uint64_t counter);

/// Standard normal sample number `index` of the stream.
double counter_normal(std::uint64_t seed, std::uint64_t index);

/// Child seed for a named sub-stream (grid point, stage, component, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class NoiseKind { white, pink };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::white;
    double beta = 0.0;       ///< standard deviation, units of Gamma
    double dt_noise = 0.01;  ///< hold interval, units of 1/Gamma
    std::uint64_t seed = 0;
    double t_start = 0.0;
    double t_end = 0.0;
    /// Draw separate realizations for Jx, Jy, Jz instead of one shared offset.
    bool independent_components = false;
};

/// Piecewise-constant coupling offsets on [t_start, t_start + n*dt_noise).
///
/// Offset k is held on [t_start + k dt, t_start + (k+1) dt) and the schedule
/// is zero outside its window. An isotropic schedule stores one scalar per
/// interval shared by all three couplings.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    NoiseSchedule(double dt_noise, double t_start, std::vector<double> offsets);
    NoiseSchedule(double dt_noise, double t_start, std::array<std::vector<double>, 3> component_offsets);

    double dt_noise() const { return dt_noise_; }
    double t_start() const { return t_start_; }
    double t_end() const;
    std::size_t size() const { return offsets_[0].size(); }
    bool empty() const { return offsets_[0].empty(); }
    bool isotropic() const { return isotropic_; }

    double time(std::size_t k) const;
    /// Offsets for component 0 (the shared offsets when isotropic).
    const std::vector<double>& offsets() const { return offsets_[0]; }
    const std::vector<double>& offsets(int component) const;

    /// (dJx, dJy, dJz) active at time t.
    std::array<double, 3> at(double t) const;

private:
    double dt_noise_ = 0.01;
    double t_start_ = 0.0;
    bool isotropic_ = true;
    std::array<std::vector<double>, 3> offsets_;
};

NoiseSchedule white_noise_schedule(const NoiseSpec& spec);
NoiseSchedule pink_noise_schedule(const NoiseSpec& spec);
NoiseSchedule make_noise_schedule(const NoiseSpec& spec);

/// Joins contiguous schedules that share one hold interval into a single one.
NoiseSchedule concatenate(std::span<const NoiseSchedule> parts);

void write_schedule_csv(const NoiseSchedule& schedule, const std::filesystem::path& path);
NoiseSchedule read_schedule_csv(const std::filesystem::path& path);

}  // namespace ctc
