#pragma once

#include "etrace/clock.hpp"
#include "etrace/error.hpp"
#include "etrace/profile.hpp"
#include "etrace/sensor.hpp"
#include "etrace/trace.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

namespace etrace {

struct SensorReading {
    double power_w{};
    double temp_c{};
    double util_pct{};
    double acquired_at_ms{};

    friend bool operator==(const SensorReading &, const SensorReading &) = default;
};

/// Uniform sensor source. One instance is owned by exactly one sampling loop.
class Backend {
  public:
    virtual ~Backend() = default;

    /// Binds the backend to a trace whose time zero is `origin_ms` on the backend's clock.
    virtual void begin(double origin_ms) { (void) origin_ms; }

    /// One reading per call. Throws backend_error on a failed query and end_of_stream when a replay runs out.
    virtual SensorReading read() = 0;

    [[nodiscard]] virtual std::string name() const = 0;
};

/// Plays back a recorded trace against a clock: each read returns the latest sample at or before
/// the elapsed time since begin().
class ReplayBackend final : public Backend {
  public:
    ReplayBackend(Trace trace, const Clock &clock) :
        trace_{ std::move(trace) },
        clock_{ &clock },
        origin_{ clock.now_ms() } {}

    void begin(double origin_ms) override { origin_ = origin_ms; }

    SensorReading read() override {
        const double now = clock_->now_ms();
        const double elapsed = now - origin_;
        const auto &s = trace_.samples;
        if (s.empty() || elapsed > s.back().t_ms) {
            throw end_of_stream{};
        }
        auto it = std::upper_bound(s.begin(), s.end(), elapsed, [](double t, const Sample &x) { return t < x.t_ms; });
        const Sample &hit = it == s.begin() ? *it : *std::prev(it);
        return { hit.power_w, hit.temp_c, hit.util_pct, now };
    }

    [[nodiscard]] std::string name() const override { return "replay"; }

    [[nodiscard]] const Trace &source() const noexcept { return trace_; }

  private:
    Trace trace_;
    const Clock *clock_;
    double origin_;
};

/// Applies a SensorModel to a ground-truth profile. Noise comes from a generator seeded at construction,
/// so equal seeds give equal reading sequences.
class SyntheticBackend final : public Backend {
  public:
    SyntheticBackend(GroundTruthProfile profile, SensorModel model, const Clock &clock, std::uint64_t seed = 0) :
        profile_{ std::move(profile) },
        model_{ model },
        clock_{ &clock },
        origin_{ clock.now_ms() },
        rng_{ seed } {
        model_.validate();
    }

    void begin(double origin_ms) override { origin_ = origin_ms; }

    SensorReading read() override {
        const double now = clock_->now_ms();
        const double t = now - origin_;
        return { convolve_sensor(profile_, model_, t, &rng_), profile_.temp_at(t), sensor_utilization(profile_, model_, t), now };
    }

    [[nodiscard]] std::string name() const override { return "synthetic"; }

    [[nodiscard]] const GroundTruthProfile &profile() const noexcept { return profile_; }

    [[nodiscard]] const SensorModel &model() const noexcept { return model_; }

  private:
    GroundTruthProfile profile_;
    SensorModel model_;
    const Clock *clock_;
    double origin_;
    std::mt19937_64 rng_;
};

}  // namespace etrace
