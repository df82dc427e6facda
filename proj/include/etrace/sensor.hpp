#pragma once

#include "etrace/error.hpp"
#include "etrace/profile.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace etrace {

/// How a vendor sensor turns instantaneous device behavior into the value a query returns.
struct SensorModel {
    /// Power is the mean of the instantaneous power over the trailing window.
    double power_window_ms{ 1000.0 };
    /// Utilization is the busy fraction over the trailing sample period.
    double util_sample_period_ms{ 500.0 };
    double noise_std_w{ 0.0 };
    /// Power quantization step; 0 disables.
    double quantization_w{ 0.0 };

    /// Power averaged over 1 s, utilization over a period between 1/6 s and 1 s (500 ms unless overridden).
    static SensorModel nvml(double util_sample_period_ms = 500.0) { return { 1000.0, util_sample_period_ms, 0.0, 0.0 }; }

    /// Power from a ~1 ms energy-counter average, utilization over the query period.
    static SensorModel rocm(double query_period_ms) { return { 1.0, query_period_ms, 0.0, 0.0 }; }

    void validate() const {
        if (!(power_window_ms > 0.0) || !(util_sample_period_ms > 0.0)) {
            throw config_error{ fmt::format("sensor windows must be positive (power {} ms, utilization {} ms)", power_window_ms, util_sample_period_ms) };
        }
        if (noise_std_w < 0.0 || quantization_w < 0.0) {
            throw config_error{ "sensor noise and quantization must be non-negative" };
        }
    }
};

/// Windowed sensor power at time `t_ms`: (1/W)·∫_{t−W}^{t} p(s) ds, then Gaussian noise (if configured,
/// drawn from `rng`), then quantization. Never negative.
inline double convolve_sensor(const GroundTruthProfile &profile, const SensorModel &model, double t_ms, std::mt19937_64 *rng = nullptr) {
    const double w = model.power_window_ms;
    double v = profile.power_integral(t_ms - w, t_ms) / w;
    if (model.noise_std_w > 0.0 && rng != nullptr) {
        std::normal_distribution<double> noise{ 0.0, model.noise_std_w };
        v += noise(*rng);
    }
    if (model.quantization_w > 0.0) {
        v = std::round(v / model.quantization_w) * model.quantization_w;
    }
    return std::max(v, 0.0);
}

/// Busy percentage over the trailing utilization sample period.
inline double sensor_utilization(const GroundTruthProfile &profile, const SensorModel &model, double t_ms) {
    const double p = model.util_sample_period_ms;
    return std::clamp(profile.util_integral(t_ms - p, t_ms) / p, 0.0, 100.0);
}

}  // namespace etrace
