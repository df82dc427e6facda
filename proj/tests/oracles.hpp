#pragma once

// Brute-force references. They only evaluate instantaneous profile values, never the closed-form
// integrals the library uses.

#include "etrace/profile.hpp"

#include <cstddef>

namespace etrace::oracle {

/// Midpoint Riemann sum of p(t) over [t0, t1] in Joules.
inline double riemann_energy_j(const GroundTruthProfile &p, double t0_ms, double t1_ms, double step_ms = 0.01) {
    const auto n = static_cast<std::size_t>((t1_ms - t0_ms) / step_ms + 0.5);
    const double h = (t1_ms - t0_ms) / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += p.power_at(t0_ms + (static_cast<double>(i) + 0.5) * h);
    }
    return sum * h / 1000.0;
}

/// Numeric trailing-window mean of p at t.
inline double windowed_power(const GroundTruthProfile &p, double window_ms, double t_ms, double step_ms = 0.01) {
    const auto n = static_cast<std::size_t>(window_ms / step_ms + 0.5);
    const double h = window_ms / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += p.power_at(t_ms - window_ms + (static_cast<double>(i) + 0.5) * h);
    }
    return sum / static_cast<double>(n);
}

}  // namespace etrace::oracle
