#pragma once

#include "etrace/error.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace etrace {

/// One telemetry reading, timestamped relative to trace start.
struct Sample {
    double t_ms{};
    double power_w{};
    double temp_c{};
    double util_pct{};

    friend bool operator==(const Sample &, const Sample &) = default;
};

struct DeviceSpec {
    std::string name;
    double tdp_w{};
    double memory_gb{};
    std::optional<double> bandwidth_gbps;

    friend bool operator==(const DeviceSpec &, const DeviceSpec &) = default;
};

namespace devices {

inline const DeviceSpec a100{ "A100", 300.0, 80.0, 1940.0 };
inline const DeviceSpec h100{ "H100", 400.0, 94.0, 1940.0 };
inline const DeviceSpec mi250x{ "MI250X", 500.0, 64.0, 3276.0 };

/// Case-insensitive lookup in the reference device table.
inline std::optional<DeviceSpec> find(std::string_view name) {
    const auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    };
    const std::string key = lower(name);
    for (const DeviceSpec *d : { &a100, &h100, &mi250x }) {
        if (lower(d->name) == key) {
            return *d;
        }
    }
    return std::nullopt;
}

}  // namespace devices

/// Process lifecycle marks, offsets from trace start in milliseconds.
struct Marks {
    double proc_start_ms{};
    double proc_end_ms{};

    friend bool operator==(const Marks &, const Marks &) = default;
};

struct Trace {
    std::vector<Sample> samples;
    double resolution_ms{};
    DeviceSpec device;
    std::optional<Marks> marks;
    std::string label;
    /// Padding the capture was configured with; marks are checked against it.
    std::optional<double> pre_pad_ms;
    /// Metadata keys without a dedicated field, preserved verbatim.
    std::map<std::string, std::string> extra;

    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

    [[nodiscard]] double start_ms() const { return samples.empty() ? 0.0 : samples.front().t_ms; }

    [[nodiscard]] double end_ms() const { return samples.empty() ? 0.0 : samples.back().t_ms; }

    friend bool operator==(const Trace &, const Trace &) = default;
};

struct RegionStats {
    double energy_j{};
    double avg_power_w{};
    double avg_util_pct{};
    double duration_s{};

    friend bool operator==(const RegionStats &, const RegionStats &) = default;
};

struct Region {
    std::string name;
    double start_ms{};
    double end_ms{};
    RegionStats stats{};

    friend bool operator==(const Region &, const Region &) = default;
};

namespace detail {

inline std::string sample_problem(const Sample &s) {
    if (!std::isfinite(s.t_ms) || s.t_ms < 0.0) {
        return fmt::format("timestamp {} is not a finite non-negative value", s.t_ms);
    }
    if (!std::isfinite(s.power_w) || s.power_w < 0.0) {
        return fmt::format("power {} W is negative or not finite", s.power_w);
    }
    if (!std::isfinite(s.util_pct) || s.util_pct < 0.0 || s.util_pct > 100.0) {
        return fmt::format("utilization {} % outside [0, 100]", s.util_pct);
    }
    if (!std::isfinite(s.temp_c)) {
        return "temperature is not finite";
    }
    return {};
}

}  // namespace detail

/// Throws validation_error if `s` breaks a Sample invariant. `line` is used for diagnostics only.
inline void validate(const Sample &s, std::size_t line = 0) {
    if (auto problem = detail::sample_problem(s); !problem.empty()) {
        throw validation_error{ problem, line };
    }
}

inline void validate(const DeviceSpec &d, std::size_t line = 0) {
    if (!(d.tdp_w > 0.0)) {
        throw validation_error{ fmt::format("device '{}' has non-positive TDP {}", d.name, d.tdp_w), line };
    }
}

/// Checks every Trace invariant. `sample_lines[i]`, when given, is the source line of sample i
/// and `marks_line` the line carrying the marks, so errors point at the input.
inline void validate(const Trace &trace, const std::vector<std::size_t> *sample_lines = nullptr, std::size_t marks_line = 0) {
    const auto line_of = [&](std::size_t i) { return sample_lines ? (*sample_lines)[i] : 0; };
    validate(trace.device, marks_line);
    if (!(trace.resolution_ms > 0.0)) {
        throw validation_error{ fmt::format("resolution {} ms must be positive", trace.resolution_ms), marks_line };
    }
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        validate(trace.samples[i], line_of(i));
        if (i > 0 && !(trace.samples[i].t_ms > trace.samples[i - 1].t_ms)) {
            throw validation_error{ fmt::format("timestamp {} does not increase (previous {})", trace.samples[i].t_ms, trace.samples[i - 1].t_ms), line_of(i) };
        }
    }
    if (trace.marks) {
        const Marks &m = *trace.marks;
        if (!(0.0 <= m.proc_start_ms && m.proc_start_ms <= m.proc_end_ms)) {
            throw validation_error{ fmt::format("marks ({}, {}) are not ordered", m.proc_start_ms, m.proc_end_ms), marks_line };
        }
        if (m.proc_end_ms > trace.end_ms()) {
            throw validation_error{ fmt::format("process end {} ms lies after the last sample {} ms", m.proc_end_ms, trace.end_ms()), marks_line };
        }
        if (trace.pre_pad_ms && m.proc_start_ms < *trace.pre_pad_ms - trace.resolution_ms) {
            throw validation_error{ fmt::format("process start {} ms does not honor pre-pad {} ms", m.proc_start_ms, *trace.pre_pad_ms), marks_line };
        }
    }
}

}  // namespace etrace
