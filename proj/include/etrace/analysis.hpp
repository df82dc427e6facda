#pragma once

#include "etrace/error.hpp"
#include "etrace/trace.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace etrace {

enum class FilterMode { none, clamp, median3, clamp_median3 };

struct FilterConfig {
    FilterMode mode{ FilterMode::clamp_median3 };
    /// Defaults to 1.1 × the trace device's TDP.
    std::optional<double> ceiling_w;
    double floor_w{ 0.0 };

    static FilterConfig off() { return { FilterMode::none, std::nullopt, 0.0 }; }

    [[nodiscard]] double ceiling_for(const DeviceSpec &device) const { return ceiling_w.value_or(1.1 * device.tdp_w); }
};

struct FilteredTrace {
    Trace trace;
    std::size_t filtered_count{};
};

enum class IntegrationRule { trapezoid, left };

struct EnergyResult {
    double energy_j{};
    double t0_ms{};
    double t1_ms{};
    std::size_t samples_used{};
    std::size_t filtered_count{};
};

struct SegmentationPolicy {
    double idle_threshold_pct{ 10.0 };
    /// Smoothing is a centered moving average over max(min_samples, min_ms / resolution) samples.
    std::size_t smoothing_min_samples{ 5 };
    double smoothing_min_ms{ 500.0 };
    /// Idle dips shorter than this between two active stretches are absorbed.
    double min_dip_ms{ 1000.0 };
    /// Additionally split stretches at sustained power-level changes.
    bool split_plateaus{ false };
    double plateau_min_step_w{ 25.0 };
    double plateau_min_ms{ 2000.0 };
};

/// Replaces over-/under-shooting power values. Only power changes; `filtered_count` counts changed values.
inline FilteredTrace filter_spikes(const Trace &trace, const FilterConfig &config) {
    FilteredTrace out{ trace, 0 };
    if (config.mode == FilterMode::none) {
        return out;
    }
    auto &s = out.trace.samples;
    if (config.mode == FilterMode::clamp || config.mode == FilterMode::clamp_median3) {
        const double ceiling = config.ceiling_for(trace.device);
        if (!(ceiling > config.floor_w) || config.floor_w < 0.0) {
            throw config_error{ fmt::format("filter needs ceiling {} > floor {} >= 0", ceiling, config.floor_w) };
        }
        for (auto &x : s) {
            x.power_w = std::clamp(x.power_w, config.floor_w, ceiling);
        }
    }
    if ((config.mode == FilterMode::median3 || config.mode == FilterMode::clamp_median3) && s.size() >= 3) {
        std::vector<double> p(s.size());
        std::transform(s.begin(), s.end(), p.begin(), [](const Sample &x) { return x.power_w; });
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            std::array<double, 3> w{ p[i - 1], p[i], p[i + 1] };
            std::sort(w.begin(), w.end());
            s[i].power_w = w[1];
        }
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        out.filtered_count += s[i].power_w != trace.samples[i].power_w ? 1 : 0;
    }
    return out;
}

namespace detail {

using Channel = double Sample::*;

/// Linear interpolation of a channel at `t` inside the sample span.
inline double interpolate(const std::vector<Sample> &s, double t, Channel c) {
    auto it = std::lower_bound(s.begin(), s.end(), t, [](const Sample &x, double v) { return x.t_ms < v; });
    if (it == s.end()) {
        return s.back().*c;
    }
    if (it->t_ms == t || it == s.begin()) {
        return (*it).*c;
    }
    const Sample &b = *it;
    const Sample &a = *std::prev(it);
    const double f = (t - a.t_ms) / (b.t_ms - a.t_ms);
    return a.*c + f * (b.*c - a.*c);
}

/// ∫ channel dt over [t0, t1] in value·ms, with interpolated end points.
inline std::pair<double, std::size_t> integrate_channel(const Trace &trace, double t0, double t1, Channel c, IntegrationRule rule) {
    const auto &s = trace.samples;
    if (s.size() < 2) {
        throw insufficient_data_error{ fmt::format("integration needs at least 2 samples, trace has {}", s.size()) };
    }
    if (!(t0 < t1)) {
        throw domain_error{ fmt::format("empty integration interval [{}, {}]", t0, t1) };
    }
    if (t0 < s.front().t_ms || t1 > s.back().t_ms) {
        throw domain_error{ fmt::format("interval [{}, {}] ms outside trace span [{}, {}] ms", t0, t1, s.front().t_ms, s.back().t_ms) };
    }
    auto first = std::upper_bound(s.begin(), s.end(), t0, [](double v, const Sample &x) { return v < x.t_ms; });
    auto last = std::lower_bound(s.begin(), s.end(), t1, [](const Sample &x, double v) { return x.t_ms < v; });

    double sum = 0.0;
    double prev_t = t0;
    double prev_v = interpolate(s, t0, c);
    const auto step = [&](double t, double v) {
        sum += rule == IntegrationRule::trapezoid ? 0.5 * (prev_v + v) * (t - prev_t) : prev_v * (t - prev_t);
        prev_t = t;
        prev_v = v;
    };
    for (auto it = first; it != last; ++it) {
        step(it->t_ms, (*it).*c);
    }
    step(t1, interpolate(s, t1, c));

    // samples inside the interval plus any neighbor used to interpolate an end point
    const auto lo = std::lower_bound(s.begin(), s.end(), t0, [](const Sample &x, double v) { return x.t_ms < v; });
    const auto hi = std::upper_bound(s.begin(), s.end(), t1, [](double v, const Sample &x) { return v < x.t_ms; });
    std::size_t used = static_cast<std::size_t>(hi - lo);
    used += (lo->t_ms != t0) ? 1 : 0;
    used += (std::prev(hi)->t_ms != t1) ? 1 : 0;
    return { sum, used };
}

}  // namespace detail

/// Energy over [t0, t1] from power samples; Joules with time converted from ms to s.
inline EnergyResult integrate_energy(const Trace &trace, double t0_ms, double t1_ms, IntegrationRule rule = IntegrationRule::trapezoid) {
    const auto [wms, used] = detail::integrate_channel(trace, t0_ms, t1_ms, &Sample::power_w, rule);
    return { wms / 1000.0, t0_ms, t1_ms, used, 0 };
}

inline EnergyResult integrate_energy(const Trace &trace, IntegrationRule rule = IntegrationRule::trapezoid) {
    if (trace.samples.empty()) {
        throw insufficient_data_error{ "trace has no samples" };
    }
    return integrate_energy(trace, trace.start_ms(), trace.end_ms(), rule);
}

/// Running trapezoid energy at every sample time: (t_ms, joules).
inline std::vector<std::pair<double, double>> cumulative_energy(const Trace &trace) {
    std::vector<std::pair<double, double>> out;
    double e = 0.0;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const Sample &x = trace.samples[i];
        if (i > 0) {
            const Sample &p = trace.samples[i - 1];
            e += 0.5 * (p.power_w + x.power_w) * (x.t_ms - p.t_ms) / 1000.0;
        }
        out.emplace_back(x.t_ms, e);
    }
    return out;
}

/// Energy, average power and time-weighted utilization of `region` after filtering.
inline RegionStats region_stats(const Trace &trace, const Region &region, const FilterConfig &filter) {
    const FilteredTrace filtered = filter_spikes(trace, filter);
    const EnergyResult e = integrate_energy(filtered.trace, region.start_ms, region.end_ms);
    const auto [util_ms, used] = detail::integrate_channel(filtered.trace, region.start_ms, region.end_ms, &Sample::util_pct, IntegrationRule::trapezoid);
    (void) used;
    RegionStats st;
    st.energy_j = e.energy_j;
    st.duration_s = (region.end_ms - region.start_ms) / 1000.0;
    st.avg_power_w = st.energy_j / st.duration_s;
    st.avg_util_pct = util_ms / (region.end_ms - region.start_ms);
    return st;
}

namespace detail {

struct Run {
    std::size_t first{};  // sample indices [first, last]
    std::size_t last{};
    bool active{};
    double start_ms{};
    double end_ms{};
};

inline std::vector<double> centered_moving_average(const std::vector<double> &v, std::size_t window) {
    std::vector<double> prefix(v.size() + 1, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        prefix[i + 1] = prefix[i] + v[i];
    }
    const std::size_t before = window / 2;
    const std::size_t after = window - 1 - before;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t lo = i >= before ? i - before : 0;
        const std::size_t hi = std::min(v.size(), i + after + 1);
        out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    }
    return out;
}

// Recursive binary segmentation into constant-mean pieces. Emits split points as sample indices.
inline void split_plateaus(const std::vector<Sample> &s, std::size_t lo, std::size_t hi, double start_ms, double end_ms, const SegmentationPolicy &policy, std::vector<std::size_t> &splits) {
    if (hi - lo < 2) {
        return;
    }
    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        total += s[i].power_w;
        total_sq += s[i].power_w * s[i].power_w;
    }
    std::optional<std::size_t> best;
    double best_cost = 0.0;
    double best_step = 0.0;
    double left = 0.0;
    double left_sq = 0.0;
    for (std::size_t k = lo + 1; k < hi; ++k) {
        left += s[k - 1].power_w;
        left_sq += s[k - 1].power_w * s[k - 1].power_w;
        const double boundary = 0.5 * (s[k - 1].t_ms + s[k].t_ms);
        if (boundary - start_ms < policy.plateau_min_ms || end_ms - boundary < policy.plateau_min_ms) {
            continue;
        }
        const auto nl = static_cast<double>(k - lo);
        const auto nr = static_cast<double>(hi - k);
        const double right = total - left;
        const double cost = (left_sq - left * left / nl) + (total_sq - left_sq - right * right / nr);
        if (!best || cost < best_cost) {
            best = k;
            best_cost = cost;
            best_step = std::abs(left / nl - right / nr);
        }
    }
    if (!best || best_step < policy.plateau_min_step_w) {
        return;
    }
    const double boundary = 0.5 * (s[*best - 1].t_ms + s[*best].t_ms);
    split_plateaus(s, lo, *best, start_ms, boundary, policy, splits);
    splits.push_back(*best);
    split_plateaus(s, *best, hi, boundary, end_ms, policy, splits);
}

}  // namespace detail

/// Partitions the process interval (the whole trace when marks are absent) into idle/active stretches of
/// smoothed utilization, absorbing short idle dips. Regions are named region-0..region-N in time order.
inline std::vector<Region> segment_regions(const Trace &trace, const SegmentationPolicy &policy = {}) {
    const auto &all = trace.samples;
    if (all.empty()) {
        throw insufficient_data_error{ "cannot segment an empty trace" };
    }
    const double span_start = trace.marks ? trace.marks->proc_start_ms : trace.start_ms();
    const double span_end = trace.marks ? trace.marks->proc_end_ms : trace.end_ms();
    if (!(span_start < span_end)) {
        throw insufficient_data_error{ fmt::format("segmentation span [{}, {}] ms is empty", span_start, span_end) };
    }
    const auto lo_it = std::lower_bound(all.begin(), all.end(), span_start, [](const Sample &x, double v) { return x.t_ms < v; });
    const auto hi_it = std::upper_bound(all.begin(), all.end(), span_end, [](double v, const Sample &x) { return v < x.t_ms; });
    const std::vector<Sample> s(lo_it, hi_it);
    if (s.size() < 2) {
        return { Region{ "region-0", span_start, span_end, {} } };
    }

    const auto by_time = static_cast<std::size_t>(std::ceil(policy.smoothing_min_ms / trace.resolution_ms));
    const std::size_t window = std::max(policy.smoothing_min_samples, by_time);
    std::vector<double> util(s.size());
    std::transform(s.begin(), s.end(), util.begin(), [](const Sample &x) { return x.util_pct; });
    const std::vector<double> smooth = detail::centered_moving_average(util, window);

    std::vector<detail::Run> runs;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool active = smooth[i] > policy.idle_threshold_pct;
        if (runs.empty() || runs.back().active != active) {
            if (!runs.empty()) {
                const double boundary = 0.5 * (s[i - 1].t_ms + s[i].t_ms);
                runs.back().end_ms = boundary;
                runs.push_back({ i, i, active, boundary, 0.0 });
            } else {
                runs.push_back({ i, i, active, span_start, 0.0 });
            }
        }
        runs.back().last = i;
    }
    runs.back().end_ms = span_end;

    // absorb short idle dips between active stretches, then coalesce neighbors of equal state
    for (std::size_t i = 1; i + 1 < runs.size(); ++i) {
        if (!runs[i].active && runs[i - 1].active && runs[i + 1].active && runs[i].end_ms - runs[i].start_ms < policy.min_dip_ms) {
            runs[i].active = true;
        }
    }
    std::vector<detail::Run> merged;
    for (const auto &r : runs) {
        if (!merged.empty() && merged.back().active == r.active) {
            merged.back().last = r.last;
            merged.back().end_ms = r.end_ms;
        } else {
            merged.push_back(r);
        }
    }

    std::vector<std::pair<double, double>> bounds;
    for (const auto &r : merged) {
        if (!policy.split_plateaus) {
            bounds.emplace_back(r.start_ms, r.end_ms);
            continue;
        }
        std::vector<std::size_t> splits;
        detail::split_plateaus(s, r.first, r.last + 1, r.start_ms, r.end_ms, policy, splits);
        double from = r.start_ms;
        for (std::size_t k : splits) {
            const double boundary = 0.5 * (s[k - 1].t_ms + s[k].t_ms);
            bounds.emplace_back(from, boundary);
            from = boundary;
        }
        bounds.emplace_back(from, r.end_ms);
    }

    std::vector<Region> regions;
    for (const auto &[a, b] : bounds) {
        regions.push_back({ fmt::format("region-{}", regions.size()), a, b, {} });
    }
    return regions;
}

/// Relative spread (max − min) / max of a set of energies.
inline double relative_spread(std::span<const double> energies) {
    if (energies.size() < 2) {
        throw insufficient_data_error{ "spread needs at least two energies" };
    }
    const auto [mn, mx] = std::minmax_element(energies.begin(), energies.end());
    if (!(*mx > 0.0)) {
        throw domain_error{ "spread needs a positive maximum energy" };
    }
    return (*mx - *mn) / *mx;
}

struct SensitivityResult {
    /// Whole-trace energies (padding included); empty entries failed, see `errors`.
    std::vector<std::optional<double>> energies_j;
    /// Energies restricted to each trace's process marks.
    std::vector<std::optional<double>> marked_energies_j;
    std::vector<std::string> errors;
    std::optional<double> spread;
    std::optional<double> marked_spread;
};

/// Cross-trace energy spread for repeated captures of the same run (e.g. different resolutions).
inline SensitivityResult resolution_sensitivity(std::span<const Trace> traces, const FilterConfig &filter = FilterConfig::off()) {
    if (traces.size() < 2) {
        throw insufficient_data_error{ "resolution sensitivity needs at least two traces" };
    }
    SensitivityResult out;
    std::vector<double> full;
    std::vector<double> marked;
    for (const Trace &t : traces) {
        std::optional<double> e;
        std::optional<double> em;
        std::string err;
        try {
            const Trace ft = filter_spikes(t, filter).trace;
            e = integrate_energy(ft).energy_j;
            full.push_back(*e);
            if (t.marks && t.marks->proc_start_ms < t.marks->proc_end_ms) {
                em = integrate_energy(ft, t.marks->proc_start_ms, t.marks->proc_end_ms).energy_j;
                marked.push_back(*em);
            }
        } catch (const error &ex) {
            err = ex.what();
        }
        out.energies_j.push_back(e);
        out.marked_energies_j.push_back(em);
        out.errors.push_back(err);
    }
    if (full.size() >= 2) {
        out.spread = relative_spread(full);
    }
    if (marked.size() >= 2) {
        out.marked_spread = relative_spread(marked);
    }
    return out;
}

}  // namespace etrace
