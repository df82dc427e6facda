#pragma once

#include "etrace/analysis.hpp"
#include "etrace/backend.hpp"
#include "etrace/clock.hpp"
#include "etrace/error.hpp"
#include "etrace/profile.hpp"
#include "etrace/sampler.hpp"
#include "etrace/sensor.hpp"
#include "etrace/trace.hpp"
#include "etrace/trace_io.hpp"

#include "fmt/format.h"

#include <cmath>
#include <cstdint>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace etrace {

/// Flat power for the whole run.
struct ConstantProfile {
    double power_w{ 100.0 };
    double duration_ms{ 60000.0 };
    double util_pct{ 90.0 };
};

/// Repeated kernel bursts: `count` cycles of `high_w` for `burst_ms`, then `low_w` until the period ends.
struct DmcBurstProfile {
    double high_w{ 250.0 };
    double low_w{ 100.0 };
    double burst_ms{ 1000.0 };
    double period_ms{ 2000.0 };
    int count{ 15 };
};

/// Ramp from `start_w` to a peak, then settle on a plateau until the end of the run.
struct AmrEvolutionProfile {
    double start_w{ 100.0 };
    double peak_w{ 400.0 };
    double ramp_ms{ 10000.0 };
    double plateau_w{ 300.0 };
    double plateau_ms{ 20000.0 };
};

/// Caller-supplied profile; its closed-form energy is taken from the exact piecewise integral.
struct CustomProfile {
    GroundTruthProfile profile;
};

/// A narrow excursion written over the profile's power. It is treated as a sensor false positive, so it
/// does not count toward the closed-form energy.
struct SpikeInjection {
    double at_ms{};
    double power_w{};
    double width_ms{ 1.0 };
};

struct NamedProfile {
    std::variant<ConstantProfile, DmcBurstProfile, AmrEvolutionProfile, CustomProfile> shape;
    std::optional<SpikeInjection> spike;
    double temp_c{ 45.0 };
};

struct BuiltProfile {
    std::string name;
    GroundTruthProfile profile;
    /// Energy of the profile without any injected spike, from the closed-form expression.
    double closed_form_energy_j{};
    /// Extra energy the spike adds over the underlying profile, zero without a spike.
    double spike_energy_j{};
};

inline BuiltProfile build_profile(const NamedProfile &spec) {
    const Waveform temp = Waveform::constant(spec.temp_c);
    BuiltProfile out;
    if (const auto *c = std::get_if<ConstantProfile>(&spec.shape)) {
        if (!(c->duration_ms > 0.0) || c->power_w < 0.0) {
            throw config_error{ "constant profile needs a positive duration and non-negative power" };
        }
        out.name = "constant";
        out.profile = GroundTruthProfile{ { { 0.0, c->duration_ms, Waveform::constant(c->power_w), Waveform::constant(c->util_pct), temp } } };
        out.closed_form_energy_j = c->power_w * c->duration_ms / 1000.0;
    } else if (const auto *d = std::get_if<DmcBurstProfile>(&spec.shape)) {
        if (d->count < 1 || !(d->period_ms > 0.0) || !(d->burst_ms > 0.0) || d->burst_ms > d->period_ms) {
            throw config_error{ fmt::format("dmc-burst needs count >= 1 and 0 < burst ({} ms) <= period ({} ms)", d->burst_ms, d->period_ms) };
        }
        const double duty = d->burst_ms / d->period_ms;
        const double len = d->period_ms * d->count;
        out.name = "dmc-burst";
        out.profile = GroundTruthProfile{ { { 0.0, len, Waveform::square(d->high_w, d->low_w, d->period_ms, duty), Waveform::square(95.0, 20.0, d->period_ms, duty), temp } } };
        out.closed_form_energy_j = d->count * (d->high_w * d->burst_ms + d->low_w * (d->period_ms - d->burst_ms)) / 1000.0;
    } else if (const auto *a = std::get_if<AmrEvolutionProfile>(&spec.shape)) {
        if (!(a->ramp_ms > 0.0) || !(a->plateau_ms > 0.0)) {
            throw config_error{ "amr-evolution needs positive ramp and plateau durations" };
        }
        out.name = "amr-evolution";
        out.profile = GroundTruthProfile{ {
            { 0.0, a->ramp_ms, Waveform::ramp(a->start_w, a->peak_w), Waveform::ramp(30.0, 95.0), temp },
            { a->ramp_ms, a->ramp_ms + a->plateau_ms, Waveform::constant(a->plateau_w), Waveform::constant(90.0), temp },
        } };
        out.closed_form_energy_j = (0.5 * (a->start_w + a->peak_w) * a->ramp_ms + a->plateau_w * a->plateau_ms) / 1000.0;
    } else {
        const auto &cp = std::get<CustomProfile>(spec.shape);
        out.name = "custom";
        out.profile = cp.profile;
        out.closed_form_energy_j = cp.profile.energy_j();
    }
    if (spec.spike) {
        const SpikeInjection &s = *spec.spike;
        const double base = out.profile.power_integral(s.at_ms, s.at_ms + s.width_ms);
        out.profile = out.profile.with_power_override(s.at_ms, s.width_ms, s.power_w);
        out.spike_energy_j = (s.power_w * s.width_ms - base) / 1000.0;
        out.name += "+spike";
    }
    return out;
}

namespace detail {

// "250w", "1.5s", "20ms"
inline double parse_quantity(std::string_view token, std::string_view unit_kind) {
    std::string_view num = token;
    double scale = 1.0;
    if (unit_kind == "power" && (num.ends_with('w') || num.ends_with('W'))) {
        num.remove_suffix(1);
    } else if (unit_kind == "time") {
        if (num.ends_with("ms")) {
            num.remove_suffix(2);
        } else if (num.ends_with('s')) {
            num.remove_suffix(1);
            scale = 1000.0;
        } else {
            throw config_error{ fmt::format("time '{}' needs an 'ms' or 's' suffix", token) };
        }
    } else if (unit_kind == "power") {
        throw config_error{ fmt::format("power '{}' needs a 'w' suffix", token) };
    }
    const auto v = to_double(num);
    if (!v) {
        throw config_error{ fmt::format("cannot parse '{}'", token) };
    }
    return *v * scale;
}

}  // namespace detail

/// Parses a profile spec:
///   constant:<P>w:<D>s
///   dmc-burst:<high>w:<low>w:<burst>s:<period>s:<count>
///   amr-evolution:<start>w:<peak>w:<ramp>s:<plateau>w:<plateau-length>s
/// optionally followed by `+spike:<P>w:<at>s[:<width>ms]`. Times accept `s` or `ms`.
inline NamedProfile parse_profile(std::string_view text) {
    NamedProfile spec;
    std::string_view body = text;
    if (const auto plus = text.find('+'); plus != std::string_view::npos) {
        body = text.substr(0, plus);
        const auto parts = detail::split(text.substr(plus + 1), ':');
        if (parts.size() < 3 || parts.size() > 4 || parts[0] != "spike") {
            throw config_error{ fmt::format("bad spike spec in '{}'", text) };
        }
        SpikeInjection s;
        s.power_w = detail::parse_quantity(parts[1], "power");
        s.at_ms = detail::parse_quantity(parts[2], "time");
        if (parts.size() == 4) {
            s.width_ms = detail::parse_quantity(parts[3], "time");
        }
        spec.spike = s;
    }
    const auto p = detail::split(body, ':');
    const auto need = [&](std::size_t n) {
        if (p.size() != n) {
            throw config_error{ fmt::format("profile '{}' expects {} fields, got {}", p[0], n - 1, p.size() - 1) };
        }
    };
    if (p[0] == "constant") {
        need(3);
        spec.shape = ConstantProfile{ detail::parse_quantity(p[1], "power"), detail::parse_quantity(p[2], "time") };
    } else if (p[0] == "dmc-burst") {
        need(6);
        const auto count = detail::to_double(p[5]);
        if (!count || *count < 1 || std::floor(*count) != *count) {
            throw config_error{ fmt::format("burst count '{}' must be a positive integer", p[5]) };
        }
        spec.shape = DmcBurstProfile{ detail::parse_quantity(p[1], "power"), detail::parse_quantity(p[2], "power"), detail::parse_quantity(p[3], "time"), detail::parse_quantity(p[4], "time"), static_cast<int>(*count) };
    } else if (p[0] == "amr-evolution") {
        need(6);
        spec.shape = AmrEvolutionProfile{ detail::parse_quantity(p[1], "power"), detail::parse_quantity(p[2], "power"), detail::parse_quantity(p[3], "time"), detail::parse_quantity(p[4], "power"), detail::parse_quantity(p[5], "time") };
    } else {
        throw config_error{ fmt::format("unknown profile '{}' (constant, dmc-burst, amr-evolution)", p[0]) };
    }
    return spec;
}

/// Trace of the instantaneous profile values at every tick of [0, duration]: an ideal sensor.
inline Trace ideal_trace(const GroundTruthProfile &profile, double resolution_ms, const DeviceSpec &device = devices::h100) {
    Trace t;
    t.resolution_ms = resolution_ms;
    t.device = device;
    t.label = "ideal";
    const auto n = static_cast<long long>(std::floor(profile.duration_ms() / resolution_ms));
    for (long long k = 0; k <= n; ++k) {
        const double at = static_cast<double>(k) * resolution_ms;
        t.samples.push_back({ at, profile.power_at(at), profile.temp_at(at), profile.util_at(at) });
    }
    t.marks = Marks{ 0.0, t.end_ms() };
    return t;
}

/// splitmix64 finalizer; derives independent per-cell seeds from one study seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct StudyOptions {
    std::uint64_t seed{ 0 };
    DeviceSpec device{ devices::h100 };
    FilterConfig filter{};
    bool parallel{ true };
};

struct StudyCell {
    std::size_t model_index{};
    SensorModel model;
    double resolution_ms{};
    std::optional<double> energy_j;
    std::optional<double> filtered_energy_j;
    /// Signed relative errors against the closed-form energy.
    std::optional<double> error;
    std::optional<double> filtered_error;
    std::size_t samples{};
    std::string failure;
    Trace trace;
};

struct StudyReport {
    BuiltProfile profile;
    std::uint64_t seed{};
    std::vector<StudyCell> cells;  // model-major, resolution-minor
    /// Per sensor model: relative energy spread across resolutions.
    std::vector<std::optional<double>> spread_by_model;
};

namespace detail {

inline StudyCell run_cell(const BuiltProfile &built, std::size_t model_index, const SensorModel &model, double resolution_ms, std::uint64_t seed, const StudyOptions &opt) {
    StudyCell cell;
    cell.model_index = model_index;
    cell.model = model;
    cell.resolution_ms = resolution_ms;
    try {
        VirtualClock clock;
        SyntheticBackend backend{ built.profile, model, clock, seed };
        SamplerConfig cfg;
        cfg.resolution_ms = resolution_ms;
        cfg.duration_ms = built.profile.duration_ms();
        cfg.device = opt.device;
        cfg.label = fmt::format("{}-w{}-r{}", built.name, model.power_window_ms, resolution_ms);
        TraceRun run = run_trace(cfg, backend, clock);
        const double truth = built.closed_form_energy_j;
        cell.energy_j = integrate_energy(run.trace).energy_j;
        cell.filtered_energy_j = integrate_energy(filter_spikes(run.trace, opt.filter).trace).energy_j;
        cell.error = (*cell.energy_j - truth) / truth;
        cell.filtered_error = (*cell.filtered_energy_j - truth) / truth;
        cell.samples = run.trace.samples.size();
        cell.trace = std::move(run.trace);
    } catch (const std::exception &e) {
        cell.failure = e.what();
    }
    return cell;
}

}  // namespace detail

/// Samples the profile through every (sensor model, resolution) pair on a virtual clock and compares the
/// integrated energy with the closed form. Cells are independent; results do not depend on evaluation order.
inline StudyReport run_study(const NamedProfile &spec, const std::vector<SensorModel> &models, const std::vector<double> &resolutions, const StudyOptions &opt = {}) {
    if (models.empty() || resolutions.empty()) {
        throw config_error{ "a study needs at least one sensor model and one resolution" };
    }
    StudyReport report;
    report.profile = build_profile(spec);
    report.seed = opt.seed;

    std::vector<std::future<StudyCell>> pending;
    std::vector<StudyCell> cells;
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (std::size_t r = 0; r < resolutions.size(); ++r) {
            const std::uint64_t cell_seed = mix_seed(opt.seed, m * resolutions.size() + r);
            if (opt.parallel) {
                pending.push_back(std::async(std::launch::async, detail::run_cell, std::cref(report.profile), m, models[m], resolutions[r], cell_seed, std::cref(opt)));
            } else {
                cells.push_back(detail::run_cell(report.profile, m, models[m], resolutions[r], cell_seed, opt));
            }
        }
    }
    for (auto &f : pending) {
        cells.push_back(f.get());
    }
    report.cells = std::move(cells);

    for (std::size_t m = 0; m < models.size(); ++m) {
        std::vector<double> e;
        for (const auto &c : report.cells) {
            if (c.model_index == m && c.energy_j) {
                e.push_back(*c.energy_j);
            }
        }
        report.spread_by_model.push_back(e.size() >= 2 ? std::optional<double>{ relative_spread(e) } : std::nullopt);
    }
    return report;
}

}  // namespace etrace
