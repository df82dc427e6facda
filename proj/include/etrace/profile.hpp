#pragma once

#include "etrace/error.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace etrace {

enum class WaveKind { constant, ramp, square };

/// Shape of one channel over one profile segment, parameterized on local time τ ∈ [0, len].
///   constant: `a`
///   ramp:     `a` at τ=0 rising/falling linearly to `b` at τ=len
///   square:   `a` (high) for the first duty·period of each cycle, `b` (low) for the rest;
///             `phase_ms` shifts the cycle start
struct Waveform {
    WaveKind kind{ WaveKind::constant };
    double a{};
    double b{};
    double period_ms{};
    double duty{};
    double phase_ms{};

    static Waveform constant(double v) { return { WaveKind::constant, v, v, 0.0, 0.0, 0.0 }; }

    static Waveform ramp(double from, double to) { return { WaveKind::ramp, from, to, 0.0, 0.0, 0.0 }; }

    static Waveform square(double high, double low, double period_ms, double duty) { return { WaveKind::square, high, low, period_ms, duty, 0.0 }; }

    [[nodiscard]] double value(double tau, double len) const {
        switch (kind) {
            case WaveKind::constant:
                return a;
            case WaveKind::ramp:
                return len > 0.0 ? a + (b - a) * (tau / len) : a;
            case WaveKind::square: {
                const double phase = std::fmod(tau + phase_ms, period_ms);
                return phase < duty * period_ms ? a : b;
            }
        }
        return a;
    }

    /// Left limit at τ = len, i.e. the value the segment ends on.
    [[nodiscard]] double end_value(double len) const {
        if (kind != WaveKind::square) {
            return value(len, len);
        }
        const double phase = std::fmod(len + phase_ms, period_ms);
        if (phase == 0.0) {
            return duty < 1.0 ? b : a;
        }
        return phase <= duty * period_ms ? a : b;
    }

    /// ∫ value over [t0, t1] ⊆ [0, len], in value·ms.
    [[nodiscard]] double integral(double t0, double t1, double len) const {
        switch (kind) {
            case WaveKind::constant:
                return a * (t1 - t0);
            case WaveKind::ramp:
                return len > 0.0 ? (t1 - t0) * (a + (b - a) * (t0 + t1) / (2.0 * len)) : a * (t1 - t0);
            case WaveKind::square:
                return square_cumulative(t1 + phase_ms) - square_cumulative(t0 + phase_ms);
        }
        return 0.0;
    }

    [[nodiscard]] double min_value() const { return std::min(a, b); }

    [[nodiscard]] double max_value() const { return std::max(a, b); }

    /// The same shape restricted to [t0, t1], re-based so the slice starts at local time 0.
    [[nodiscard]] Waveform slice(double t0, double t1, double len) const {
        Waveform w = *this;
        if (kind == WaveKind::ramp) {
            w.a = value(t0, len);
            w.b = value(t1, len);
        } else if (kind == WaveKind::square) {
            w.phase_ms = std::fmod(phase_ms + t0, period_ms);
        }
        return w;
    }

  private:
    // ∫_0^x of the unshifted square wave.
    [[nodiscard]] double square_cumulative(double x) const {
        const double cycles = std::floor(x / period_ms);
        const double r = x - cycles * period_ms;
        const double high = duty * period_ms;
        return cycles * period_ms * (a * duty + b * (1.0 - duty)) + std::min(r, high) * a + std::max(0.0, r - high) * b;
    }
};

struct ProfileSegment {
    double start_ms{};
    double end_ms{};
    Waveform power;
    Waveform util;
    Waveform temp;

    [[nodiscard]] double length() const { return end_ms - start_ms; }
};

/// Piecewise description of instantaneous power, utilization and temperature over [0, duration].
/// Outside that range each channel holds its boundary value.
class GroundTruthProfile {
  public:
    GroundTruthProfile() = default;

    explicit GroundTruthProfile(std::vector<ProfileSegment> segments, double power_ceiling_w = 1.0e5) :
        segments_{ std::move(segments) } {
        validate(power_ceiling_w);
    }

    [[nodiscard]] const std::vector<ProfileSegment> &segments() const noexcept { return segments_; }

    [[nodiscard]] double duration_ms() const { return segments_.empty() ? 0.0 : segments_.back().end_ms; }

    [[nodiscard]] double power_at(double t) const { return value_at(&ProfileSegment::power, t); }

    [[nodiscard]] double util_at(double t) const { return value_at(&ProfileSegment::util, t); }

    [[nodiscard]] double temp_at(double t) const { return value_at(&ProfileSegment::temp, t); }

    /// ∫ p(s) ds over [t0, t1] in W·ms; the range may extend beyond the profile.
    [[nodiscard]] double power_integral(double t0, double t1) const { return integral(&ProfileSegment::power, t0, t1); }

    [[nodiscard]] double util_integral(double t0, double t1) const { return integral(&ProfileSegment::util, t0, t1); }

    /// Total energy over [0, duration] in Joules.
    [[nodiscard]] double energy_j() const { return power_integral(0.0, duration_ms()) / 1000.0; }

    [[nodiscard]] double max_power() const {
        double m = 0.0;
        for (const auto &s : segments_) {
            m = std::max(m, s.power.max_value());
        }
        return m;
    }

    /// Copy with power overridden to `power_w` on [at_ms, at_ms + width_ms); the other channels are unchanged.
    [[nodiscard]] GroundTruthProfile with_power_override(double at_ms, double width_ms, double power_w) const {
        const double until = at_ms + width_ms;
        if (!(width_ms > 0.0) || at_ms < 0.0 || until > duration_ms()) {
            throw config_error{ fmt::format("override [{}, {}) ms is outside the profile [0, {}] ms", at_ms, until, duration_ms()) };
        }
        std::vector<ProfileSegment> out;
        for (const ProfileSegment &s : segments_) {
            const double len = s.length();
            // cut points of this segment, local time
            std::vector<double> cuts{ 0.0 };
            for (double c : { at_ms - s.start_ms, until - s.start_ms }) {
                if (c > 0.0 && c < len) {
                    cuts.push_back(c);
                }
            }
            cuts.push_back(len);
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                const double t0 = cuts[i];
                const double t1 = cuts[i + 1];
                ProfileSegment piece{ s.start_ms + t0, s.start_ms + t1, s.power.slice(t0, t1, len), s.util.slice(t0, t1, len), s.temp.slice(t0, t1, len) };
                if (piece.start_ms >= at_ms && piece.end_ms <= until) {
                    piece.power = Waveform::constant(power_w);
                }
                out.push_back(piece);
            }
        }
        GroundTruthProfile p;
        p.segments_ = std::move(out);
        return p;
    }

  private:
    using Channel = Waveform ProfileSegment::*;

    void validate(double power_ceiling_w) const {
        if (segments_.empty()) {
            throw config_error{ "profile has no segments" };
        }
        double expected_start = 0.0;
        for (const auto &s : segments_) {
            if (s.start_ms != expected_start) {
                throw config_error{ fmt::format("segment starting at {} ms is not contiguous with the previous end {} ms", s.start_ms, expected_start) };
            }
            if (!(s.end_ms > s.start_ms)) {
                throw config_error{ fmt::format("segment [{}, {}] ms is empty", s.start_ms, s.end_ms) };
            }
            for (const Waveform *w : { &s.power, &s.util, &s.temp }) {
                if (w->kind == WaveKind::square && (!(w->period_ms > 0.0) || w->duty < 0.0 || w->duty > 1.0)) {
                    throw config_error{ "square wave needs a positive period and a duty cycle in [0, 1]" };
                }
            }
            if (s.power.min_value() < 0.0 || s.power.max_value() > power_ceiling_w) {
                throw config_error{ fmt::format("segment power outside [0, {}] W", power_ceiling_w) };
            }
            if (s.util.min_value() < 0.0 || s.util.max_value() > 100.0) {
                throw config_error{ "segment utilization outside [0, 100] %" };
            }
            expected_start = s.end_ms;
        }
    }

    [[nodiscard]] std::size_t segment_index(double t) const {
        auto it = std::upper_bound(segments_.begin(), segments_.end(), t, [](double v, const ProfileSegment &s) { return v < s.start_ms; });
        return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - segments_.begin()) - 1));
    }

    [[nodiscard]] double first_value(Channel c) const { return (segments_.front().*c).value(0.0, segments_.front().length()); }

    [[nodiscard]] double last_value(Channel c) const { return (segments_.back().*c).end_value(segments_.back().length()); }

    [[nodiscard]] double value_at(Channel c, double t) const {
        if (t < 0.0) {
            return first_value(c);
        }
        if (t >= duration_ms()) {
            return last_value(c);
        }
        const ProfileSegment &s = segments_[segment_index(t)];
        return (s.*c).value(t - s.start_ms, s.length());
    }

    [[nodiscard]] double integral(Channel c, double t0, double t1) const {
        if (t1 <= t0) {
            return 0.0;
        }
        double sum = 0.0;
        if (t0 < 0.0) {
            sum += first_value(c) * (std::min(t1, 0.0) - t0);
        }
        const double end = duration_ms();
        if (t1 > end) {
            sum += last_value(c) * (t1 - std::max(t0, end));
        }
        const double lo = std::max(t0, 0.0);
        const double hi = std::min(t1, end);
        if (lo < hi) {
            for (std::size_t i = segment_index(lo); i < segments_.size() && segments_[i].start_ms < hi; ++i) {
                const ProfileSegment &s = segments_[i];
                const double a = std::max(lo, s.start_ms) - s.start_ms;
                const double b = std::min(hi, s.end_ms) - s.start_ms;
                sum += (s.*c).integral(a, b, s.length());
            }
        }
        return sum;
    }

    std::vector<ProfileSegment> segments_;
};

}  // namespace etrace
