#pragma once

// Random inputs shared by the unit tests and the acceptance runner.

#include "etrace/profile.hpp"
#include "etrace/trace.hpp"

#include <random>
#include <string>
#include <vector>

namespace etrace::testing {

/// Valid trace whose values all sit on the CSV decimal grid, so the text form is exact.
inline Trace random_grid_trace(std::mt19937_64 &rng) {
    std::uniform_int_distribution<int> n_dist(0, 60);
    std::uniform_int_distribution<long long> dt(1, 250000);
    std::uniform_int_distribution<long long> power(0, 700000);
    std::uniform_int_distribution<int> temp(-200, 1200);
    std::uniform_int_distribution<int> util(0, 1000);
    std::uniform_int_distribution<int> coin(0, 1);

    Trace t;
    t.device = coin(rng) ? devices::a100 : DeviceSpec{ "custom-gpu", 275.5, 48.0, std::nullopt };
    t.resolution_ms = static_cast<double>(std::uniform_int_distribution<int>(1, 1000)(rng));
    t.label = "run-" + std::to_string(rng() % 1000);
    long long tick = std::uniform_int_distribution<long long>(0, 5000)(rng);
    const int n = n_dist(rng);
    for (int i = 0; i < n; ++i) {
        t.samples.push_back({ tick / 1000.0, power(rng) / 1000.0, temp(rng) / 10.0, util(rng) / 10.0 });
        tick += dt(rng);
    }
    if (!t.samples.empty() && coin(rng)) {
        const double a = t.samples[t.samples.size() / 3].t_ms;
        const double b = t.samples[2 * t.samples.size() / 3].t_ms;
        t.marks = Marks{ a, b };
        if (coin(rng)) {
            t.pre_pad_ms = a;
        }
    }
    if (coin(rng)) {
        t.extra["dropped"] = std::to_string(rng() % 10);
        t.extra["site"] = "frontier";
    }
    return t;
}

/// 1 to 6 segments of constant, ramp or square power between 50 and 450 W; squares have 1 to 4 s periods.
inline GroundTruthProfile random_piecewise_profile(std::mt19937_64 &rng) {
    std::uniform_int_distribution<int> count(1, 6);
    std::uniform_real_distribution<double> len(1000.0, 5000.0);
    std::uniform_real_distribution<double> watts(50.0, 450.0);
    std::uniform_real_distribution<double> period(1000.0, 4000.0);
    std::uniform_real_distribution<double> duty(0.2, 0.8);
    std::uniform_int_distribution<int> kind(0, 2);
    std::vector<ProfileSegment> segs;
    double at = 0.0;
    for (int i = 0, n = count(rng); i < n; ++i) {
        const double l = len(rng);
        Waveform w;
        switch (kind(rng)) {
            case 0:
                w = Waveform::constant(watts(rng));
                break;
            case 1:
                w = Waveform::ramp(watts(rng), watts(rng));
                break;
            default: {
                const double hi = watts(rng);
                const double lo = watts(rng);
                const double p = period(rng);
                w = Waveform::square(hi, lo, p, duty(rng));
            }
        }
        segs.push_back({ at, at + l, w, Waveform::constant(50.0), Waveform::constant(40.0) });
        at += l;
    }
    return GroundTruthProfile{ segs };
}

}  // namespace etrace::testing
