#include "etrace/sensor.hpp"

#include "oracles.hpp"

#include "gtest/gtest.h"

#include <random>
#include <vector>

using namespace etrace;

namespace {

ProfileSegment seg(double a, double b, Waveform power, double util = 50.0) { return { a, b, power, Waveform::constant(util), Waveform::constant(40.0) }; }

GroundTruthProfile random_profile(std::mt19937_64 &rng) {
    std::uniform_int_distribution<int> count(1, 6);
    std::uniform_real_distribution<double> len(200.0, 4000.0);
    std::uniform_real_distribution<double> watts(0.0, 500.0);
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
            default:
                w = Waveform::square(watts(rng), watts(rng), std::uniform_real_distribution<double>(20.0, 900.0)(rng), std::uniform_real_distribution<double>(0.1, 0.9)(rng));
        }
        segs.push_back(seg(at, at + l, w));
        at += l;
    }
    return GroundTruthProfile{ segs };
}

}  // namespace

TEST(Profile, RejectsBadSegments) {
    EXPECT_THROW(GroundTruthProfile{ std::vector<ProfileSegment>{} }, config_error);
    EXPECT_THROW((GroundTruthProfile{ { seg(0, 10, Waveform::constant(1)), seg(11, 20, Waveform::constant(1)) } }), config_error);
    EXPECT_THROW((GroundTruthProfile{ { seg(5, 10, Waveform::constant(1)) } }), config_error);
    EXPECT_THROW((GroundTruthProfile{ { seg(0, 10, Waveform::constant(-1)) } }), config_error);
    EXPECT_THROW((GroundTruthProfile{ { seg(0, 10, Waveform::constant(1), 120.0) } }), config_error);
    EXPECT_THROW((GroundTruthProfile{ { seg(0, 10, Waveform::square(2, 1, 0, 0.5)) } }), config_error);
    EXPECT_THROW((GroundTruthProfile{ { seg(0, 10, Waveform::constant(600)) }, 500.0 }), config_error);
}

TEST(Profile, ExtendsBoundaryValues) {
    const GroundTruthProfile p{ { seg(0, 1000, Waveform::ramp(10, 20)), seg(1000, 2000, Waveform::constant(70)) } };
    EXPECT_DOUBLE_EQ(p.power_at(-500), 10.0);
    EXPECT_DOUBLE_EQ(p.power_at(500), 15.0);
    EXPECT_DOUBLE_EQ(p.power_at(5000), 70.0);
    EXPECT_DOUBLE_EQ(p.power_integral(-1000, 0), 10.0 * 1000);
    EXPECT_DOUBLE_EQ(p.power_integral(2000, 3000), 70.0 * 1000);
}

TEST(Profile, ClosedFormEnergies) {
    EXPECT_DOUBLE_EQ(GroundTruthProfile({ seg(0, 10000, Waveform::constant(100)) }).energy_j(), 1000.0);
    EXPECT_DOUBLE_EQ(GroundTruthProfile({ seg(0, 10000, Waveform::ramp(0, 100)) }).energy_j(), 500.0);
    EXPECT_NEAR(GroundTruthProfile({ seg(0, 20000, Waveform::square(250, 50, 2000, 0.5)) }).energy_j(), 3000.0, 1e-9);
}

TEST(Profile, IntegralMatchesRiemannOracle) {
    std::mt19937_64 rng{ 99 };
    for (int i = 0; i < 40; ++i) {
        const GroundTruthProfile p = random_profile(rng);
        const double d = p.duration_ms();
        const double a = std::uniform_real_distribution<double>(-500.0, d / 2)(rng);
        const double b = std::uniform_real_distribution<double>(d / 2, d + 500.0)(rng);
        const double exact = p.power_integral(a, b) / 1000.0;
        const double oracle = oracle::riemann_energy_j(p, a, b, 0.05);
        EXPECT_NEAR(exact, oracle, 1e-3 * std::max(1.0, std::abs(oracle)));
    }
}

TEST(Profile, PowerOverrideKeepsShapeElsewhere) {
    const GroundTruthProfile p{ { seg(0, 4000, Waveform::square(250, 100, 1000, 0.5)) } };
    const GroundTruthProfile q = p.with_power_override(1250.0, 10.0, 4000.0);
    EXPECT_DOUBLE_EQ(q.power_at(1255.0), 4000.0);
    for (double t : { 0.0, 300.0, 700.0, 1240.0, 1300.0, 2100.0, 2600.0, 3999.0 }) {
        EXPECT_DOUBLE_EQ(q.power_at(t), p.power_at(t)) << t;
    }
    EXPECT_NEAR(q.energy_j() - p.energy_j(), (4000.0 - 250.0) * 10.0 / 1000.0, 1e-9);
    EXPECT_THROW(p.with_power_override(3995.0, 10.0, 1.0), config_error);
}

TEST(Sensor, SpecExamples) {
    // constant 100 W, 1 ms spike to 1000 W, 1 s window
    const GroundTruthProfile spike = GroundTruthProfile{ { seg(0, 5000, Waveform::constant(100)) } }.with_power_override(2000.0, 1.0, 1000.0);
    EXPECT_NEAR(convolve_sensor(spike, SensorModel::nvml(), 2500.0), 100.9, 1e-9);
    // 0 to 100 W ramp over 10 s read at 10 s with 1 s window
    const GroundTruthProfile ramp{ { seg(0, 10000, Waveform::ramp(0, 100)) } };
    EXPECT_NEAR(convolve_sensor(ramp, SensorModel::nvml(), 10000.0), 95.0, 1e-9);
    // 100 ms bursts averaged over a full number of periods
    const GroundTruthProfile sq{ { seg(0, 10000, Waveform::square(250, 50, 200, 0.5)) } };
    EXPECT_NEAR(convolve_sensor(sq, SensorModel::nvml(), 5000.0), 150.0, 1e-9);
}

TEST(Sensor, MatchesNumericWindowOracle) {
    std::mt19937_64 rng{ 5 };
    for (int i = 0; i < 20; ++i) {
        const GroundTruthProfile p = random_profile(rng);
        for (double w : { 1.0, 50.0, 1000.0 }) {
            const double t = std::uniform_real_distribution<double>(0.0, p.duration_ms() + 200.0)(rng);
            SensorModel m = SensorModel::nvml();
            m.power_window_ms = w;
            EXPECT_NEAR(convolve_sensor(p, m, t), oracle::windowed_power(p, w, t), 0.02 + 1e-4 * p.max_power()) << "window " << w << " t " << t;
        }
    }
}

TEST(Sensor, WindowedValueBoundedByWindowExtremes) {
    std::mt19937_64 rng{ 17 };
    for (int i = 0; i < 30; ++i) {
        const GroundTruthProfile p = random_profile(rng);
        const double t = std::uniform_real_distribution<double>(0.0, p.duration_ms())(rng);
        const SensorModel m = SensorModel::nvml();
        double lo = 1e300;
        double hi = -1e300;
        for (double s = t - m.power_window_ms; s <= t; s += 0.5) {
            lo = std::min(lo, p.power_at(s));
            hi = std::max(hi, p.power_at(s));
        }
        const double v = convolve_sensor(p, m, t);
        EXPECT_GE(v, lo - 1e-9);
        EXPECT_LE(v, hi + 1e-9);
    }
}

TEST(Sensor, LinearInProfile) {
    const GroundTruthProfile p{ { seg(0, 3000, Waveform::ramp(10, 200)), seg(3000, 6000, Waveform::square(300, 20, 250, 0.3)) } };
    const GroundTruthProfile q{ { seg(0, 2000, Waveform::constant(50)), seg(2000, 6000, Waveform::ramp(100, 0)) } };
    // 2p + q built segment-wise on the common refinement
    const GroundTruthProfile sum{ {
        seg(0, 2000, Waveform::ramp(2 * 10 + 50, 2 * (10 + 190.0 * 2000 / 3000) + 50)),
        seg(2000, 3000, Waveform::ramp(2 * (10 + 190.0 * 2000 / 3000) + 100, 2 * 200 + 75)),
    } };
    for (double t : { 500.0, 1500.0, 2500.0, 3000.0 }) {
        const SensorModel m = SensorModel::nvml();
        EXPECT_NEAR(convolve_sensor(sum, m, t), 2 * convolve_sensor(p, m, t) + convolve_sensor(q, m, t), 1e-9) << t;
    }
}

TEST(Sensor, NoiseIsSeededAndQuantized) {
    const GroundTruthProfile p{ { seg(0, 1000, Waveform::constant(120)) } };
    SensorModel m = SensorModel::nvml();
    m.noise_std_w = 3.0;
    std::mt19937_64 a{ 42 };
    std::mt19937_64 b{ 42 };
    std::mt19937_64 c{ 43 };
    std::vector<double> va, vb, vc;
    for (int i = 0; i < 50; ++i) {
        va.push_back(convolve_sensor(p, m, 500.0, &a));
        vb.push_back(convolve_sensor(p, m, 500.0, &b));
        vc.push_back(convolve_sensor(p, m, 500.0, &c));
    }
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);

    m.noise_std_w = 0.0;
    m.quantization_w = 5.0;
    const GroundTruthProfile r{ { seg(0, 1000, Waveform::constant(123.0)) } };
    EXPECT_DOUBLE_EQ(convolve_sensor(r, m, 900.0), 125.0);
}

TEST(Sensor, UtilizationWindowAndModels) {
    const GroundTruthProfile p{ { seg(0, 1000, Waveform::constant(0), 0.0), seg(1000, 2000, Waveform::constant(0), 100.0) } };
    EXPECT_DOUBLE_EQ(sensor_utilization(p, SensorModel::nvml(), 1250.0), 50.0);
    EXPECT_DOUBLE_EQ(sensor_utilization(p, SensorModel::rocm(100.0), 1250.0), 100.0);
    EXPECT_DOUBLE_EQ(SensorModel::rocm(10.0).power_window_ms, 1.0);
    EXPECT_DOUBLE_EQ(SensorModel::nvml().power_window_ms, 1000.0);
    EXPECT_THROW((SensorModel{ 0.0, 500.0, 0.0, 0.0 }.validate()), config_error);
    EXPECT_THROW((SensorModel{ 1.0, 500.0, -1.0, 0.0 }.validate()), config_error);
}
