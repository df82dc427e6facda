#include "etrace/simstudy.hpp"

#include "oracles.hpp"

#include "gtest/gtest.h"

#include <cmath>

using namespace etrace;

TEST(BuildProfile, ClosedFormsAgreeWithOracle) {
    const BuiltProfile c = build_profile({ ConstantProfile{ 100.0, 60000.0 }, std::nullopt, 45.0 });
    EXPECT_DOUBLE_EQ(c.closed_form_energy_j, 6000.0);
    const BuiltProfile d = build_profile({ DmcBurstProfile{}, std::nullopt, 45.0 });
    EXPECT_DOUBLE_EQ(d.closed_form_energy_j, 5250.0);
    const BuiltProfile a = build_profile({ AmrEvolutionProfile{}, std::nullopt, 45.0 });
    EXPECT_DOUBLE_EQ(a.closed_form_energy_j, 8500.0);
    for (const BuiltProfile *b : { &c, &d, &a }) {
        const double oracle = oracle::riemann_energy_j(b->profile, 0.0, b->profile.duration_ms(), 0.1);
        EXPECT_NEAR(b->closed_form_energy_j, oracle, 1e-6 * oracle) << b->name;
    }
}

TEST(BuildProfile, RejectsInconsistentTiming) {
    EXPECT_THROW(build_profile({ DmcBurstProfile{ 250, 100, 3000, 2000, 15 }, std::nullopt, 45.0 }), config_error);
    EXPECT_THROW(build_profile({ DmcBurstProfile{ 250, 100, 1000, 2000, 0 }, std::nullopt, 45.0 }), config_error);
    EXPECT_THROW(build_profile({ AmrEvolutionProfile{ 100, 400, 0, 300, 1000 }, std::nullopt, 45.0 }), config_error);
    EXPECT_THROW(build_profile({ ConstantProfile{ 100, 60000 }, SpikeInjection{ 59999.5, 4000, 1.0 }, 45.0 }), config_error);
}

TEST(BuildProfile, SpikeEnergyIsSeparate) {
    const BuiltProfile s = build_profile({ ConstantProfile{ 100.0, 60000.0 }, SpikeInjection{ 30000.0, 4000.0, 1.0 }, 45.0 });
    EXPECT_DOUBLE_EQ(s.closed_form_energy_j, 6000.0);
    EXPECT_NEAR(s.spike_energy_j, 3.9, 1e-12);
    EXPECT_NEAR(s.profile.energy_j(), 6003.9, 1e-9);
    EXPECT_EQ(s.name, "constant+spike");
}

TEST(ParseProfile, Grammar) {
    const NamedProfile c = parse_profile("constant:100w:10s");
    EXPECT_DOUBLE_EQ(build_profile(c).closed_form_energy_j, 1000.0);
    const NamedProfile d = parse_profile("dmc-burst:250w:100w:1s:2s:15");
    EXPECT_DOUBLE_EQ(build_profile(d).closed_form_energy_j, 5250.0);
    const NamedProfile a = parse_profile("amr-evolution:100w:400w:10s:300w:20s");
    EXPECT_DOUBLE_EQ(build_profile(a).closed_form_energy_j, 8500.0);
    const NamedProfile s = parse_profile("constant:100w:60s+spike:4000w:30s:2ms");
    ASSERT_TRUE(s.spike);
    EXPECT_DOUBLE_EQ(s.spike->at_ms, 30000.0);
    EXPECT_DOUBLE_EQ(s.spike->width_ms, 2.0);
    EXPECT_DOUBLE_EQ(parse_profile("constant:50w:1500ms").spike ? 0.0 : build_profile(parse_profile("constant:50w:1500ms")).closed_form_energy_j, 75.0);
    for (const char *bad : { "square:1w", "constant:100:10s", "constant:100w:10", "dmc-burst:250w:100w:1s:2s:1.5", "constant:100w:10s+spike:1w", "constant:100w" }) {
        EXPECT_THROW(parse_profile(bad), config_error) << bad;
    }
}

TEST(IdealTrace, SamplesInstantaneousValues) {
    const BuiltProfile d = build_profile({ DmcBurstProfile{}, std::nullopt, 45.0 });
    const Trace t = ideal_trace(d.profile, 500.0);
    ASSERT_EQ(t.samples.size(), 61u);
    EXPECT_DOUBLE_EQ(t.samples[0].power_w, 250.0);
    EXPECT_DOUBLE_EQ(t.samples[2].power_w, 100.0);
    EXPECT_DOUBLE_EQ(t.samples[1].util_pct, 95.0);
    EXPECT_NO_THROW(validate(t));
}

TEST(Study, ConstantProfileHasNoError) {
    const StudyReport r = run_study({ ConstantProfile{ 100.0, 10000.0 }, std::nullopt, 45.0 }, { SensorModel::nvml(), SensorModel::rocm(1.0) }, { 1, 10, 100, 1000 });
    ASSERT_EQ(r.cells.size(), 8u);
    for (const auto &c : r.cells) {
        ASSERT_TRUE(c.error) << c.failure;
        EXPECT_NEAR(*c.error, 0.0, 1e-12);
    }
    EXPECT_EQ(r.cells[4].model_index, 1u);
    EXPECT_DOUBLE_EQ(r.cells[5].resolution_ms, 10.0);
}

TEST(Study, BurstWithinFivePercent) {
    const StudyReport r = run_study({ DmcBurstProfile{}, std::nullopt, 45.0 }, { SensorModel::nvml(), SensorModel::rocm(1.0) }, { 1, 10, 1000 });
    for (const auto &c : r.cells) {
        ASSERT_TRUE(c.error);
        EXPECT_LT(std::abs(*c.error), 0.05) << c.model.power_window_ms << " " << c.resolution_ms;
    }
    ASSERT_TRUE(r.spread_by_model[0]);
    EXPECT_LT(*r.spread_by_model[0], 0.05);
}

TEST(Study, SpikeIsAFalsePositive) {
    const StudyReport r = run_study({ ConstantProfile{ 100.0, 60000.0 }, SpikeInjection{ 30000.0, 4000.0, 1.0 }, 45.0 }, { SensorModel::rocm(1.0) }, { 1 });
    const StudyCell &c = r.cells.at(0);
    ASSERT_TRUE(c.error && c.filtered_error);
    EXPECT_NEAR(*c.energy_j - 6000.0, 3.9, 1e-6);
    EXPECT_GT(std::abs(*c.error), 100.0 * std::abs(*c.filtered_error));
}

TEST(Study, SeededAndOrderIndependent) {
    SensorModel noisy = SensorModel::nvml();
    noisy.noise_std_w = 4.0;
    const NamedProfile spec{ DmcBurstProfile{}, std::nullopt, 45.0 };
    StudyOptions par;
    par.seed = 77;
    StudyOptions ser = par;
    ser.parallel = false;
    const StudyReport a = run_study(spec, { noisy, SensorModel::rocm(10.0) }, { 10, 100 }, par);
    const StudyReport b = run_study(spec, { noisy, SensorModel::rocm(10.0) }, { 10, 100 }, ser);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        EXPECT_EQ(a.cells[i].trace, b.cells[i].trace);
        EXPECT_EQ(a.cells[i].energy_j, b.cells[i].energy_j);
    }
    StudyOptions other = par;
    other.seed = 78;
    const StudyReport c = run_study(spec, { noisy }, { 10 }, other);
    EXPECT_NE(c.cells[0].energy_j, a.cells[0].energy_j);
    EXPECT_THROW(run_study(spec, {}, { 10 }), config_error);
}

TEST(Study, PerCellFailureDoesNotStopStudy) {
    const StudyReport r = run_study({ ConstantProfile{ 100.0, 1000.0 }, std::nullopt, 45.0 }, { SensorModel::nvml() }, { 0.5, 100 });
    EXPECT_FALSE(r.cells[0].energy_j);
    EXPECT_FALSE(r.cells[0].failure.empty());
    EXPECT_TRUE(r.cells[1].energy_j);
}

TEST(Windowing, ConservesEnergyWithConstantPadding) {
    // burst pattern padded by 2 s of idle at each end, longer than the 1 s window
    std::vector<ProfileSegment> segs{
        { 0, 2000, Waveform::constant(80), Waveform::constant(0), Waveform::constant(40) },
        { 2000, 32000, Waveform::square(250, 100, 2000, 0.5), Waveform::constant(90), Waveform::constant(40) },
        { 32000, 34000, Waveform::constant(80), Waveform::constant(0), Waveform::constant(40) },
    };
    const GroundTruthProfile p{ segs };
    for (double w : { 1.0, 100.0, 1000.0 }) {
        SensorModel m = SensorModel::nvml();
        m.power_window_ms = w;
        // integral of the windowed signal over the span shifted by the window lag is exact
        double sum = 0.0;
        const double h = 1.0;
        for (double t = 0.0; t < p.duration_ms(); t += h) {
            sum += convolve_sensor(p, m, t + 0.5 * h) * h;
        }
        EXPECT_NEAR(sum / 1000.0, p.energy_j(), 0.001 * p.energy_j()) << w;
    }
}

TEST(Windowing, LongerWindowsSmoothMore) {
    const BuiltProfile d = build_profile({ DmcBurstProfile{}, std::nullopt, 45.0 });
    const double mean = d.closed_form_energy_j * 1000.0 / d.profile.duration_ms();
    double previous = 1e300;
    for (double w : { 1.0, 10.0, 100.0, 500.0, 1000.0, 2000.0 }) {
        SensorModel m = SensorModel::nvml();
        m.power_window_ms = w;
        double worst = 0.0;
        for (double t = 4000.0; t < 26000.0; t += 5.0) {
            worst = std::max(worst, std::abs(convolve_sensor(d.profile, m, t) - mean));
        }
        EXPECT_LE(worst, previous + 1e-9) << w;
        previous = worst;
    }
}
