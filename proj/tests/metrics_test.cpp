#include "etrace/metrics.hpp"

#include "gtest/gtest.h"

#include <random>

using namespace etrace;

namespace {

MetricReport report(std::string label, std::uint64_t walkers, double te) {
    MetricReport r;
    r.label = std::move(label);
    r.walkers = walkers;
    r.throughput_energy = te;
    return r;
}

}  // namespace

TEST(ThroughputEnergy, Examples) {
    EXPECT_DOUBLE_EQ(throughput_energy({ 1, 1, 1, 1.0 }), 1.0);
    EXPECT_DOUBLE_EQ(throughput_energy({ 200, 3, 5, 10.0 }), 2.0 * throughput_energy({ 100, 3, 5, 10.0 }));
    // 1500 walker-steps / 38.69 per kJ gives the DMC energy behind the H100 mixed-precision row
    const double dmc_kj = 1500.0 / 38.69;
    EXPECT_NEAR(dmc_kj, 38.77, 0.005);
    EXPECT_NEAR(throughput_energy({ 100, 3, 5, 38.77 }), 38.69, 0.01);
}

TEST(ThroughputEnergy, Errors) {
    EXPECT_THROW(throughput_energy({ 1, 1, 1, 0.0 }), domain_error);
    EXPECT_THROW(throughput_energy({ 1, 1, 1, -3.0 }), domain_error);
    EXPECT_THROW(throughput_energy({ 0, 1, 1, 1.0 }), domain_error);
    EXPECT_THROW(work_per_energy(5.0, 0.0), domain_error);
    EXPECT_DOUBLE_EQ(work_per_energy(5.0, 2.0), 2.5);
}

TEST(ThroughputEnergy, Monotonicity) {
    std::mt19937_64 rng{ 1 };
    std::uniform_int_distribution<std::uint64_t> n(1, 1000);
    std::uniform_real_distribution<double> e(0.1, 500.0);
    for (int i = 0; i < 200; ++i) {
        MetricInputs in{ n(rng), n(rng), n(rng), e(rng) };
        const double base = throughput_energy(in);
        MetricInputs more = in;
        more.dmc_energy_kj *= 1.01;
        EXPECT_LT(throughput_energy(more), base);
        more = in;
        ++more.walkers;
        EXPECT_GT(throughput_energy(more), base);
        more = in;
        ++more.blocks;
        EXPECT_GT(throughput_energy(more), base);
        more = in;
        ++more.steps;
        EXPECT_GT(throughput_energy(more), base);
    }
}

TEST(ThroughputEnergy, RankingIsScaleInvariant) {
    std::mt19937_64 rng{ 2 };
    std::uniform_real_distribution<double> e(1.0, 100.0);
    for (int i = 0; i < 100; ++i) {
        const MetricInputs a{ 100, 3, 5, e(rng) };
        const MetricInputs b{ 84, 3, 5, e(rng) };
        const double k = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
        const bool before = throughput_energy(a) < throughput_energy(b);
        const bool after = throughput_energy({ a.walkers, a.blocks, a.steps, a.dmc_energy_kj * k }) < throughput_energy({ b.walkers, b.blocks, b.steps, b.dmc_energy_kj * k });
        EXPECT_EQ(before, after);
    }
}

TEST(Savings, Examples) {
    const Savings s = savings_ratio(287.0, 368.0);
    EXPECT_NEAR(s.fraction, 0.780, 0.001);
    EXPECT_NEAR(s.savings, 0.22, 0.001);
    EXPECT_DOUBLE_EQ(savings_ratio(2200.0, 3200.0).fraction, 0.6875);
    EXPECT_DOUBLE_EQ(savings_ratio(5.0, 5.0).savings, 0.0);
    EXPECT_DOUBLE_EQ(savings_ratio(50.0, 100.0).savings, 0.5);
    EXPECT_DOUBLE_EQ(savings_ratio(150.0, 100.0).savings, -0.5);
    EXPECT_THROW(savings_ratio(1.0, 0.0), domain_error);
}

TEST(Savings, FractionTimesBaseline) {
    std::mt19937_64 rng{ 3 };
    std::uniform_real_distribution<double> e(1e-3, 1e6);
    for (int i = 0; i < 500; ++i) {
        const double a = e(rng);
        const double b = e(rng);
        EXPECT_NEAR(savings_ratio(a, b).fraction * b, a, 1e-12 * a);
    }
}

TEST(Compare, PaperRatios) {
    const Comparison c = compare_configurations({ report("H100-mixed", 100, 38.69), report("A100-mixed", 84, 25.25) });
    ASSERT_EQ(c.ratios.size(), 2u);
    // sorted by label: A100 first
    EXPECT_EQ(c.reports[0].label, "A100-mixed");
    EXPECT_EQ(c.ratios[1].a, "H100-mixed");
    EXPECT_NEAR(c.ratios[1].ratio, 1.53, 0.01);
    EXPECT_TRUE(c.savings.empty());

    const Comparison d = compare_configurations({ report("MI250X-mixed", 52, 9.12), report("A100-mixed", 52, 21.41) });
    EXPECT_NEAR(d.ratios[0].ratio, 2.35, 0.01);
    ASSERT_EQ(d.savings.size(), 2u);
    // A100 does the same work with 9.12/21.41 of the MI250X energy
    EXPECT_EQ(d.savings[0].candidate, "A100-mixed");
    EXPECT_NEAR(d.savings[0].savings.fraction, 9.12 / 21.41, 1e-12);
}

TEST(Compare, SelfComparisonAndErrors) {
    const Comparison c = compare_configurations({ report("x", 10, 4.0), report("x", 10, 4.0) });
    for (const auto &r : c.ratios) {
        EXPECT_DOUBLE_EQ(r.ratio, 1.0);
    }
    EXPECT_THROW(compare_configurations({ report("x", 1, 1.0) }), domain_error);
}

TEST(Compare, OrderDoesNotDependOnInput) {
    const std::vector<MetricReport> in{ report("b", 2, 3.0), report("a", 2, 1.5), report("c", 4, 2.0) };
    const std::vector<MetricReport> rev{ in.rbegin(), in.rend() };
    const Comparison x = compare_configurations(in);
    const Comparison y = compare_configurations(rev);
    ASSERT_EQ(x.ratios.size(), y.ratios.size());
    for (std::size_t i = 0; i < x.ratios.size(); ++i) {
        EXPECT_EQ(x.ratios[i].a, y.ratios[i].a);
        EXPECT_EQ(x.ratios[i].b, y.ratios[i].b);
        EXPECT_DOUBLE_EQ(x.ratios[i].ratio, y.ratios[i].ratio);
    }
}

TEST(MakeReport, FromRegionStats) {
    RegionStats dmc;
    dmc.energy_j = 38770.0;
    dmc.avg_power_w = 190.02;
    dmc.avg_util_pct = 96.0;
    dmc.duration_s = 204.0;
    const MetricReport r = make_report("H100-mixed", 100, 3, 5, dmc);
    EXPECT_NEAR(r.throughput_energy, 38.69, 0.01);
    EXPECT_DOUBLE_EQ(r.avg_power_w, 190.02);
    EXPECT_DOUBLE_EQ(r.avg_util_pct, 96.0);
}
