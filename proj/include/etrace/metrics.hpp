#pragma once

#include "etrace/error.hpp"
#include "etrace/trace.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

namespace etrace {

/// Work counts of a DMC run and the energy of its DMC region.
struct MetricInputs {
    std::uint64_t walkers{ 1 };
    std::uint64_t blocks{ 1 };
    std::uint64_t steps{ 1 };
    double dmc_energy_kj{};
};

/// Generic science-per-energy: work units per kilojoule.
inline double work_per_energy(double work_units, double energy_kj) {
    if (!(energy_kj > 0.0)) {
        throw domain_error{ fmt::format("energy must be positive, got {} kJ", energy_kj) };
    }
    if (!(work_units > 0.0)) {
        throw domain_error{ fmt::format("work must be positive, got {}", work_units) };
    }
    return work_units / energy_kj;
}

/// walkers × blocks × steps per kJ of DMC energy.
inline double throughput_energy(const MetricInputs &in) {
    if (in.walkers < 1 || in.blocks < 1 || in.steps < 1) {
        throw domain_error{ "walkers, blocks and steps must all be at least 1" };
    }
    const auto work = static_cast<double>(in.walkers) * static_cast<double>(in.blocks) * static_cast<double>(in.steps);
    return work_per_energy(work, in.dmc_energy_kj);
}

struct Savings {
    /// candidate / baseline
    double fraction{};
    /// 1 − fraction; negative means the candidate used more.
    double savings{};
};

inline Savings savings_ratio(double candidate, double baseline) {
    if (!(baseline > 0.0)) {
        throw domain_error{ fmt::format("baseline must be positive, got {}", baseline) };
    }
    const double f = candidate / baseline;
    return { f, 1.0 - f };
}

struct MetricReport {
    std::string label;
    double throughput_energy{};  // 1/kJ
    double avg_power_w{};
    double avg_util_pct{};
    std::uint64_t walkers{};
    /// The walker count is the largest that fits the device for this configuration.
    bool max_walkers{ false };
};

/// Builds a report from the work counts and the statistics of the region that holds the DMC phase.
inline MetricReport make_report(std::string label, std::uint64_t walkers, std::uint64_t blocks, std::uint64_t steps, const RegionStats &dmc) {
    MetricReport r;
    r.label = std::move(label);
    r.walkers = walkers;
    r.throughput_energy = throughput_energy({ walkers, blocks, steps, dmc.energy_j / 1000.0 });
    r.avg_power_w = dmc.avg_power_w;
    r.avg_util_pct = dmc.avg_util_pct;
    return r;
}

inline double throughput_ratio(const MetricReport &a, const MetricReport &b) {
    if (!(b.throughput_energy > 0.0)) {
        throw domain_error{ fmt::format("'{}' has non-positive throughput energy", b.label) };
    }
    return a.throughput_energy / b.throughput_energy;
}

struct RatioEntry {
    std::string a;
    std::uint64_t a_walkers{};
    std::string b;
    std::uint64_t b_walkers{};
    double ratio{};  // throughput_energy(a) / throughput_energy(b)
};

struct SavingsEntry {
    std::string candidate;
    std::string baseline;
    std::uint64_t walkers{};
    /// Same work, so energy(candidate) / energy(baseline) = throughput(baseline) / throughput(candidate).
    Savings savings;
};

struct Comparison {
    std::vector<MetricReport> reports;  // sorted by (label, walkers)
    std::vector<RatioEntry> ratios;
    std::vector<SavingsEntry> savings;
};

/// Pairwise throughput ratios for every ordered pair, plus energy savings for pairs with matching walker
/// counts. Output order is fixed by (label, walkers).
inline Comparison compare_configurations(std::vector<MetricReport> reports) {
    if (reports.size() < 2) {
        throw domain_error{ "comparison needs at least two reports" };
    }
    std::stable_sort(reports.begin(), reports.end(), [](const MetricReport &x, const MetricReport &y) { return std::tie(x.label, x.walkers) < std::tie(y.label, y.walkers); });
    Comparison c;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (std::size_t j = 0; j < reports.size(); ++j) {
            if (i == j) {
                continue;
            }
            const MetricReport &a = reports[i];
            const MetricReport &b = reports[j];
            c.ratios.push_back({ a.label, a.walkers, b.label, b.walkers, throughput_ratio(a, b) });
            if (a.walkers == b.walkers && a.label != b.label) {
                c.savings.push_back({ a.label, b.label, a.walkers, savings_ratio(b.throughput_energy, a.throughput_energy) });
            }
        }
    }
    c.reports = std::move(reports);
    return c;
}

}  // namespace etrace
