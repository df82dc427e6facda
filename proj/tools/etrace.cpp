// etrace: capture GPU telemetry traces alongside an application and turn them into energy reports.
//
//   etrace trace    --backend synthetic --profile constant:100w:10s --duration-ms 10000 --out run.csv
//   etrace analyze  --trace run.csv [--regions phases.csv] [--filter clamp+median3]
//   etrace compare  --input label=mixed,energy_kj=287 --input label=double,energy_kj=368
//   etrace simulate --profile dmc-burst:250w:100w:1s:2s:15 --windows-ms 1,1000 --resolutions-ms 1,10,1000
//
// Exit codes: 0 success, 2 input error, 3 missing capability, 4 child launch failure, otherwise the child's status.

#include "etrace/etrace.hpp"

#include "CLI11.hpp"
#include "fmt/format.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace etrace;

namespace {

constexpr int exit_input = 2;
constexpr int exit_capability = 3;
constexpr int exit_launch = 4;

class usage_error : public etrace::error {
  public:
    using error::error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t> &flag) {
    if (flag) {
        return *flag;
    }
    if (const char *env = std::getenv("ETRACE_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception &) {
            throw usage_error{ fmt::format("ETRACE_SEED='{}' is not an unsigned integer", env) };
        }
    }
    return 0;
}

DeviceSpec resolve_device(const std::string &name, const std::optional<double> &tdp) {
    auto d = devices::find(name);
    if (!d) {
        if (!tdp) {
            throw usage_error{ fmt::format("unknown device '{}'; pass --tdp", name) };
        }
        d = DeviceSpec{ name, *tdp, 0.0, std::nullopt };
    } else if (tdp) {
        d->tdp_w = *tdp;
    }
    return *d;
}

FilterConfig parse_filter(const std::string &mode, const std::optional<double> &ceiling) {
    FilterConfig f;
    f.ceiling_w = ceiling;
    if (mode == "none") {
        f.mode = FilterMode::none;
    } else if (mode == "clamp") {
        f.mode = FilterMode::clamp;
    } else if (mode == "median3") {
        f.mode = FilterMode::median3;
    } else if (mode == "clamp+median3") {
        f.mode = FilterMode::clamp_median3;
    } else {
        throw usage_error{ fmt::format("unknown filter '{}' (none, clamp, median3, clamp+median3)", mode) };
    }
    return f;
}

void emit(const ReportDocument &doc, const std::string &format, const std::string &report_path) {
    const std::string records = render_records(doc);
    if (!report_path.empty()) {
        write_file(report_path, records);
    }
    std::cout << (format == "records" ? records : render_tables(doc));
}

// ---------------------------------------------------------------------------------------------- trace

struct TraceOptions {
    std::string backend;
    std::optional<double> resolution_ms;
    double pre_pad_ms{ 15000.0 };
    double post_pad_ms{ 10000.0 };
    std::string device{ "H100" };
    int device_index{ 0 };
    std::optional<double> tdp;
    std::string out;
    std::string in;
    std::string profile;
    std::string sensor{ "nvml" };
    std::optional<double> window_ms;
    std::optional<double> util_period_ms;
    double noise_w{ 0.0 };
    double quantization_w{ 0.0 };
    std::optional<std::uint64_t> seed;
    std::optional<double> duration_ms;
    std::string label;
    std::vector<std::string> env;
    std::string clock{ "auto" };
    std::vector<std::string> command;
};

int cmd_trace(const TraceOptions &o) {
    SamplerConfig cfg;
    cfg.pre_pad_ms = o.pre_pad_ms;
    cfg.post_pad_ms = o.post_pad_ms;
    cfg.command = o.command;
    cfg.duration_ms = o.duration_ms;
    cfg.device = resolve_device(o.device, o.tdp);
    cfg.label = o.label.empty() ? o.backend : o.label;
    for (const auto &kv : o.env) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw usage_error{ fmt::format("--env expects KEY=VALUE, got '{}'", kv) };
        }
        cfg.env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (cfg.command.empty() == !cfg.duration_ms.has_value()) {
        throw usage_error{ "give either --duration-ms or a command after --" };
    }

    bool use_virtual = false;
    if (o.clock == "virtual") {
        if (!cfg.command.empty()) {
            throw usage_error{ "a real command cannot run on the virtual clock" };
        }
        use_virtual = true;
    } else if (o.clock == "auto") {
        use_virtual = cfg.command.empty() && (o.backend == "synthetic" || o.backend == "replay");
    } else if (o.clock != "wall") {
        throw usage_error{ fmt::format("unknown clock '{}' (auto, virtual, wall)", o.clock) };
    }
    std::unique_ptr<Clock> clock;
    if (use_virtual) {
        clock = std::make_unique<VirtualClock>();
    } else {
        clock = std::make_unique<SteadyClock>();
    }

    std::unique_ptr<Backend> backend;
    double resolution = o.resolution_ms.value_or(100.0);
    if (o.backend == "replay") {
        if (o.in.empty()) {
            throw usage_error{ "--backend replay needs --in" };
        }
        Trace fixture = read_trace_file(o.in);
        resolution = o.resolution_ms.value_or(fixture.resolution_ms);
        if (!o.tdp && o.device == "H100") {
            cfg.device = fixture.device;
        }
        backend = std::make_unique<ReplayBackend>(std::move(fixture), *clock);
    } else if (o.backend == "synthetic") {
        if (o.profile.empty()) {
            throw usage_error{ "--backend synthetic needs --profile" };
        }
        const BuiltProfile built = build_profile(parse_profile(o.profile));
        SensorModel model = o.sensor == "rocm" ? SensorModel::rocm(resolution) : SensorModel::nvml();
        if (o.sensor != "nvml" && o.sensor != "rocm") {
            throw usage_error{ fmt::format("unknown sensor '{}' (nvml, rocm)", o.sensor) };
        }
        if (o.window_ms) {
            model.power_window_ms = *o.window_ms;
        }
        if (o.util_period_ms) {
            model.util_sample_period_ms = *o.util_period_ms;
        }
        model.noise_std_w = o.noise_w;
        model.quantization_w = o.quantization_w;
        backend = std::make_unique<SyntheticBackend>(built.profile, model, *clock, resolve_seed(o.seed));
    } else if (o.backend == "nvml" || o.backend == "rocm") {
        backend = open_live_backend(o.backend == "nvml" ? VendorKind::nvml : VendorKind::rocm, o.device_index, *clock);
    } else {
        throw usage_error{ fmt::format("unknown backend '{}'", o.backend) };
    }
    cfg.resolution_ms = resolution;

    TraceRun run = run_trace(cfg, *backend, *clock);
    write_trace_file(run.trace, o.out);
    std::cerr << fmt::format("etrace: wrote {} samples to {} (dropped {}{})\n", run.trace.samples.size(), o.out, run.dropped, run.degraded ? ", degraded" : "");
    if (run.launch_error) {
        std::cerr << "etrace: " << *run.launch_error << "\n";
        return exit_launch;
    }
    return run.exit_status.value_or(0);
}

// -------------------------------------------------------------------------------------------- analyze

struct AnalyzeOptions {
    std::string trace;
    std::string regions;
    std::string filter{ "clamp+median3" };
    std::optional<double> tdp;
    bool split_plateaus{ false };
    double idle_threshold{ 10.0 };
    std::string report;
    std::string plot_dir;
    std::string format{ "table" };
};

Fields stats_fields(const RegionStats &st) {
    return { { "energy_j", num(st.energy_j) }, { "avg_power_w", num(st.avg_power_w) }, { "avg_util_pct", num(st.avg_util_pct) }, { "duration_s", num(st.duration_s) } };
}

std::vector<std::string> stats_row(const std::string &name, double start_ms, double end_ms, const RegionStats &st) {
    return { name, num(start_ms / 1000.0, 3), num(end_ms / 1000.0, 3), num(st.energy_j, 2), num(st.avg_power_w, 2), num(st.avg_util_pct, 2) };
}

int cmd_analyze(const AnalyzeOptions &o) {
    Trace trace = read_trace_file(o.trace);
    if (o.tdp) {
        trace.device.tdp_w = *o.tdp;
    }
    const FilterConfig filter = parse_filter(o.filter, std::nullopt);
    const FilteredTrace filtered = filter_spikes(trace, filter);

    ReportDocument doc;
    doc.kind = "analyze";
    doc.provenance = { { "trace", fs::path(o.trace).filename().string() }, { "trace_fnv1a64", fnv1a64(read_file(o.trace)) }, { "filter", o.filter } };
    if (!o.regions.empty()) {
        doc.provenance.emplace_back("regions", fs::path(o.regions).filename().string());
        doc.provenance.emplace_back("regions_fnv1a64", fnv1a64(read_file(o.regions)));
    }

    Table table{ fmt::format("{} ({}, {:g} ms, filter {})", trace.label, trace.device.name, trace.resolution_ms, o.filter), { "Region", "Start (s)", "End (s)", "Energy (J)", "Power (W)", "GPU (%)" }, {} };

    const Region whole{ "total", trace.start_ms(), trace.end_ms(), {} };
    const RegionStats total = region_stats(trace, whole, filter);
    Fields tf = stats_fields(total);
    tf.emplace_back("samples", std::to_string(trace.samples.size()));
    tf.emplace_back("filtered", std::to_string(filtered.filtered_count));
    tf.emplace_back("unfiltered_energy_j", num(integrate_energy(trace).energy_j));
    doc.add("total", tf);
    table.rows.push_back(stats_row("total", whole.start_ms, whole.end_ms, total));

    if (trace.marks && trace.marks->proc_start_ms < trace.marks->proc_end_ms) {
        const Region proc{ "process", trace.marks->proc_start_ms, trace.marks->proc_end_ms, {} };
        const RegionStats st = region_stats(trace, proc, filter);
        Fields f{ { "start_ms", num(proc.start_ms, 3) }, { "end_ms", num(proc.end_ms, 3) } };
        for (auto &kv : stats_fields(st)) {
            f.push_back(kv);
        }
        doc.add("process", f);
        table.rows.push_back(stats_row("process", proc.start_ms, proc.end_ms, st));
    }

    std::vector<Region> regions;
    if (!o.regions.empty()) {
        regions = read_regions_file(o.regions);
    } else {
        SegmentationPolicy policy;
        policy.split_plateaus = o.split_plateaus;
        policy.idle_threshold_pct = o.idle_threshold;
        regions = segment_regions(trace, policy);
    }
    for (Region &r : regions) {
        r.stats = region_stats(trace, r, filter);
        Fields f{ { "name", r.name }, { "start_ms", num(r.start_ms, 3) }, { "end_ms", num(r.end_ms, 3) } };
        for (auto &kv : stats_fields(r.stats)) {
            f.push_back(kv);
        }
        doc.add("region", f);
        table.rows.push_back(stats_row(r.name, r.start_ms, r.end_ms, r.stats));
    }
    doc.tables.push_back(std::move(table));

    if (!o.plot_dir.empty()) {
        std::vector<PlotSeries> series{
            { "power", "power", "t_ms", "power_w", {} },
            { "energy", "energy", "t_ms", "energy_j", cumulative_energy(filtered.trace) },
            { "utilization", "utilization", "t_ms", "util_pct", {} },
            { "temperature", "temperature", "t_ms", "temp_c", {} },
        };
        for (const Sample &s : filtered.trace.samples) {
            series[0].points.emplace_back(s.t_ms, s.power_w);
            series[2].points.emplace_back(s.t_ms, s.util_pct);
            series[3].points.emplace_back(s.t_ms, s.temp_c);
        }
        write_plot_data(o.plot_dir, series);
        doc.add("plot", { { "manifest", "manifest.txt" }, { "series", "4" } });
    }
    emit(doc, o.format, o.report);
    return 0;
}

// -------------------------------------------------------------------------------------------- compare

struct CompareOptions {
    std::vector<std::string> inputs;
    std::string filter{ "clamp+median3" };
    std::string report;
    std::string format{ "table" };
};

struct CompareInput {
    std::string label;
    double energy_j{};
    std::optional<double> avg_power_w;
    std::optional<double> avg_util_pct;
    std::optional<std::uint64_t> walkers, blocks, steps;
    bool max_walkers{ false };
};

CompareInput load_input(const std::string &spec, const FilterConfig &filter, Fields &provenance) {
    std::map<std::string, std::string> kv;
    for (auto part : detail::split(spec, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) {
            throw usage_error{ fmt::format("--input field '{}' is not key=value", part) };
        }
        kv[std::string(detail::trim(part.substr(0, eq)))] = std::string(detail::trim(part.substr(eq + 1)));
    }
    const auto number = [&](const char *key) -> std::optional<double> {
        auto it = kv.find(key);
        if (it == kv.end()) {
            return std::nullopt;
        }
        auto v = detail::to_double(it->second);
        if (!v) {
            throw usage_error{ fmt::format("--input {}='{}' is not a number", key, it->second) };
        }
        return v;
    };
    const auto count = [&](const char *key) -> std::optional<std::uint64_t> {
        auto v = number(key);
        if (!v) {
            return std::nullopt;
        }
        if (*v < 1 || std::floor(*v) != *v) {
            throw usage_error{ fmt::format("--input {} must be a positive integer", key) };
        }
        return static_cast<std::uint64_t>(*v);
    };

    CompareInput in;
    if (!kv.count("label")) {
        throw usage_error{ fmt::format("--input '{}' lacks label=", spec) };
    }
    in.label = kv["label"];
    in.walkers = count("walkers");
    in.blocks = count("blocks");
    in.steps = count("steps");
    in.max_walkers = kv.count("max") && kv["max"] == "1";
    in.avg_power_w = number("power_w");
    in.avg_util_pct = number("util_pct");

    if (auto kj = number("energy_kj")) {
        in.energy_j = *kj * 1000.0;
    } else if (auto j = number("energy_j")) {
        in.energy_j = *j;
    } else if (kv.count("trace")) {
        const std::string path = kv["trace"];
        const Trace trace = read_trace_file(path);
        provenance.emplace_back(in.label + ".trace_fnv1a64", fnv1a64(read_file(path)));
        Region region{ "total", trace.start_ms(), trace.end_ms(), {} };
        if (kv.count("region")) {
            if (!kv.count("regions")) {
                throw usage_error{ fmt::format("--input {}: region= needs regions=", in.label) };
            }
            bool found = false;
            for (const Region &r : read_regions_file(kv["regions"])) {
                if (r.name == kv["region"]) {
                    region = r;
                    found = true;
                }
            }
            if (!found) {
                throw usage_error{ fmt::format("region '{}' not in {}", kv["region"], kv["regions"]) };
            }
        } else if (trace.marks && trace.marks->proc_start_ms < trace.marks->proc_end_ms) {
            region = { "process", trace.marks->proc_start_ms, trace.marks->proc_end_ms, {} };
        }
        const RegionStats st = region_stats(trace, region, filter);
        in.energy_j = st.energy_j;
        in.avg_power_w = in.avg_power_w.value_or(st.avg_power_w);
        in.avg_util_pct = in.avg_util_pct.value_or(st.avg_util_pct);
    } else if (kv.count("report")) {
        const std::string path = kv["report"];
        const std::string text = read_file(path);
        provenance.emplace_back(in.label + ".report_fnv1a64", fnv1a64(text));
        const auto want = kv.count("region") ? kv["region"] : std::string{};
        std::optional<Record> hit;
        for (const Record &r : parse_records(text)) {
            if ((want.empty() && r.section == "total") || (!want.empty() && r.section == "region" && r.get("name") == want)) {
                hit = r;
            }
        }
        if (!hit) {
            throw usage_error{ fmt::format("report {} has no {} record", path, want.empty() ? "total" : "region " + want) };
        }
        const auto field = [&](const char *key) {
            auto v = hit->get(key);
            auto d = v ? detail::to_double(*v) : std::nullopt;
            if (!d) {
                throw parse_error{ fmt::format("report {} record lacks numeric {}", path, key), 0 };
            }
            return *d;
        };
        in.energy_j = field("energy_j");
        in.avg_power_w = in.avg_power_w.value_or(field("avg_power_w"));
        in.avg_util_pct = in.avg_util_pct.value_or(field("avg_util_pct"));
    } else {
        throw usage_error{ fmt::format("--input {} needs one of energy_kj=, energy_j=, trace=, report=", in.label) };
    }
    if (!(in.energy_j > 0.0)) {
        throw usage_error{ fmt::format("--input {} has non-positive energy", in.label) };
    }
    return in;
}

int cmd_compare(const CompareOptions &o) {
    if (o.inputs.size() < 2) {
        throw usage_error{ "compare needs at least two --input entries" };
    }
    const FilterConfig filter = parse_filter(o.filter, std::nullopt);
    ReportDocument doc;
    doc.kind = "compare";
    std::vector<CompareInput> inputs;
    for (const auto &spec : o.inputs) {
        inputs.push_back(load_input(spec, filter, doc.provenance));
    }
    const bool with_metric = std::all_of(inputs.begin(), inputs.end(), [](const CompareInput &i) { return i.walkers && i.blocks && i.steps; });

    const auto opt_num = [](const std::optional<double> &v) { return v ? num(*v) : std::string{ "-" }; };
    const auto opt_cell = [](const std::optional<double> &v) { return v ? num(*v, 2) : std::string{ "-" }; };
    std::vector<MetricReport> reports;
    for (const auto &in : inputs) {
        Fields f{ { "label", in.label }, { "energy_j", num(in.energy_j) }, { "avg_power_w", opt_num(in.avg_power_w) }, { "avg_util_pct", opt_num(in.avg_util_pct) } };
        if (with_metric) {
            MetricReport r;
            r.label = in.label;
            r.walkers = *in.walkers;
            r.max_walkers = in.max_walkers;
            r.throughput_energy = throughput_energy({ *in.walkers, *in.blocks, *in.steps, in.energy_j / 1000.0 });
            r.avg_power_w = in.avg_power_w.value_or(0.0);
            r.avg_util_pct = in.avg_util_pct.value_or(0.0);
            f.emplace_back("walkers", std::to_string(*in.walkers));
            f.emplace_back("blocks", std::to_string(*in.blocks));
            f.emplace_back("steps", std::to_string(*in.steps));
            f.emplace_back("throughput_energy_per_kj", num(r.throughput_energy));
            reports.push_back(r);
        }
        doc.add("input", f);
    }

    // energy savings for every ordered pair, in label order
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return inputs[a].label < inputs[b].label; });
    for (std::size_t i : order) {
        for (std::size_t j : order) {
            if (i == j) {
                continue;
            }
            const Savings s = savings_ratio(inputs[i].energy_j, inputs[j].energy_j);
            doc.add("savings", { { "candidate", inputs[i].label }, { "baseline", inputs[j].label }, { "fraction", num(s.fraction) }, { "savings_pct", num(100.0 * s.savings) } });
        }
    }

    if (with_metric) {
        const Comparison c = compare_configurations(reports);
        for (const auto &r : c.ratios) {
            doc.add("ratio", { { "a", r.a }, { "a_walkers", std::to_string(r.a_walkers) }, { "b", r.b }, { "b_walkers", std::to_string(r.b_walkers) }, { "value", num(r.ratio) } });
        }
        for (const auto &s : c.savings) {
            doc.add("matched_savings", { { "candidate", s.candidate }, { "baseline", s.baseline }, { "walkers", std::to_string(s.walkers) }, { "fraction", num(s.savings.fraction) }, { "savings_pct", num(100.0 * s.savings.savings) } });
        }
        Table t{ "Energy metrics", { "Configuration", "Walkers", "Throughput Energy (1/kJ)", "Power (W)", "GPU (%)" }, {} };
        for (const auto &r : reports) {
            t.rows.push_back({ r.label, fmt::format("{}{}", r.max_walkers ? "*" : "", r.walkers), num(r.throughput_energy, 2), num(r.avg_power_w, 2), num(r.avg_util_pct, 2) });
        }
        doc.tables.push_back(std::move(t));
    } else {
        Table t{ "Energy", { "Configuration", "Energy (kJ)", "Power (W)", "GPU (%)" }, {} };
        for (const auto &in : inputs) {
            t.rows.push_back({ in.label, num(in.energy_j / 1000.0, 2), opt_cell(in.avg_power_w), opt_cell(in.avg_util_pct) });
        }
        doc.tables.push_back(std::move(t));
    }
    Table st{ "Savings (candidate vs baseline)", { "Candidate", "Baseline", "Fraction", "Savings (%)" }, {} };
    for (const Record &r : doc.records) {
        if (r.section == "savings") {
            const double f = *detail::to_double(*r.get("fraction"));
            st.rows.push_back({ *r.get("candidate"), *r.get("baseline"), num(f, 3), num(100.0 * (1.0 - f), 2) });
        }
    }
    doc.tables.push_back(std::move(st));
    emit(doc, o.format, o.report);
    return 0;
}

// ------------------------------------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string profile;
    std::vector<double> windows_ms{ 1000.0 };
    std::vector<double> resolutions_ms{ 1.0, 10.0, 100.0, 1000.0 };
    std::optional<std::uint64_t> seed;
    double util_period_ms{ 500.0 };
    double noise_w{ 0.0 };
    std::string device{ "H100" };
    std::optional<double> tdp;
    std::string report;
    std::string plot_dir;
    std::string format{ "table" };
};

int cmd_simulate(const SimulateOptions &o) {
    const NamedProfile spec = parse_profile(o.profile);
    std::vector<SensorModel> models;
    for (double w : o.windows_ms) {
        SensorModel m{ w, o.util_period_ms, o.noise_w, 0.0 };
        m.validate();
        models.push_back(m);
    }
    StudyOptions opt;
    opt.seed = resolve_seed(o.seed);
    opt.device = resolve_device(o.device, o.tdp);
    const StudyReport study = run_study(spec, models, o.resolutions_ms, opt);

    ReportDocument doc;
    doc.kind = "simulate";
    doc.provenance = { { "profile", o.profile }, { "seed", std::to_string(opt.seed) }, { "device", opt.device.name } };
    doc.add("profile", { { "name", study.profile.name }, { "duration_ms", num(study.profile.profile.duration_ms(), 3) }, { "closed_form_energy_j", num(study.profile.closed_form_energy_j) }, { "spike_energy_j", num(study.profile.spike_energy_j) } });

    Table t{ fmt::format("{}: closed-form energy {:.2f} J", study.profile.name, study.profile.closed_form_energy_j), { "Window (ms)", "Resolution (ms)", "Samples", "Energy (J)", "Error (%)", "Filtered (J)", "Filtered error (%)" }, {} };
    std::vector<PlotSeries> series;
    for (const StudyCell &c : study.cells) {
        Fields f{ { "window_ms", fmt::format("{:g}", c.model.power_window_ms) }, { "resolution_ms", fmt::format("{:g}", c.resolution_ms) } };
        if (!c.failure.empty()) {
            f.emplace_back("failure", c.failure);
            doc.add("cell", f);
            t.rows.push_back({ fmt::format("{:g}", c.model.power_window_ms), fmt::format("{:g}", c.resolution_ms), "-", "failed", "-", "-", "-" });
            continue;
        }
        f.emplace_back("samples", std::to_string(c.samples));
        f.emplace_back("energy_j", num(*c.energy_j));
        f.emplace_back("error_pct", num(100.0 * *c.error));
        f.emplace_back("filtered_energy_j", num(*c.filtered_energy_j));
        f.emplace_back("filtered_error_pct", num(100.0 * *c.filtered_error));
        doc.add("cell", f);
        t.rows.push_back({ fmt::format("{:g}", c.model.power_window_ms), fmt::format("{:g}", c.resolution_ms), std::to_string(c.samples), num(*c.energy_j, 2), num(100.0 * *c.error, 3), num(*c.filtered_energy_j, 2), num(100.0 * *c.filtered_error, 3) });
        PlotSeries s{ fmt::format("cell_w{:g}_r{:g}", c.model.power_window_ms, c.resolution_ms), "power", "t_ms", "power_w", {} };
        for (const Sample &x : c.trace.samples) {
            s.points.emplace_back(x.t_ms, x.power_w);
        }
        series.push_back(std::move(s));
    }
    for (std::size_t m = 0; m < models.size(); ++m) {
        const auto &sp = study.spread_by_model[m];
        doc.add("spread", { { "window_ms", fmt::format("{:g}", models[m].power_window_ms) }, { "value_pct", sp ? num(100.0 * *sp) : "-" } });
    }
    doc.tables.push_back(std::move(t));
    if (!o.plot_dir.empty()) {
        write_plot_data(o.plot_dir, series);
        doc.add("plot", { { "manifest", "manifest.txt" }, { "series", std::to_string(series.size()) } });
    }
    emit(doc, o.format, o.report);
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{ "GPU energy tracing and analysis" };
    app.require_subcommand(1);

    TraceOptions to;
    auto *trace = app.add_subcommand("trace", "sample a backend alongside a command or for a fixed duration");
    trace->add_option("--backend", to.backend, "replay | synthetic | nvml | rocm")->required();
    trace->add_option("--resolution-ms", to.resolution_ms, "sampling period (default 100; replay: the fixture's)");
    trace->add_option("--pre-pad-ms", to.pre_pad_ms, "sampling before the command starts")->capture_default_str();
    trace->add_option("--post-pad-ms", to.post_pad_ms, "sampling after the command exits")->capture_default_str();
    trace->add_option("--device", to.device, "device name (A100, H100, MI250X or custom with --tdp)")->capture_default_str();
    trace->add_option("--device-index", to.device_index, "vendor device index for live backends");
    trace->add_option("--tdp", to.tdp, "device TDP in watts");
    trace->add_option("--out", to.out, "trace file to write")->required();
    trace->add_option("--in", to.in, "fixture for the replay backend");
    trace->add_option("--profile", to.profile, "ground-truth profile for the synthetic backend");
    trace->add_option("--sensor", to.sensor, "synthetic sensor semantics: nvml | rocm")->capture_default_str();
    trace->add_option("--window-ms", to.window_ms, "override the sensor power averaging window");
    trace->add_option("--util-period-ms", to.util_period_ms, "override the utilization sample period");
    trace->add_option("--noise-w", to.noise_w, "Gaussian sensor noise (std, W)");
    trace->add_option("--quantization-w", to.quantization_w, "sensor quantization step (W)");
    trace->add_option("--seed", to.seed, "noise seed (default $ETRACE_SEED or 0)");
    trace->add_option("--duration-ms", to.duration_ms, "trace for a fixed duration instead of a command");
    trace->add_option("--label", to.label, "run label stored in the trace");
    trace->add_option("--env", to.env, "KEY=VALUE added to the command's environment")->take_all()->allow_extra_args(false);
    trace->add_option("--clock", to.clock, "auto | virtual | wall")->capture_default_str();
    trace->add_option("command", to.command, "command to run, after --");

    AnalyzeOptions ao;
    auto *analyze = app.add_subcommand("analyze", "energy, power and utilization per region of a trace");
    analyze->add_option("--trace", ao.trace, "canonical trace file")->required();
    analyze->add_option("--regions", ao.regions, "region file (name,start_ms,end_ms); default: automatic segmentation");
    analyze->add_option("--filter", ao.filter, "none | clamp | median3 | clamp+median3")->capture_default_str();
    analyze->add_option("--tdp", ao.tdp, "override the trace's device TDP (sets the clamp ceiling)");
    analyze->add_flag("--split-plateaus", ao.split_plateaus, "split automatic regions at power-level changes");
    analyze->add_option("--idle-threshold", ao.idle_threshold, "utilization (%) separating idle from active")->capture_default_str();
    analyze->add_option("--report", ao.report, "write machine-readable records here");
    analyze->add_option("--plot-dir", ao.plot_dir, "write plot-ready series here");
    analyze->add_option("--format", ao.format, "stdout format: table | records")->capture_default_str();

    CompareOptions co;
    auto *compare = app.add_subcommand("compare", "savings and throughput-per-energy across configurations");
    compare->add_option("--input", co.inputs, "label=..,(energy_kj=..|energy_j=..|trace=..[,regions=..,region=..]|report=..[,region=..])[,walkers=..,blocks=..,steps=..,power_w=..,util_pct=..,max=1]")->take_all()->allow_extra_args(false);
    compare->add_option("--filter", co.filter, "filter for trace inputs")->capture_default_str();
    compare->add_option("--report", co.report, "write machine-readable records here");
    compare->add_option("--format", co.format, "stdout format: table | records")->capture_default_str();

    SimulateOptions so;
    auto *simulate = app.add_subcommand("simulate", "sensor-window and resolution study on a synthetic profile");
    simulate->add_option("--profile", so.profile, "profile spec")->required();
    simulate->add_option("--windows-ms", so.windows_ms, "sensor power windows")->delimiter(',');
    simulate->add_option("--resolutions-ms", so.resolutions_ms, "sampling resolutions")->delimiter(',');
    simulate->add_option("--seed", so.seed, "seed (default $ETRACE_SEED or 0)");
    simulate->add_option("--util-period-ms", so.util_period_ms, "utilization sample period")->capture_default_str();
    simulate->add_option("--noise-w", so.noise_w, "Gaussian sensor noise (std, W)");
    simulate->add_option("--device", so.device, "device for the filter ceiling")->capture_default_str();
    simulate->add_option("--tdp", so.tdp, "device TDP in watts");
    simulate->add_option("--report", so.report, "write machine-readable records here");
    simulate->add_option("--plot-dir", so.plot_dir, "write one plot series per cell here");
    simulate->add_option("--format", so.format, "stdout format: table | records")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return exit_input;
    }

    try {
        if (*trace) {
            return cmd_trace(to);
        }
        if (*analyze) {
            return cmd_analyze(ao);
        }
        if (*compare) {
            return cmd_compare(co);
        }
        return cmd_simulate(so);
    } catch (const capability_error &e) {
        std::cerr << "etrace: " << e.what() << "\n";
        return exit_capability;
    } catch (const etrace::error &e) {
        std::cerr << "etrace: " << e.what() << "\n";
        return exit_input;
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "etrace: " << e.what() << "\n";
        return exit_input;
    }
}
