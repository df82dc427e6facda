#pragma once

#include "etrace/error.hpp"
#include "etrace/trace.hpp"

#include "fmt/format.h"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

// Canonical trace file:
//
//   #device=H100
//   #tdp_w=400
//   ...                       one `#key=value` line per metadata entry
//   t_ms,power_w,temp_c,util_pct
//   0.000,100.000,45.0,50.0
//
// Metadata is written in a fixed order (required keys first, then the remaining keys sorted) and
// data rows use fixed decimals, so equal traces always serialize to identical bytes.

namespace etrace {

inline constexpr std::string_view trace_csv_header = "t_ms,power_w,temp_c,util_pct";
inline constexpr std::string_view region_csv_header = "name,start_ms,end_ms";

namespace detail {

inline std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) {
            return out;
        }
        pos = next + 1;
    }
}

inline std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

inline double parse_double(std::string_view s, std::string_view what, std::size_t line) {
    if (auto v = to_double(s)) {
        return *v;
    }
    throw parse_error{ fmt::format("cannot parse {} from '{}'", what, trim(s)), line };
}

inline std::string format_optional(const std::optional<double> &v) {
    return v ? fmt::format("{}", *v) : std::string{};
}

}  // namespace detail

/// Serializes `trace` in the canonical CSV format. Throws validation_error for an invalid trace
/// and io_error when the sink fails.
inline void write_trace(const Trace &trace, std::ostream &out) {
    validate(trace);
    std::string buf;
    auto meta = [&](std::string_view key, std::string_view value) { buf += fmt::format("#{}={}\n", key, value); };
    meta("device", trace.device.name);
    meta("resolution_ms", fmt::format("{}", trace.resolution_ms));
    meta("proc_start_ms", trace.marks ? fmt::format("{}", trace.marks->proc_start_ms) : "");
    meta("proc_end_ms", trace.marks ? fmt::format("{}", trace.marks->proc_end_ms) : "");
    meta("label", trace.label);
    meta("tdp_w", fmt::format("{}", trace.device.tdp_w));
    meta("memory_gb", fmt::format("{}", trace.device.memory_gb));
    meta("bandwidth_gbps", detail::format_optional(trace.device.bandwidth_gbps));
    meta("pre_pad_ms", detail::format_optional(trace.pre_pad_ms));
    for (const auto &[key, value] : trace.extra) {
        meta(key, value);
    }
    buf += trace_csv_header;
    buf += '\n';
    for (const Sample &s : trace.samples) {
        buf += fmt::format("{:.3f},{:.3f},{:.1f},{:.1f}\n", s.t_ms, s.power_w, s.temp_c, s.util_pct);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) {
        throw io_error{ "failed to write trace" };
    }
}

inline std::string to_csv(const Trace &trace) {
    std::ostringstream os;
    write_trace(trace, os);
    return os.str();
}

/// Parses a canonical trace. Unknown metadata keys land in Trace::extra.
inline Trace read_trace(std::istream &in) {
    Trace trace;
    std::map<std::string, std::pair<std::string, std::size_t>> meta;
    std::vector<std::size_t> sample_lines;
    bool header_seen = false;
    std::size_t line_no = 0;
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            if (header_seen) {
                throw parse_error{ "metadata line after the column header", line_no };
            }
            const std::string_view body = line.substr(1);
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) {
                continue;  // plain comment
            }
            meta[std::string(detail::trim(body.substr(0, eq)))] = { std::string(detail::trim(body.substr(eq + 1))), line_no };
            continue;
        }
        if (!header_seen) {
            if (line != trace_csv_header) {
                throw parse_error{ fmt::format("expected column header '{}'", trace_csv_header), line_no };
            }
            header_seen = true;
            continue;
        }
        const auto fields = detail::split(line, ',');
        if (fields.size() != 4) {
            throw parse_error{ fmt::format("expected 4 fields, found {}", fields.size()), line_no };
        }
        Sample s;
        s.t_ms = detail::parse_double(fields[0], "t_ms", line_no);
        s.power_w = detail::parse_double(fields[1], "power_w", line_no);
        s.temp_c = detail::parse_double(fields[2], "temp_c", line_no);
        s.util_pct = detail::parse_double(fields[3], "util_pct", line_no);
        trace.samples.push_back(s);
        sample_lines.push_back(line_no);
    }
    if (in.bad()) {
        throw io_error{ "failed to read trace" };
    }
    if (!header_seen) {
        throw parse_error{ "missing column header", line_no };
    }

    const auto take = [&](const std::string &key, bool required) -> std::optional<std::pair<std::string, std::size_t>> {
        auto it = meta.find(key);
        if (it == meta.end()) {
            if (required) {
                throw parse_error{ fmt::format("missing required metadata key '{}'", key), 0 };
            }
            return std::nullopt;
        }
        auto v = it->second;
        meta.erase(it);
        return v;
    };
    const auto number = [&](const std::string &key, bool required) -> std::optional<double> {
        auto v = take(key, required);
        if (!v || v->first.empty()) {
            return std::nullopt;
        }
        return detail::parse_double(v->first, key, v->second);
    };

    const auto device = take("device", true);
    const auto resolution = take("resolution_ms", true);
    trace.resolution_ms = detail::parse_double(resolution->first, "resolution_ms", resolution->second);
    const std::size_t marks_line = meta.count("proc_end_ms") ? meta.at("proc_end_ms").second : 0;
    const auto start = number("proc_start_ms", true);
    const auto end = number("proc_end_ms", true);
    if (start.has_value() != end.has_value()) {
        throw parse_error{ "proc_start_ms and proc_end_ms must both be set or both empty", marks_line };
    }
    if (start) {
        trace.marks = Marks{ *start, *end };
    }
    trace.label = take("label", true)->first;
    trace.pre_pad_ms = number("pre_pad_ms", false);

    const auto tdp = number("tdp_w", false);
    if (auto ref = devices::find(device->first); ref && !tdp) {
        trace.device = *ref;
        trace.device.name = device->first;
    } else if (tdp) {
        trace.device.name = device->first;
        trace.device.tdp_w = *tdp;
    } else {
        throw validation_error{ fmt::format("unknown device '{}' without a tdp_w entry", device->first), device->second };
    }
    if (auto mem = number("memory_gb", false)) {
        trace.device.memory_gb = *mem;
    }
    if (meta.count("bandwidth_gbps")) {
        trace.device.bandwidth_gbps = number("bandwidth_gbps", false);
    }
    for (auto &[key, value] : meta) {
        trace.extra.emplace(key, value.first);
    }

    validate(trace, &sample_lines, marks_line);
    return trace;
}

inline Trace from_csv(std::string_view text) {
    std::istringstream is{ std::string(text) };
    return read_trace(is);
}

inline Trace read_trace_file(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ fmt::format("cannot open trace file '{}'", path.string()) };
    }
    return read_trace(in);
}

inline void write_trace_file(const Trace &trace, const std::filesystem::path &path) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw io_error{ fmt::format("cannot create trace file '{}'", path.string()) };
    }
    write_trace(trace, out);
}

/// Region file rows: `name,start_ms,end_ms`.
inline std::vector<Region> read_regions(std::istream &in) {
    std::vector<Region> regions;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header_seen) {
            if (line != region_csv_header) {
                throw parse_error{ fmt::format("expected region header '{}'", region_csv_header), line_no };
            }
            header_seen = true;
            continue;
        }
        const auto fields = detail::split(line, ',');
        if (fields.size() != 3) {
            throw parse_error{ fmt::format("expected 3 fields, found {}", fields.size()), line_no };
        }
        Region r;
        r.name = std::string(detail::trim(fields[0]));
        r.start_ms = detail::parse_double(fields[1], "start_ms", line_no);
        r.end_ms = detail::parse_double(fields[2], "end_ms", line_no);
        if (r.name.empty()) {
            throw parse_error{ "empty region name", line_no };
        }
        if (!(r.start_ms < r.end_ms)) {
            throw validation_error{ fmt::format("region '{}' has start {} not before end {}", r.name, r.start_ms, r.end_ms), line_no };
        }
        if (!regions.empty() && r.start_ms < regions.back().end_ms) {
            throw validation_error{ fmt::format("region '{}' overlaps or precedes '{}'", r.name, regions.back().name), line_no };
        }
        regions.push_back(std::move(r));
    }
    if (!header_seen) {
        throw parse_error{ "missing region header", line_no };
    }
    return regions;
}

inline std::vector<Region> read_regions_file(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw io_error{ fmt::format("cannot open region file '{}'", path.string()) };
    }
    return read_regions(in);
}

inline void write_regions(const std::vector<Region> &regions, std::ostream &out) {
    std::string buf{ region_csv_header };
    buf += '\n';
    for (const Region &r : regions) {
        buf += fmt::format("{},{:.3f},{:.3f}\n", r.name, r.start_ms, r.end_ms);
    }
    out << buf;
    if (!out) {
        throw io_error{ "failed to write regions" };
    }
}

}  // namespace etrace
