#pragma once

#include "etrace/error.hpp"
#include "etrace/trace_io.hpp"

#include "fmt/format.h"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace etrace {

inline constexpr std::string_view tool_version = "0.1.0";

using Fields = std::vector<std::pair<std::string, std::string>>;

/// One machine-readable line: `<section> key=value key=value ...`.
struct Record {
    std::string section;
    Fields fields;

    [[nodiscard]] std::optional<std::string> get(std::string_view key) const {
        for (const auto &[k, v] : fields) {
            if (k == key) {
                return v;
            }
        }
        return std::nullopt;
    }
};

struct Table {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// Output of analyze / compare / simulate. Holds nothing time- or host-dependent, so identical inputs
/// and seed render to identical bytes.
struct ReportDocument {
    std::string kind;
    Fields provenance;
    std::vector<Record> records;
    std::vector<Table> tables;

    void add(std::string section, Fields fields) { records.push_back({ std::move(section), std::move(fields) }); }
};

inline std::string num(double v, int decimals = 6) { return fmt::format("{:.{}f}", v, decimals); }

namespace detail {

inline std::string sanitize(std::string_view v) {
    std::string out{ v };
    std::replace_if(out.begin(), out.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }, '_');
    return out.empty() ? "-" : out;
}

}  // namespace detail

inline std::string render_records(const ReportDocument &doc) {
    std::string out = fmt::format("report kind={} version={}\n", doc.kind, tool_version);
    const auto line = [&](std::string_view section, const Fields &fields) {
        out += section;
        for (const auto &[k, v] : fields) {
            out += fmt::format(" {}={}", k, detail::sanitize(v));
        }
        out += '\n';
    };
    if (!doc.provenance.empty()) {
        line("provenance", doc.provenance);
    }
    for (const auto &r : doc.records) {
        line(r.section, r.fields);
    }
    return out;
}

inline std::vector<Record> parse_records(std::string_view text) {
    std::vector<Record> out;
    std::istringstream is{ std::string(text) };
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::istringstream ls{ raw };
        Record r;
        if (!(ls >> r.section)) {
            continue;
        }
        std::string tok;
        while (ls >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                throw parse_error{ fmt::format("record field '{}' lacks '='", tok), line_no };
            }
            r.fields.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// Aligned text; the first column is left-aligned, the rest right-aligned.
inline std::string render_table(const Table &t) {
    std::vector<std::size_t> width(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        width[c] = t.columns[c].size();
        for (const auto &row : t.rows) {
            width[c] = std::max(width[c], c < row.size() ? row[c].size() : 0);
        }
    }
    const auto emit = [&](const std::vector<std::string> &cells) {
        std::string line;
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string &cell = c < cells.size() ? cells[c] : std::string{};
            if (c > 0) {
                line += "  ";
            }
            line += c == 0 ? fmt::format("{:<{}}", cell, width[c]) : fmt::format("{:>{}}", cell, width[c]);
        }
        while (!line.empty() && line.back() == ' ') {
            line.pop_back();
        }
        return line + "\n";
    };
    std::string out;
    if (!t.title.empty()) {
        out += t.title + "\n";
    }
    out += emit(t.columns);
    std::size_t total = 0;
    for (auto w : width) {
        total += w;
    }
    out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
    for (const auto &row : t.rows) {
        out += emit(row);
    }
    return out;
}

inline std::string render_tables(const ReportDocument &doc) {
    std::string out;
    for (std::size_t i = 0; i < doc.tables.size(); ++i) {
        if (i > 0) {
            out += '\n';
        }
        out += render_table(doc.tables[i]);
    }
    return out;
}

/// 64-bit FNV-1a, hex. Used to fingerprint input files in report provenance.
inline std::string fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in{ path, std::ios::binary };
    if (!in) {
        throw io_error{ fmt::format("cannot open '{}'", path.string()) };
    }
    return { std::istreambuf_iterator<char>{ in }, std::istreambuf_iterator<char>{} };
}

inline void write_file(const std::filesystem::path &path, std::string_view content) {
    std::ofstream out{ path, std::ios::binary };
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw io_error{ fmt::format("cannot write '{}'", path.string()) };
    }
}

/// One two-column plot series, written as `<name>.dat` with whitespace-separated values.
struct PlotSeries {
    std::string name;
    std::string panel;
    std::string x_label;
    std::string y_label;
    std::vector<std::pair<double, double>> points;
};

/// Writes every series plus `manifest.txt` (one line per file: file, panel, x column, y column, points).
inline void write_plot_data(const std::filesystem::path &dir, const std::vector<PlotSeries> &series) {
    std::filesystem::create_directories(dir);
    std::string manifest = "# file panel x y points\n";
    for (const auto &s : series) {
        std::string body = fmt::format("# {} {}\n", s.x_label, s.y_label);
        for (const auto &[x, y] : s.points) {
            body += fmt::format("{:.3f} {:.6f}\n", x, y);
        }
        const std::string file = s.name + ".dat";
        write_file(dir / file, body);
        manifest += fmt::format("{} {} {} {} {}\n", file, s.panel, s.x_label, s.y_label, s.points.size());
    }
    write_file(dir / "manifest.txt", manifest);
}

}  // namespace etrace
