#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fedclip/errors.hpp"
#include "fedclip/trajectory.hpp"

namespace fedclip {

/// 17 significant digits: enough to round-trip any double exactly.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr std::string_view kTrajectoryHeader =
    "round,loss,grad_norm,clipped,max_discrepancy,elapsed_ms";

/// Fixed column order and formats, LF line endings. elapsed_ms is written as
/// 0.000 unless `with_timing`; the default keeps the bytes identical across
/// repeated runs and worker-thread counts.
inline std::string trajectory_to_csv(const Trajectory& traj, bool with_timing = false) {
    std::string out(kTrajectoryHeader);
    out += "\n";
    char ms[40];
    for (const auto& row : traj.rows) {
        std::snprintf(ms, sizeof ms, "%.3f", with_timing ? row.elapsed_ms : 0.0);
        out += std::to_string(row.round);
        out += ",";
        out += format_g17(row.loss);
        out += ",";
        out += format_g17(row.grad_norm);
        out += ",";
        out += row.clipped ? "1" : "0";
        out += ",";
        out += format_g17(row.max_discrepancy);
        out += ",";
        out += ms;
        out += "\n";
    }
    return out;
}

/// FNV-1a 64-bit, hex. Used to fingerprint trajectory CSV bytes in summaries.
inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// One plottable series per label: (round, loss, grad_norm) triples.
struct SeriesData {
    std::vector<double> rounds;
    std::vector<double> loss;
    std::vector<double> grad_norm;
};

using PlotData = std::map<std::string, SeriesData>;

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_number(const std::string& cell, std::size_t line_no, const std::string& src) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw IoError(src + ":" + std::to_string(line_no) + ": bad numeric value '" + cell + "'");
    }
}

} // namespace detail

/// Parses a trajectory CSV or a compare-merged CSV (same columns preceded by
/// `label,algorithm`). Any other header is a structured error; an empty body
/// is an error as well.
inline PlotData parse_plot_csv(const std::string& content, const std::string& source_name) {
    std::stringstream ss(content);
    std::string line;
    if (!std::getline(ss, line)) throw IoError(source_name + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    bool merged;
    if (line == kTrajectoryHeader) {
        merged = false;
    } else if (line == std::string("label,algorithm,") + std::string(kTrajectoryHeader)) {
        merged = true;
    } else {
        throw IoError(source_name + ": unknown columns '" + line + "'");
    }

    PlotData data;
    std::size_t line_no = 1;
    while (std::getline(ss, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        const std::size_t expected = merged ? 8 : 6;
        if (cells.size() != expected)
            throw IoError(source_name + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(expected) + " columns, got " + std::to_string(cells.size()));
        const std::string label = merged ? cells[0] : "trajectory";
        const std::size_t off = merged ? 2 : 0;
        SeriesData& series = data[label];
        series.rounds.push_back(detail::parse_number(cells[off + 0], line_no, source_name));
        series.loss.push_back(detail::parse_number(cells[off + 1], line_no, source_name));
        series.grad_norm.push_back(detail::parse_number(cells[off + 2], line_no, source_name));
    }
    if (data.empty()) throw IoError(source_name + ": no data rows");
    return data;
}

} // namespace fedclip
