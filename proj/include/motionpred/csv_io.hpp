#pragma once

// Plain CSV tables for trajectories, predictions and grid-search results.
// Frame and marker indices are 1-based in every file.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motionpred/error.hpp"
#include "motionpred/grid_search.hpp"
#include "motionpred/tracking.hpp"

namespace motionpred {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

/// Header plus numeric rows. Every row must have the header's width.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name, const std::filesystem::path& where) const {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name) return c;
        throw IoError(where.string() + ": missing column '" + name + "'");
    }
};

inline double parse_cell(const std::string& s, const std::filesystem::path& where, std::size_t line) {
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw IoError(where.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
}

inline CsvTable read_csv(const std::filesystem::path& path, const std::map<std::string, std::map<std::string, double>>& labels = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto lab = labels.find(t.header[c]);
            if (lab != labels.end()) {
                const auto v = lab->second.find(cells[c]);
                if (v == lab->second.end())
                    throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad " + t.header[c] + " '" + cells[c] + "'");
                row[c] = v->second;
            } else {
                row[c] = parse_cell(cells[c], path, lineno);
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw IoError(path.string() + ": empty file");
    return t;
}

inline int as_index(double v, const std::filesystem::path& where) {
    if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) throw IoError(where.string() + ": bad index " + std::to_string(v));
    return static_cast<int>(v);
}

}  // namespace detail

inline void write_trajectories(const TrajectorySet& ts, const std::filesystem::path& path) {
    ts.validate();
    auto out = detail::open_out(path);
    out << "t_index,marker,ux_mm,uy_mm,uz_mm\n";
    for (int n = 0; n < ts.n_frames(); ++n)
        for (int p = 0; p < ts.r; ++p) {
            const Vec3 u = ts.displacement(n, p);
            out << n + 1 << ',' << p + 1 << ',' << u.x << ',' << u.y << ',' << u.z << '\n';
        }
    if (!out) throw IoError("write failed: " + path.string());
}

/// Every (t_index, marker) pair for t_index 1..N and marker 1..r must appear exactly once.
inline TrajectorySet read_trajectories(const std::filesystem::path& path) {
    const auto t = detail::read_csv(path);
    const std::size_t ct = t.column("t_index", path), cm = t.column("marker", path);
    const std::size_t cx = t.column("ux_mm", path), cy = t.column("uy_mm", path), cz = t.column("uz_mm", path);
    int N = 0, r = 0;
    for (const auto& row : t.rows) {
        N = std::max(N, detail::as_index(row[ct], path));
        r = std::max(r, detail::as_index(row[cm], path));
    }
    if (N == 0) throw IoError(path.string() + ": no trajectory rows");
    if (t.rows.size() != static_cast<std::size_t>(N) * static_cast<std::size_t>(r))
        throw IoError(path.string() + ": expected " + std::to_string(N * r) + " rows for " + std::to_string(N) +
                      " frames and " + std::to_string(r) + " markers");
    TrajectorySet ts;
    ts.r = r;
    ts.series = Eigen::MatrixXd::Constant(N, 3 * r, std::numeric_limits<double>::quiet_NaN());
    for (const auto& row : t.rows) {
        const int n = static_cast<int>(row[ct]) - 1, p = static_cast<int>(row[cm]) - 1;
        if (!std::isnan(ts.series(n, 3 * p))) throw IoError(path.string() + ": duplicate row for frame " + std::to_string(n + 1));
        ts.series(n, 3 * p) = row[cx];
        ts.series(n, 3 * p + 1) = row[cy];
        ts.series(n, 3 * p + 2) = row[cz];
    }
    if (!ts.series.allFinite()) throw IoError(path.string() + ": non-finite trajectory value");
    return ts;
}

/// Rows [begin, end) that hold a prediction, one line per marker and axis.
inline void write_predictions(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred, const std::filesystem::path& path,
                              int begin = 0, int end = -1) {
    require(truth.rows() == pred.rows() && truth.cols() == pred.cols(), "write_predictions: shape mismatch");
    if (end < 0) end = static_cast<int>(truth.rows());
    auto out = detail::open_out(path);
    out << "t_index,marker,axis,y_pred_mm,y_true_mm\n";
    static const char* axes = "xyz";
    for (int n = begin; n < end; ++n) {
        if (pred.row(n).hasNaN()) continue;
        for (Eigen::Index c = 0; c < pred.cols(); ++c)
            out << n + 1 << ',' << c / 3 + 1 << ',' << axes[c % 3] << ',' << pred(n, c) << ',' << truth(n, c) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

struct PredictionTable {
    std::vector<int> t_index;  ///< 1-based frame of each row
    Eigen::MatrixXd pred, truth;  ///< one row per frame, 3r columns
};

inline PredictionTable read_predictions(const std::filesystem::path& path) {
    const auto t = detail::read_csv(path, {{"axis", {{"x", 0.0}, {"y", 1.0}, {"z", 2.0}}}});
    const std::size_t ct = t.column("t_index", path), cm = t.column("marker", path), ca = t.column("axis", path);
    const std::size_t cp = t.column("y_pred_mm", path), cy = t.column("y_true_mm", path);
    std::map<int, std::size_t> frames;
    int r = 0;
    for (const auto& row : t.rows) {
        frames.emplace(detail::as_index(row[ct], path), 0);
        r = std::max(r, detail::as_index(row[cm], path));
    }
    PredictionTable pt;
    for (auto& [k, slot] : frames) {
        slot = pt.t_index.size();
        pt.t_index.push_back(k);
    }
    const auto nan = std::numeric_limits<double>::quiet_NaN();
    pt.pred = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(frames.size()), 3 * r, nan);
    pt.truth = pt.pred;
    for (const auto& row : t.rows) {
        const auto n = static_cast<Eigen::Index>(frames.at(static_cast<int>(row[ct])));
        const auto c = 3 * (static_cast<Eigen::Index>(row[cm]) - 1) + static_cast<Eigen::Index>(row[ca]);
        pt.pred(n, c) = row[cp];
        pt.truth(n, c) = row[cy];
    }
    if (pt.pred.hasNaN()) throw IoError(path.string() + ": some frames lack a prediction for every marker and axis");
    return pt;
}

/// Parameters, then the value column, then n_failed when requested. Invalid rows print "nan".
inline void write_grid_table(const GridTable& table, const std::filesystem::path& path, const std::string& value_name,
                             bool with_failed) {
    auto out = detail::open_out(path);
    for (const auto& n : table.names) out << n << ',';
    out << value_name;
    if (with_failed) out << ",n_failed";
    out << '\n';
    for (const auto& row : table.rows) {
        for (double p : row.params) out << p << ',';
        if (row.value) out << *row.value;
        else out << "nan";
        if (with_failed) out << ',' << row.n_failed;
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

/// Inverse of write_grid_table; n_runs is not stored and reads back as 0.
inline GridTable read_grid_table(const std::filesystem::path& path, const std::string& value_name) {
    const auto t = detail::read_csv(path);
    const std::size_t cv = t.column(value_name, path);
    std::optional<std::size_t> cf;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (t.header[c] == "n_failed") cf = c;
    GridTable g;
    g.names.assign(t.header.begin(), t.header.begin() + static_cast<std::ptrdiff_t>(cv));
    for (const auto& row : t.rows) {
        GridRow gr;
        gr.params.assign(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(cv));
        if (!std::isnan(row[cv])) gr.value = row[cv];
        gr.n_runs = 0;
        gr.n_failed = cf ? static_cast<int>(row[*cf]) : 0;
        g.rows.push_back(std::move(gr));
    }
    return g;
}

}  // namespace motionpred
