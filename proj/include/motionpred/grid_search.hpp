#pragma once

// Exhaustive parameter grids with repeated runs, failure accounting and
// per-parameter mean / minimum marginals.

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "motionpred/error.hpp"
#include "motionpred/parallel.hpp"

namespace motionpred {

struct GridAxis {
    std::string name;
    std::vector<double> values;
};

struct GridRow {
    std::vector<double> params;
    std::optional<double> value;  ///< mean over successful runs; empty when every run failed
    int n_runs = 1;
    int n_failed = 0;
};

struct MarginalEntry {
    double param = 0.0;
    double mean = 0.0;  ///< average over every valid row with this parameter value
    double min = 0.0;   ///< minimum over those rows
    int n_valid = 0;
};

struct Marginal {
    std::string name;
    std::vector<MarginalEntry> entries;  ///< ascending parameter value
};

struct GridTable {
    std::vector<std::string> names;
    std::vector<GridRow> rows;

    /// Row with the smallest value; ties go to the lexicographically smallest parameter tuple.
    std::optional<std::size_t> argmin() const {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!rows[i].value) continue;
            if (!best) {
                best = i;
                continue;
            }
            const auto& a = rows[i];
            const auto& b = rows[*best];
            if (*a.value < *b.value || (*a.value == *b.value && a.params < b.params)) best = i;
        }
        return best;
    }

    std::vector<Marginal> marginals() const {
        std::vector<Marginal> out;
        for (std::size_t a = 0; a < names.size(); ++a) {
            std::map<double, MarginalEntry> acc;
            for (const auto& row : rows) {
                auto& e = acc[row.params[a]];
                e.param = row.params[a];
                if (!row.value) continue;
                if (e.n_valid == 0) e.min = *row.value;
                e.min = std::min(e.min, *row.value);
                e.mean += *row.value;
                ++e.n_valid;
            }
            Marginal m{names[a], {}};
            for (auto& [param, e] : acc) {
                if (e.n_valid > 0) e.mean /= e.n_valid;
                else e.mean = e.min = std::numeric_limits<double>::quiet_NaN();
                m.entries.push_back(e);
            }
            out.push_back(std::move(m));
        }
        return out;
    }
};

/// Cartesian product, first axis varying slowest.
inline std::vector<std::vector<double>> cartesian(const std::vector<GridAxis>& axes) {
    std::vector<std::vector<double>> out{{}};
    for (const auto& axis : axes) {
        require(!axis.values.empty(), "grid axis '" + axis.name + "' has no values");
        std::vector<std::vector<double>> next;
        for (const auto& prefix : out)
            for (double v : axis.values) {
                auto t = prefix;
                t.push_back(v);
                next.push_back(std::move(t));
            }
        out = std::move(next);
    }
    return out;
}

/// Evaluates eval(params, run) for every tuple and run index. A run that
/// returns std::nullopt counts as failed; the row value averages the rest.
template <class Eval>
GridTable run_grid(const std::vector<GridAxis>& axes, int n_runs, Eval&& eval, int threads = 1) {
    require(!axes.empty(), "grid search needs at least one axis");
    require(n_runs >= 1, "grid search needs n_runs >= 1");
    GridTable table;
    for (const auto& a : axes) table.names.push_back(a.name);
    const auto tuples = cartesian(axes);
    std::vector<std::optional<double>> results(tuples.size() * static_cast<std::size_t>(n_runs));
    parallel_for(results.size(), threads, [&](std::size_t job) {
        const std::size_t t = job / static_cast<std::size_t>(n_runs);
        const int run = static_cast<int>(job % static_cast<std::size_t>(n_runs));
        results[job] = eval(tuples[t], run);
    });
    for (std::size_t t = 0; t < tuples.size(); ++t) {
        GridRow row{tuples[t], std::nullopt, n_runs, 0};
        double sum = 0.0;
        int ok = 0;
        for (int run = 0; run < n_runs; ++run) {
            const auto& r = results[t * static_cast<std::size_t>(n_runs) + static_cast<std::size_t>(run)];
            if (r) {
                sum += *r;
                ++ok;
            } else {
                ++row.n_failed;
            }
        }
        if (ok > 0) row.value = sum / ok;
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace motionpred
