#include <cmath>
#include <limits>
#include <map>

#include <gtest/gtest.h>

#include "motionpred/csv_io.hpp"
#include "motionpred/grid_search.hpp"
#include "support.hpp"

using namespace motionpred;

namespace {

/// Deterministic pseudo-error with scripted failures.
std::optional<double> scripted(const std::vector<double>& t, int run) {
    if (t[0] == 3.0) return std::nullopt;                       // always fails
    if (t[0] == 2.0 && t[1] == 10.0 && run < 2) return std::nullopt;  // two failures
    return t[0] * 1.5 + std::sin(t[1]) + 0.01 * run;
}

}  // namespace

TEST(Cartesian, FirstAxisSlowest) {
    const auto t = cartesian({{"a", {1, 2}}, {"b", {10, 20, 30}}});
    ASSERT_EQ(t.size(), 6u);
    EXPECT_EQ(t[0], (std::vector<double>{1, 10}));
    EXPECT_EQ(t[2], (std::vector<double>{1, 30}));
    EXPECT_EQ(t[3], (std::vector<double>{2, 10}));
    EXPECT_THROW(cartesian({{"a", {}}}), ConfigError);
}

TEST(RunGrid, FailedRunsExcludedFromMean) {
    const auto table = run_grid({{"a", {1, 2, 3}}, {"b", {10, 20}}}, 10, scripted);
    for (const auto& row : table.rows) {
        if (row.params[0] == 3.0) {
            EXPECT_FALSE(row.value);
            EXPECT_EQ(row.n_failed, 10);
            continue;
        }
        const int failed = (row.params[0] == 2.0 && row.params[1] == 10.0) ? 2 : 0;
        EXPECT_EQ(row.n_failed, failed);
        double s = 0;
        for (int run = failed; run < 10; ++run) s += *scripted(row.params, run);
        EXPECT_NEAR(*row.value, s / (10 - failed), 1e-15);
    }
}

TEST(RunGrid, ThreadCountDoesNotChangeTable) {
    const std::vector<GridAxis> axes{{"a", {1, 2, 3}}, {"b", {10, 20, 30, 40}}};
    const auto a = run_grid(axes, 5, scripted, 1);
    const auto b = run_grid(axes, 5, scripted, 4);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].params, b.rows[i].params);
        EXPECT_EQ(a.rows[i].value, b.rows[i].value);
    }
}

TEST(Marginals, RecomputedFromRawTable) {
    const auto table = run_grid({{"a", {1, 2, 3}}, {"b", {10, 20, 30}}, {"c", {0.5, 0.25}}}, 3,
                                [](const std::vector<double>& t, int run) -> std::optional<double> {
                                    if (t[2] == 0.25 && t[1] == 20 && run == 1) return std::nullopt;
                                    if (t[0] == 2 && t[1] == 30) return std::nullopt;
                                    return t[0] * t[2] + t[1] / 7.0 + run;
                                });
    const auto margs = table.marginals();
    ASSERT_EQ(margs.size(), 3u);
    for (std::size_t a = 0; a < 3; ++a) {
        std::map<double, std::vector<double>> by;
        for (const auto& row : table.rows)
            if (row.value) by[row.params[a]].push_back(*row.value);
        ASSERT_EQ(margs[a].entries.size(), by.size());
        for (const auto& e : margs[a].entries) {
            const auto& v = by.at(e.param);
            double s = 0, m = std::numeric_limits<double>::infinity();
            for (double x : v) {
                s += x;
                m = std::min(m, x);
            }
            EXPECT_EQ(e.n_valid, int(v.size()));
            EXPECT_DOUBLE_EQ(e.mean, s / double(v.size()));
            EXPECT_EQ(e.min, m);
        }
    }
}

TEST(Argmin, TiesBrokenLexicographically) {
    GridTable t;
    t.names = {"a", "b"};
    t.rows = {{{2, 1}, 1.0, 1, 0}, {{1, 5}, 1.0, 1, 0}, {{1, 2}, std::nullopt, 1, 1}, {{3, 0}, 2.0, 1, 0}};
    EXPECT_EQ(t.argmin().value(), 1u);
    t.rows[1].value.reset();
    EXPECT_EQ(t.argmin().value(), 0u);
    for (auto& r : t.rows) r.value.reset();
    EXPECT_FALSE(t.argmin());
}

TEST(GridCsv, RoundTripWithInvalidRows) {
    const auto dir = mp_test::scratch_dir("grid_csv");
    const auto table = run_grid({{"theta", {0.5, 1}}, {"q", {10, 20}}}, 4, [](const std::vector<double>& t, int run) -> std::optional<double> {
        if (t[1] == 20 && t[0] == 1) return std::nullopt;
        return t[0] + t[1] + run;
    });
    write_grid_table(table, dir / "g.csv", "mae_mm", true);
    const auto back = read_grid_table(dir / "g.csv", "mae_mm");
    EXPECT_EQ(back.names, table.names);
    ASSERT_EQ(back.rows.size(), table.rows.size());
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        EXPECT_EQ(back.rows[i].params, table.rows[i].params);
        EXPECT_EQ(back.rows[i].value, table.rows[i].value);
        EXPECT_EQ(back.rows[i].n_failed, table.rows[i].n_failed);
    }
    std::ifstream in(dir / "g.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "theta,q,mae_mm,n_failed");
}
