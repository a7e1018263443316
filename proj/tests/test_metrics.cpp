#include <gtest/gtest.h>

#include "eval_examples.hpp"
#include "support.hpp"

using namespace motionpred;

class EvalExampleTest : public ::testing::TestWithParam<std::size_t> {};

TEST_P(EvalExampleTest, Holds) {
    static const auto examples = mp_test::eval_examples();
    const auto& ex = examples.at(GetParam());
    const std::string msg = ex.check();
    EXPECT_TRUE(msg.empty()) << ex.name << ": " << msg;
}

INSTANTIATE_TEST_SUITE_P(Eval, EvalExampleTest, ::testing::Range<std::size_t>(0, mp_test::eval_examples().size()));

TEST(Metrics, ShapeMismatchRejected) {
    EXPECT_THROW(mae(Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(2, 3)), ConfigError);
    EXPECT_THROW(rmse(Eigen::MatrixXd::Zero(3, 4), Eigen::MatrixXd::Zero(3, 4)), ConfigError);
}

TEST(Metrics, AggregateWithSingleRunHasNoInterval) {
    const auto r = aggregate_runs("x", {evaluate_series("x", Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(3, 3))});
    EXPECT_TRUE(r.valid);
    EXPECT_FALSE(r.ci_rms.has_value());
    EXPECT_FALSE(aggregate_runs("x", {}).valid);
}

TEST(Report, JsonAndCsvLayout) {
    std::vector<MetricsReport> rows{evaluate_series("a", Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(3, 3)),
                                    aggregate_runs("b", {})};
    rows[0].step_ms = 1.5;
    const auto dir = mp_test::scratch_dir("report");
    write_report_json(rows, dir / "m.json");
    write_report_csv(rows, dir / "m.csv", false);
    std::ifstream jin(dir / "m.json");
    const auto j = nlohmann::json::parse(jin);
    ASSERT_EQ(j.size(), 2u);
    EXPECT_EQ(j[0]["name"], "a");
    EXPECT_DOUBLE_EQ(j[0]["step_ms"].get<double>(), 1.5);
    EXPECT_TRUE(j[1]["e_rms"].is_null());
    EXPECT_TRUE(j[0]["ci_rms"].is_null());
    std::ifstream cin(dir / "m.csv");
    std::string header, first, second;
    std::getline(cin, header);
    std::getline(cin, first);
    std::getline(cin, second);
    EXPECT_EQ(header, "name,valid,e_max,e_rms,e_nrms,jitter,e_mae,ci_max_lo,ci_max_hi,ci_rms_lo,ci_rms_hi,n_runs_used,cross_corr");
    EXPECT_EQ(second.rfind("b,0,nan", 0), 0u);
}
