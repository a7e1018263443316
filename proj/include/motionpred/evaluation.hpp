#pragma once

// Prediction reports and the predictor comparison table.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "motionpred/csv_io.hpp"
#include "motionpred/metrics.hpp"
#include "motionpred/parallel.hpp"
#include "motionpred/predictors.hpp"

namespace motionpred {

struct MetricsReport {
    std::string name;
    bool valid = true;
    double e_max = 0, e_rms = 0, e_nrms = 0, jitter = 0, e_mae = 0;
    std::optional<IntervalEstimate> ci_max, ci_rms, ci_mae, ci_jitter;
    int n_runs_used = 1;
    double step_ms = 0;
    std::optional<double> cross_corr;
    bool rank_deficient = false;
};

/// Single-run metrics of `pred` against `truth` (same rows).
inline MetricsReport evaluate_series(const std::string& name, const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    MetricsReport r;
    r.name = name;
    r.e_max = max_error(truth, pred);
    r.e_rms = rmse(truth, pred);
    r.e_nrms = nrmse(truth, pred);
    r.jitter = jitter(pred);
    r.e_mae = mae(truth, pred);
    return r;
}

/// Mean of per-run reports, with 95% intervals when at least two runs succeeded.
inline MetricsReport aggregate_runs(const std::string& name, const std::vector<MetricsReport>& runs) {
    MetricsReport r;
    r.name = name;
    r.n_runs_used = static_cast<int>(runs.size());
    if (runs.empty()) {
        r.valid = false;
        return r;
    }
    std::vector<double> mx, rm, nr, ji, ma, st;
    for (const auto& x : runs) {
        mx.push_back(x.e_max);
        rm.push_back(x.e_rms);
        nr.push_back(x.e_nrms);
        ji.push_back(x.jitter);
        ma.push_back(x.e_mae);
        st.push_back(x.step_ms);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    r.e_max = mean(mx);
    r.e_rms = mean(rm);
    r.e_nrms = mean(nr);
    r.jitter = mean(ji);
    r.e_mae = mean(ma);
    r.step_ms = mean(st);
    if (runs.size() >= 2) {
        r.ci_max = confidence_interval(mx);
        r.ci_rms = confidence_interval(rm);
        r.ci_mae = confidence_interval(ma);
        r.ci_jitter = confidence_interval(ji);
    }
    return r;
}

struct ComparisonConfig {
    RnnConfig rnn;
    int n_runs = 10;
    int lms_L = 10;
    double lms_eta = 0.01;
    int linear_L = 10;
};

inline MetricsReport evaluate_result(const std::string& name, const TrajectorySet& ts, const PredictionResult& res,
                                     const SplitSpec& split) {
    require(split.test_begin() >= res.first_row, name + ": test split starts before the first prediction");
    const auto truth = ts.series.middleRows(split.test_begin(), split.n_test);
    const auto pred = res.pred.middleRows(split.test_begin(), split.n_test);
    MetricsReport r = evaluate_series(name, truth, pred);
    r.step_ms = 1e3 * res.mean_step_seconds;
    r.rank_deficient = res.rank_deficient;
    return r;
}

/// Rows rnn, linear, lms, no_prediction on the test split of one series.
/// RNN rows average `n_runs` seeded runs; runs that fail numerically are dropped.
inline std::vector<MetricsReport> compare_predictors(const TrajectorySet& ts, const ComparisonConfig& cfg,
                                                     const SplitSpec& split, int threads = 1) {
    ts.validate();
    split.validate(ts.n_frames());
    require(cfg.n_runs >= 1, "compare_predictors: n_runs must be >= 1");
    RnnConfig base = cfg.rnn;
    base.r = ts.r;

    std::vector<std::optional<MetricsReport>> runs(static_cast<std::size_t>(cfg.n_runs));
    parallel_for(runs.size(), threads, [&](std::size_t k) {
        RnnConfig c = base;
        c.seed = run_seed(base.seed, static_cast<int>(k));
        try {
            runs[k] = evaluate_result("rnn", ts, run_online(ts, c, split), split);
        } catch (const NumericalFailure&) {
        }
    });
    std::vector<MetricsReport> ok;
    for (auto& r : runs)
        if (r) ok.push_back(*r);

    std::vector<MetricsReport> table;
    table.push_back(aggregate_runs("rnn", ok));
    table.push_back(evaluate_result("linear", ts, linear_predict(ts, cfg.linear_L, split), split));
    table.push_back(evaluate_result("lms", ts, lms_run(ts, cfg.lms_L, cfg.lms_eta, split), split));
    table.push_back(evaluate_result("no_prediction", ts, no_prediction(ts), split));
    return table;
}

/// Step times vary between runs; `with_timing = false` leaves them out.
inline nlohmann::json to_json(const MetricsReport& r, bool with_timing = true) {
    auto ci = [](const std::optional<IntervalEstimate>& e) -> nlohmann::json {
        if (!e) return nullptr;
        return {{"mean", e->mean}, {"stddev", e->stddev}, {"lo", e->ci.lo}, {"hi", e->ci.hi}, {"n", e->n}};
    };
    nlohmann::json j = {{"name", r.name},       {"valid", r.valid},       {"e_max", r.e_max},
                        {"e_rms", r.e_rms},     {"e_nrms", r.e_nrms},     {"jitter", r.jitter},
                        {"e_mae", r.e_mae},     {"ci_max", ci(r.ci_max)}, {"ci_rms", ci(r.ci_rms)},
                        {"ci_mae", ci(r.ci_mae)}, {"ci_jitter", ci(r.ci_jitter)},
                        {"n_runs_used", r.n_runs_used}, {"rank_deficient", r.rank_deficient}};
    if (with_timing) j["step_ms"] = r.step_ms;
    j["cross_corr"] = r.cross_corr ? nlohmann::json(*r.cross_corr) : nlohmann::json(nullptr);
    if (!r.valid)
        for (const char* k : {"e_max", "e_rms", "e_nrms", "jitter", "e_mae"}) j[k] = nullptr;
    if (!r.valid && with_timing) j["step_ms"] = nullptr;
    return j;
}

inline void write_report_json(const std::vector<MetricsReport>& rows, const std::filesystem::path& path,
                              bool with_timing = true) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(to_json(r, with_timing));
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

inline void write_report_csv(const std::vector<MetricsReport>& rows, const std::filesystem::path& path,
                             bool with_timing = true) {
    auto out = detail::open_out(path);
    out << "name,valid,e_max,e_rms,e_nrms,jitter,e_mae,ci_max_lo,ci_max_hi,ci_rms_lo,ci_rms_hi,n_runs_used,"
        << (with_timing ? "step_ms," : "") << "cross_corr\n";
    auto num = [&](bool have, double v) {
        if (have) out << v;
        else out << "nan";
    };
    for (const auto& r : rows) {
        out << r.name << ',' << (r.valid ? 1 : 0) << ',';
        for (double v : {r.e_max, r.e_rms, r.e_nrms, r.jitter, r.e_mae}) {
            num(r.valid, v);
            out << ',';
        }
        for (const auto* e : {&r.ci_max, &r.ci_rms}) {
            num(e->has_value(), *e ? (*e)->ci.lo : 0.0);
            out << ',';
            num(e->has_value(), *e ? (*e)->ci.hi : 0.0);
            out << ',';
        }
        out << r.n_runs_used << ',';
        if (with_timing) {
            num(r.valid, r.step_ms);
            out << ',';
        }
        num(r.cross_corr.has_value(), r.cross_corr.value_or(0.0));
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace motionpred
