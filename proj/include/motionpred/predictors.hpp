#pragma once

// Online and offline marker-position predictors sharing one alignment
// convention: the prediction for frame k is stored in row k of an N x 3r
// matrix, and rows without a prediction are NaN.
//
// The RNN and LMS inputs are training-normalized windows
//   u = (1, s_i, s_{i+1}, ..., s_{i+L-1})      (s_t = normalized row t)
// used to predict s_{i+L}: one sampling interval of look-ahead.

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "motionpred/grid_search.hpp"
#include "motionpred/metrics.hpp"
#include "motionpred/rnn_rtrl.hpp"
#include "motionpred/seeding.hpp"
#include "motionpred/tracking.hpp"

namespace motionpred {

struct PredictionResult {
    Eigen::MatrixXd pred;         ///< N x 3r, denormalized (mm)
    int first_row = 0;            ///< first row holding a prediction
    Eigen::VectorXd loss;         ///< per online step E_n (RNN only)
    double mean_step_seconds = 0; ///< per-step predict + update time
    bool rank_deficient = false;  ///< linear predictor fell back to a minimum-norm fit
};

/// Bias-prefixed history window starting at row `start`, rows flattened in time order.
inline Eigen::VectorXd make_input(const Eigen::MatrixXd& normalized, int start, int L) {
    const Eigen::Index w = normalized.cols();
    Eigen::VectorXd u(1 + w * L);
    u(0) = 1.0;
    for (int t = 0; t < L; ++t) u.segment(1 + t * w, w) = normalized.row(start + t).transpose();
    return u;
}

namespace detail {

inline Eigen::MatrixXd nan_matrix(Eigen::Index rows, Eigen::Index cols) {
    return Eigen::MatrixXd::Constant(rows, cols, std::numeric_limits<double>::quiet_NaN());
}

using Clock = std::chrono::steady_clock;

inline double seconds(Clock::duration d) { return std::chrono::duration<double>(d).count(); }

}  // namespace detail

/// RTRL-trained RNN run online over the whole series. Normalization
/// statistics come from the training rows only.
inline PredictionResult run_online(const TrajectorySet& ts, const RnnConfig& cfg, const SplitSpec& split) {
    ts.validate();
    cfg.validate();
    require(cfg.r == ts.r, "run_online: config has r = " + std::to_string(cfg.r) + " but series has " +
                               std::to_string(ts.r) + " markers");
    const int N = ts.n_frames();
    require(N >= cfg.L + 1, "run_online: series shorter than L + 1");
    const NormStats stats = fit_norm(ts, split);
    const Eigen::MatrixXd Z = apply_norm(ts.series, stats);

    RtrlRnn net(cfg);
    Eigen::MatrixXd pred_norm = detail::nan_matrix(N, Z.cols());
    PredictionResult res;
    res.first_row = cfg.L;
    res.loss.resize(N - cfg.L + 1);
    StepTrace trace;
    detail::Clock::duration spent{};
    // Iteration i feeds window i and scores the output of window i-1 against row i+L-1.
    for (int i = 0; i <= N - cfg.L; ++i) {
        const Eigen::VectorXd u = make_input(Z, i, cfg.L);
        const Eigen::VectorXd d = Z.row(i + cfg.L - 1).transpose();
        const auto t0 = detail::Clock::now();
        const Eigen::VectorXd y = net.step(u, d, &trace);
        spent += detail::Clock::now() - t0;
        res.loss(i) = trace.loss;
        if (i >= 1) pred_norm.row(i + cfg.L - 1) = y.transpose();
    }
    res.mean_step_seconds = detail::seconds(spent) / (N - cfg.L + 1);
    res.pred = invert_norm(pred_norm, stats);
    return res;
}

/// Least-mean-squares filter W (p x (m+1)), zero-initialized.
class LmsFilter {
public:
    LmsFilter(int inputs, int outputs, double eta) : W_(Eigen::MatrixXd::Zero(outputs, inputs)), eta_(eta) {
        require(eta >= 0.0, "LMS learning rate must be >= 0");
    }

    /// y = W u, then W += eta (d - y) u^T. Returns y.
    Eigen::VectorXd step(const Eigen::VectorXd& u, const Eigen::VectorXd& d, long n = 0) {
        Eigen::VectorXd y = W_ * u;
        W_.noalias() += eta_ * (d - y) * u.transpose();
        if (!W_.allFinite()) throw NumericalFailure(n, "non-finite LMS weights");
        return y;
    }

    const Eigen::MatrixXd& weights() const { return W_; }

private:
    Eigen::MatrixXd W_;
    double eta_;
};

inline PredictionResult lms_run(const TrajectorySet& ts, int L, double eta, const SplitSpec& split) {
    ts.validate();
    require(L >= 1, "LMS history length must be >= 1");
    const int N = ts.n_frames();
    require(N >= L + 1, "lms_run: series shorter than L + 1");
    const NormStats stats = fit_norm(ts, split);
    const Eigen::MatrixXd Z = apply_norm(ts.series, stats);
    const int p = 3 * ts.r;
    LmsFilter lms(1 + p * L, p, eta);
    Eigen::MatrixXd pred_norm = detail::nan_matrix(N, p);
    detail::Clock::duration spent{};
    for (int i = 0; i + L < N; ++i) {
        const Eigen::VectorXd u = make_input(Z, i, L);
        const Eigen::VectorXd d = Z.row(i + L).transpose();
        const auto t0 = detail::Clock::now();
        pred_norm.row(i + L) = lms.step(u, d, i + 1).transpose();
        spent += detail::Clock::now() - t0;
    }
    PredictionResult res;
    res.first_row = L;
    res.mean_step_seconds = detail::seconds(spent) / (N - L);
    res.pred = invert_norm(pred_norm, stats);
    return res;
}

struct LinearFit {
    Eigen::MatrixXd coeffs;  ///< (L+1) x 3r; column c = (a_0, a_1..a_L) for series column c
    bool rank_deficient = false;
};

/// Per marker and axis AR fit s_k = a_0 + sum_j a_j s_{k-j} on training rows,
/// minimum-norm when the design is rank deficient.
inline LinearFit fit_linear(const TrajectorySet& ts, int L, const SplitSpec& split) {
    ts.validate();
    split.validate(ts.n_frames());
    require(L >= 1, "linear predictor history length must be >= 1");
    require(split.n_train >= L + 2, "linear predictor needs at least L + 2 training rows");
    const int rows = split.n_train - L;
    LinearFit fit;
    fit.coeffs.resize(L + 1, ts.series.cols());
    for (Eigen::Index c = 0; c < ts.series.cols(); ++c) {
        Eigen::MatrixXd A(rows, L + 1);
        Eigen::VectorXd b(rows);
        for (int k = L; k < split.n_train; ++k) {
            A(k - L, 0) = 1.0;
            for (int j = 1; j <= L; ++j) A(k - L, j) = ts.series(k - j, c);
            b(k - L) = ts.series(k, c);
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
        if (cod.rank() < L + 1) fit.rank_deficient = true;
        fit.coeffs.col(c) = cod.solve(b);
    }
    return fit;
}

inline PredictionResult linear_predict(const TrajectorySet& ts, int L, const SplitSpec& split) {
    const LinearFit fit = fit_linear(ts, L, split);
    const int N = ts.n_frames();
    PredictionResult res;
    res.first_row = L;
    res.rank_deficient = fit.rank_deficient;
    res.pred = detail::nan_matrix(N, ts.series.cols());
    const auto t0 = detail::Clock::now();
    for (int k = L; k < N; ++k)
        for (Eigen::Index c = 0; c < ts.series.cols(); ++c) {
            double v = fit.coeffs(0, c);
            for (int j = 1; j <= L; ++j) v += fit.coeffs(j, c) * ts.series(k - j, c);
            res.pred(k, c) = v;
        }
    res.mean_step_seconds = detail::seconds(detail::Clock::now() - t0) / std::max(1, N - L);
    return res;
}

/// Latest observation as the forecast: pred(k) = true(k - 1).
inline PredictionResult no_prediction(const TrajectorySet& ts) {
    ts.validate();
    PredictionResult res;
    res.first_row = 1;
    res.pred = detail::nan_matrix(ts.n_frames(), ts.series.cols());
    if (ts.n_frames() > 1) res.pred.bottomRows(ts.n_frames() - 1) = ts.series.topRows(ts.n_frames() - 1);
    return res;
}

struct RnnGrid {
    std::vector<double> theta{0.5, 1.0, 2.0};
    std::vector<double> eta{0.01, 0.02, 0.05, 0.10};
    std::vector<double> sigma_init{0.01, 0.02, 0.05, 0.10};
    std::vector<int> L{10, 25, 40};
    std::vector<int> q{10, 25, 40, 55, 100, 145, 200, 250};

    std::vector<GridAxis> axes() const {
        auto to_d = [](const std::vector<int>& v) { return std::vector<double>(v.begin(), v.end()); };
        return {{"theta", theta}, {"eta", eta}, {"sigma_init_rnn", sigma_init}, {"L", to_d(L)}, {"q", to_d(q)}};
    }
};

inline RnnConfig rnn_config_from(const std::vector<double>& t, RnnConfig base) {
    base.theta = t[0];
    base.eta = t[1];
    base.sigma_init = t[2];
    base.L = static_cast<int>(t[3]);
    base.q = static_cast<int>(t[4]);
    return base;
}

/// Seed of run `run` under a base config; shared by every grid tuple.
inline std::uint64_t run_seed(std::uint64_t base_seed, int run) {
    return derive_seed(base_seed, "rnn-run", static_cast<std::uint64_t>(run));
}

/// Validation-split MAE of one RNN run, or nullopt after a numerical failure.
inline std::optional<double> rnn_validation_mae(const TrajectorySet& ts, const RnnConfig& cfg, const SplitSpec& split) {
    try {
        const auto res = run_online(ts, cfg, split);
        require(split.val_begin() >= res.first_row, "validation split starts before the first prediction");
        return mae(ts.series.middleRows(split.val_begin(), split.n_val), res.pred.middleRows(split.val_begin(), split.n_val));
    } catch (const NumericalFailure&) {
        return std::nullopt;
    }
}

/// n_runs seeded runs per tuple; failed runs are excluded from the row mean.
inline GridTable rnn_grid_search(const TrajectorySet& ts, const RnnGrid& grid, const SplitSpec& split,
                                 RnnConfig base, int n_runs = 10, int threads = 1) {
    base.r = ts.r;
    return run_grid(
        grid.axes(), n_runs,
        [&](const std::vector<double>& t, int run) {
            RnnConfig cfg = rnn_config_from(t, base);
            cfg.seed = run_seed(base.seed, run);
            return rnn_validation_mae(ts, cfg, split);
        },
        threads);
}

}  // namespace motionpred
