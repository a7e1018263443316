#pragma once

// Single-hidden-layer tanh RNN trained online with real-time recurrent
// learning (RTRL) and joint gradient-norm clipping.
//
//   x_{n+1} = tanh(W_a x_n + W_b u_n)        W_a: q x q, W_b: q x (m+1)
//   y_n     = W_c x_n                        W_c: p x q
//   E_n     = 1/2 |d_n - y_n|^2
//
// Row j of [W_a W_b] is the weight vector w_j (length q+m+1). The
// sensitivity Lambda_j = dx_n / dw_j (q x (q+m+1)) is carried forward as
//
//   Lambda_{j,n+1} = Phi_n (W_a Lambda_{j,n} + U_{j,n}),
//
// where Phi_n = diag(1 - x_{n+1}^2) and U_{j,n} holds xi_n = [x_n; u_n] in
// row j. All q sensitivities live side by side in one q x q(q+m+1) matrix so
// the propagation is a single matrix product; block j occupies columns
// [j(q+m+1), (j+1)(q+m+1)).
//
// Each step follows this order: predict, error, descent directions
// Delta w_j = Lambda_j^T W_c^T e and Delta W_c = e x^T, joint clipping to
// norm theta, then the sensitivity and state updates using the pre-update
// W_a and W_b, and finally the weight updates with step eta.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "motionpred/error.hpp"

namespace motionpred {

struct RnnConfig {
    int L = 10;              ///< signal history length, samples
    int r = 3;               ///< markers
    int q = 25;              ///< hidden units
    double eta = 0.01;       ///< learning rate
    double theta = 1.0;      ///< clipping threshold
    double sigma_init = 0.02;
    std::uint64_t seed = 0;
    int input_dim = 0;   ///< overrides m = 3rL when > 0
    int output_dim = 0;  ///< overrides p = 3r when > 0

    int m() const { return input_dim > 0 ? input_dim : 3 * r * L; }
    int p() const { return output_dim > 0 ? output_dim : 3 * r; }
    /// Length of xi = [x; u] and of each w_j.
    int xi_size() const { return q + m() + 1; }

    void validate() const {
        require(L >= 1, "RNN history length L must be >= 1");
        require(r >= 1, "RNN marker count r must be >= 1");
        require(q >= 1, "RNN hidden size q must be >= 1");
        require(eta >= 0.0, "RNN learning rate must be >= 0");
        require(theta > 0.0, "RNN clipping threshold must be > 0");
        require(sigma_init > 0.0, "RNN initial weight std dev must be > 0");
        require(input_dim >= 0 && output_dim >= 0, "RNN dimension overrides must be >= 0");
    }
};

struct RnnRtrlState {
    Eigen::MatrixXd Wa, Wb, Wc;
    Eigen::VectorXd x;
    Eigen::MatrixXd Lambda;  ///< q x q(q+m+1), block j is Lambda_j
    long n = 1;

    auto lambda(int j, int xi_size) { return Lambda.middleCols(static_cast<Eigen::Index>(j) * xi_size, xi_size); }
    auto lambda(int j, int xi_size) const {
        return Lambda.middleCols(static_cast<Eigen::Index>(j) * xi_size, xi_size);
    }

    bool all_finite() const {
        return Wa.allFinite() && Wb.allFinite() && Wc.allFinite() && x.allFinite() && Lambda.allFinite();
    }
};

/// Gaussian weights N(0, sigma_init^2) from the config seed; x = 0, Lambda = 0.
inline RnnRtrlState rnn_init(const RnnConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, cfg.sigma_init);
    auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd w(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = gauss(rng);
        return w;
    };
    RnnRtrlState s;
    s.Wa = draw(cfg.q, cfg.q);
    s.Wb = draw(cfg.q, cfg.m() + 1);
    s.Wc = draw(cfg.p(), cfg.q);
    s.x = Eigen::VectorXd::Zero(cfg.q);
    s.Lambda = Eigen::MatrixXd::Zero(cfg.q, static_cast<Eigen::Index>(cfg.q) * cfg.xi_size());
    return s;
}

struct ClipResult {
    double kappa = 0.0;  ///< joint Frobenius norm before clipping
    double scale = 1.0;  ///< factor applied to every block
};

/// Rescales all blocks by theta / kappa when their joint norm kappa exceeds theta.
template <class... Blocks>
ClipResult clip_joint_gradient(double theta, Blocks&... blocks) {
    require(theta > 0.0, "clipping threshold must be > 0");
    ClipResult c;
    c.kappa = std::sqrt((0.0 + ... + blocks.squaredNorm()));
    if (c.kappa > theta) {
        c.scale = theta / c.kappa;
        ((blocks *= c.scale), ...);
    }
    return c;
}

/// Intermediate quantities of one step, for inspection and tests.
struct StepTrace {
    Eigen::VectorXd y, e;
    Eigen::MatrixXd dw;   ///< q x (q+m+1); row j is Delta w_j before clipping
    Eigen::MatrixXd dWc;  ///< p x q before clipping
    ClipResult clip;
    double loss = 0.0;    ///< E_n
};

class RtrlRnn {
public:
    explicit RtrlRnn(const RnnConfig& cfg) : cfg_(cfg), s_(rnn_init(cfg)) {}
    RtrlRnn(const RnnConfig& cfg, RnnRtrlState state) : cfg_(cfg), s_(std::move(state)) {
        cfg_.validate();
        const int q = cfg_.q;
        require(s_.Wa.rows() == q && s_.Wa.cols() == q, "RNN state: W_a must be q x q");
        require(s_.Wb.rows() == q && s_.Wb.cols() == cfg_.m() + 1, "RNN state: W_b must be q x (m+1)");
        require(s_.Wc.rows() == cfg_.p() && s_.Wc.cols() == q, "RNN state: W_c must be p x q");
        require(s_.x.size() == q, "RNN state: x must have q entries");
        require(s_.Lambda.rows() == q && s_.Lambda.cols() == static_cast<Eigen::Index>(q) * cfg_.xi_size(),
                "RNN state: Lambda must be q x q(q+m+1)");
    }

    const RnnConfig& config() const { return cfg_; }
    const RnnRtrlState& state() const { return s_; }
    RnnRtrlState& state() { return s_; }

    /// Current output W_c x_n.
    Eigen::VectorXd predict() const { return s_.Wc * s_.x; }

    /// One learning-and-prediction iteration. `u` is the bias-prefixed input
    /// u_n (length m+1), `d` the target d_n (length p). Returns y_n.
    /// Throws NumericalFailure, leaving the state untouched, if any updated
    /// quantity is non-finite.
    Eigen::VectorXd step(const Eigen::VectorXd& u, const Eigen::VectorXd& d, StepTrace* trace = nullptr) {
        const int q = cfg_.q;
        const int K = cfg_.xi_size();
        require(u.size() == cfg_.m() + 1, "rnn step: input must have m+1 entries");
        require(d.size() == cfg_.p(), "rnn step: target must have p entries");

        Eigen::VectorXd y = s_.Wc * s_.x;
        Eigen::VectorXd e = d - y;

        // Delta w_j = Lambda_j^T W_c^T e, all j at once.
        const Eigen::VectorXd v = s_.Wc.transpose() * e;
        dw_flat_.noalias() = s_.Lambda.transpose() * v;
        Eigen::MatrixXd dw = Eigen::Map<const Eigen::MatrixXd>(dw_flat_.data(), K, q).transpose();
        Eigen::MatrixXd dWc = e * s_.x.transpose();

        if (trace) {
            trace->y = y;
            trace->e = e;
            trace->dw = dw;
            trace->dWc = dWc;
            trace->loss = 0.5 * e.squaredNorm();
        }
        const ClipResult clip = clip_joint_gradient(cfg_.theta, dw, dWc);
        if (trace) trace->clip = clip;

        Eigen::VectorXd xi(K);
        xi << s_.x, u;
        const Eigen::VectorXd a = s_.Wa * s_.x + s_.Wb * u;
        Eigen::VectorXd x_next = a.array().tanh().matrix();
        const Eigen::ArrayXd dphi = 1.0 - x_next.array().square();

        lambda_next_.resize(s_.Lambda.rows(), s_.Lambda.cols());
        lambda_next_.noalias() = s_.Wa * s_.Lambda;
        for (int j = 0; j < q; ++j) lambda_next_.block(j, static_cast<Eigen::Index>(j) * K, 1, K) += xi.transpose();
        lambda_next_.array().colwise() *= dphi;

        Eigen::MatrixXd Wc_next = s_.Wc + cfg_.eta * dWc;
        Eigen::MatrixXd Wa_next = s_.Wa + cfg_.eta * dw.leftCols(q);
        Eigen::MatrixXd Wb_next = s_.Wb + cfg_.eta * dw.rightCols(K - q);

        if (!(Wa_next.allFinite() && Wb_next.allFinite() && Wc_next.allFinite() && x_next.allFinite() &&
              lambda_next_.allFinite()))
            throw NumericalFailure(s_.n, "non-finite value in RTRL update");

        s_.Wa.swap(Wa_next);
        s_.Wb.swap(Wb_next);
        s_.Wc.swap(Wc_next);
        s_.x.swap(x_next);
        s_.Lambda.swap(lambda_next_);
        ++s_.n;
        return y;
    }

private:
    RnnConfig cfg_;
    RnnRtrlState s_;
    Eigen::VectorXd dw_flat_;
    Eigen::MatrixXd lambda_next_;
};

}  // namespace motionpred
