#pragma once

// Trajectory and image error metrics. Series are frames x 3r matrices with
// marker p in columns 3p..3p+2; every per-marker error is a 3D Euclidean
// distance.

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "motionpred/error.hpp"
#include "motionpred/volume.hpp"

namespace motionpred {

namespace detail {

inline void check_pair(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred, const char* what) {
    require(truth.rows() == pred.rows() && truth.cols() == pred.cols(),
            std::string(what) + ": true and predicted series differ in shape");
    require(truth.rows() >= 1 && truth.cols() >= 3, std::string(what) + ": empty series");
    require(truth.cols() % 3 == 0, std::string(what) + ": column count must be a multiple of 3");
}

/// frames x r matrix of per-marker Euclidean errors.
inline Eigen::MatrixXd marker_errors(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    const Eigen::Index r = truth.cols() / 3;
    Eigen::MatrixXd err(truth.rows(), r);
    for (Eigen::Index p = 0; p < r; ++p)
        err.col(p) = (truth.middleCols(3 * p, 3) - pred.middleCols(3 * p, 3)).rowwise().norm();
    return err;
}

}  // namespace detail

/// Mean over frames and markers of the 3D error.
inline double mae(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    detail::check_pair(truth, pred, "mae");
    return detail::marker_errors(truth, pred).mean();
}

inline double max_error(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    detail::check_pair(truth, pred, "max_error");
    return detail::marker_errors(truth, pred).maxCoeff();
}

inline double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    detail::check_pair(truth, pred, "rmse");
    return std::sqrt(detail::marker_errors(truth, pred).array().square().mean());
}

/// Error energy over the energy of the true series about each marker's mean position.
inline double nrmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    detail::check_pair(truth, pred, "nrmse");
    const Eigen::RowVectorXd mu = truth.colwise().mean();
    const double num = (truth - pred).squaredNorm();
    const double den = (truth.rowwise() - mu).squaredNorm();
    if (!(den > 0.0)) throw DegenerateSignal("nrmse: true series is constant");
    return std::sqrt(num / den);
}

/// Mean length of consecutive predicted steps, over markers.
inline double jitter(const Eigen::MatrixXd& pred) {
    require(pred.rows() >= 2, "jitter needs at least two frames");
    require(pred.cols() >= 3 && pred.cols() % 3 == 0, "jitter: column count must be a positive multiple of 3");
    return detail::marker_errors(pred.bottomRows(pred.rows() - 1), pred.topRows(pred.rows() - 1)).mean();
}

struct Interval {
    double lo = 0.0, hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
};

struct IntervalEstimate {
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation (n - 1)
    Interval ci;
    int n = 0;
};

/// mean +- z * s / sqrt(n) over the successful runs, s with the n-1 convention.
/// z = 1.96 gives the 95% interval.
inline IntervalEstimate confidence_interval(std::span<const double> values, double z = 1.96) {
    const int n = static_cast<int>(values.size());
    require(n >= 2, "confidence_interval needs at least two runs, got " + std::to_string(n));
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1));
    const double half = z * sd / std::sqrt(static_cast<double>(n));
    return {mean, sd, {mean - half, mean + half}, n};
}

/// Pearson correlation of the flattened intensities.
inline double cross_correlation(const Volume3& I, const Volume3& J) {
    require(I.dims() == J.dims(), "cross_correlation: volumes differ in size");
    const auto a = Eigen::Map<const Eigen::ArrayXd>(I.data().data(), static_cast<Eigen::Index>(I.size()));
    const auto b = Eigen::Map<const Eigen::ArrayXd>(J.data().data(), static_cast<Eigen::Index>(J.size()));
    const Eigen::ArrayXd da = a - a.mean();
    const Eigen::ArrayXd db = b - b.mean();
    const double va = da.square().sum(), vb = db.square().sum();
    if (!(va > 0.0) || !(vb > 0.0)) throw DegenerateSignal("cross_correlation: constant image");
    return (da * db).sum() / std::sqrt(va * vb);
}

}  // namespace motionpred
