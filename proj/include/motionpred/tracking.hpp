#pragma once

// Marker trajectories: sampling DVF sequences at fixed points, train /
// validation / test splitting and training-only z-score normalization.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motionpred/error.hpp"
#include "motionpred/volume.hpp"

namespace motionpred {

/// Per-marker displacement series. Row n of `series` is
/// (ux(x_1), uy(x_1), uz(x_1), ..., uz(x_r)) at frame n, in mm.
struct TrajectorySet {
    int r = 0;
    std::vector<Vec3> points;  ///< initial marker positions (voxel coordinates), may be empty
    Eigen::MatrixXd series;

    int n_frames() const { return static_cast<int>(series.rows()); }
    Vec3 displacement(int frame, int marker) const {
        return {series(frame, 3 * marker), series(frame, 3 * marker + 1), series(frame, 3 * marker + 2)};
    }
    void validate() const {
        require(r >= 1, "trajectory set needs at least one marker");
        require(series.rows() >= 1, "trajectory set needs at least one frame");
        require(series.cols() == 3 * r, "trajectory series must have 3r columns");
        require(series.allFinite(), "trajectory series contains non-finite values");
    }
};

inline std::string column_name(int col) {
    static const char* axes = "xyz";
    return "marker " + std::to_string(col / 3 + 1) + " axis " + axes[col % 3];
}

struct SplitSpec {
    int n_train = 2000, n_val = 200, n_test = 200;

    int val_begin() const { return n_train; }
    int test_begin() const { return n_train + n_val; }
    int end() const { return n_train + n_val + n_test; }

    void validate(int n_frames) const {
        require(n_train >= 1 && n_val >= 1 && n_test >= 1, "split sizes must each be >= 1");
        require(end() <= n_frames, "split needs " + std::to_string(end()) + " frames, series has " +
                                       std::to_string(n_frames));
    }
};

struct NormStats {
    Eigen::VectorXd mu, sigma;
};

/// Samples each field at each marker point (trilinear) and converts voxels to mm.
inline TrajectorySet extract_trajectories(const std::vector<VectorField3>& dvfs, const std::vector<Vec3>& points,
                                          Spacing spacing = {}) {
    require(!dvfs.empty(), "extract_trajectories: empty DVF sequence");
    require(!points.empty(), "extract_trajectories: no marker points");
    const Dims& d = dvfs.front().dims();
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Vec3& x = points[p];
        const bool inside = x.x >= 0 && x.x <= d.nx - 1 && x.y >= 0 && x.y <= d.ny - 1 && x.z >= 0 && x.z <= d.nz - 1;
        require(inside, "marker " + std::to_string(p + 1) + " lies outside the " + d.str() + " grid");
    }
    TrajectorySet ts;
    ts.r = static_cast<int>(points.size());
    ts.points = points;
    ts.series.resize(static_cast<Eigen::Index>(dvfs.size()), 3 * ts.r);
    for (std::size_t n = 0; n < dvfs.size(); ++n) {
        require(dvfs[n].dims() == d, "extract_trajectories: DVF dims change along the sequence");
        for (int p = 0; p < ts.r; ++p) {
            Vec3 u = trilinear_sample(dvfs[n], points[p]);
            for (int a = 0; a < 3; ++a) ts.series(static_cast<Eigen::Index>(n), 3 * p + a) = u[a] * spacing[a];
        }
    }
    return ts;
}

/// Column means and population standard deviations over the training rows only.
inline NormStats fit_norm(const TrajectorySet& ts, const SplitSpec& split) {
    split.validate(ts.n_frames());
    require(split.n_train >= 2, "fit_norm needs at least two training rows");
    const auto train = ts.series.topRows(split.n_train);
    NormStats s;
    s.mu = train.colwise().mean().transpose();
    s.sigma.resize(train.cols());
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        double var = (train.col(c).array() - s.mu(c)).square().mean();
        double sd = std::sqrt(var);
        if (!(sd > 1e-12 * std::max(1.0, std::abs(s.mu(c)))))
            throw DegenerateSignal("zero training variance in " + column_name(static_cast<int>(c)));
        s.sigma(c) = sd;
    }
    return s;
}

inline Eigen::MatrixXd apply_norm(const Eigen::MatrixXd& series, const NormStats& s) {
    return (series.rowwise() - s.mu.transpose()).array().rowwise() / s.sigma.transpose().array();
}

inline Eigen::MatrixXd invert_norm(const Eigen::MatrixXd& normalized, const NormStats& s) {
    return (normalized.array().rowwise() * s.sigma.transpose().array()).matrix().rowwise() + s.mu.transpose();
}

/// Largest pairwise 3D distance between any two positions of each marker.
inline Eigen::VectorXd motion_amplitude(const TrajectorySet& ts) {
    require(ts.n_frames() >= 1 && ts.r >= 1, "motion_amplitude: empty trajectory set");
    Eigen::VectorXd amp(ts.r);
    for (int p = 0; p < ts.r; ++p) {
        const Eigen::MatrixXd pts = ts.series.middleCols(3 * p, 3);
        double best = 0.0;
        for (Eigen::Index i = 0; i + 1 < pts.rows(); ++i) {
            double d2 = (pts.bottomRows(pts.rows() - i - 1).rowwise() - pts.row(i)).rowwise().squaredNorm().maxCoeff();
            best = std::max(best, d2);
        }
        amp(p) = std::sqrt(best);
    }
    return amp;
}

}  // namespace motionpred
