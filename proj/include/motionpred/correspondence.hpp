#pragma once

// Linear correspondence model u(x, t) = sum_p gamma_p(x) u(x_p, t) and
// Nadaraya-Watson forward warping of the reference image.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "motionpred/error.hpp"
#include "motionpred/volume.hpp"
#include "motionpred/volume_io.hpp"

namespace motionpred {

struct CorrespondenceModel {
    Dims dims;
    int r = 0;
    Eigen::MatrixXd gamma;        ///< V x r, row n = coefficients of voxel n
    bool rank_deficient = false;  ///< marker design was singular; gamma is minimum-norm
    long warnings = 0;            ///< voxels solved with the minimum-norm fallback
};

/// Streams training frames into the normal equations of the per-voxel fit.
/// The three displacement components share one coefficient vector, so every
/// voxel has the same 3N x r design matrix A (A[(n, d), p] = u_d(x_p, t_n))
/// and only A^T b differs.
class CorrespondenceFitter {
public:
    CorrespondenceFitter(Dims dims, int r)
        : dims_(dims), r_(r), ata_(Eigen::MatrixXd::Zero(r, r)),
          atb_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dims.size()), r)) {
        require(dims.valid(), "correspondence fit: invalid dims");
        require(r >= 1, "correspondence fit: r must be >= 1");
    }

    void add(const VectorField3& dvf, const Eigen::Ref<const Eigen::VectorXd>& marker_row) {
        require(dvf.dims() == dims_, "correspondence fit: field dims " + dvf.dims().str() + " differ from " + dims_.str());
        require(marker_row.size() == 3 * r_, "correspondence fit: marker row must have 3r entries");
        Eigen::MatrixXd M(3, r_);
        for (int p = 0; p < r_; ++p) M.col(p) = marker_row.segment(3 * p, 3);
        ata_.noalias() += M.transpose() * M;
        using RowMat = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
        static_assert(sizeof(Vec3) == 3 * sizeof(double));
        const Eigen::Map<const RowMat> U(reinterpret_cast<const double*>(dvf.data().data()),
                                         static_cast<Eigen::Index>(dvf.size()), 3);
        atb_.noalias() += U * M;
        ++frames_;
    }

    int frames() const { return frames_; }

    CorrespondenceModel finish() const {
        require(frames_ >= r_, "correspondence fit needs at least r = " + std::to_string(r_) + " training frames");
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(ata_);
        CorrespondenceModel m;
        m.dims = dims_;
        m.r = r_;
        m.rank_deficient = cod.rank() < r_;
        m.warnings = m.rank_deficient ? static_cast<long>(dims_.size()) : 0;
        m.gamma = atb_ * cod.pseudoInverse().transpose();
        return m;
    }

private:
    Dims dims_;
    int r_;
    Eigen::MatrixXd ata_, atb_;
    int frames_ = 0;
};

/// Least-squares gamma from training fields and the matching marker rows
/// (row n of `markers` belongs to dvfs[n]).
inline CorrespondenceModel fit_correspondence(const std::vector<VectorField3>& dvfs, const Eigen::MatrixXd& markers) {
    require(!dvfs.empty(), "fit_correspondence: no training fields");
    require(markers.rows() == static_cast<Eigen::Index>(dvfs.size()), "fit_correspondence: one marker row per field");
    require(markers.cols() % 3 == 0, "fit_correspondence: marker rows must have 3r entries");
    CorrespondenceFitter fit(dvfs.front().dims(), static_cast<int>(markers.cols() / 3));
    for (std::size_t n = 0; n < dvfs.size(); ++n) fit.add(dvfs[n], markers.row(static_cast<Eigen::Index>(n)).transpose());
    return fit.finish();
}

/// u(x) = sum_p gamma_p(x) u_p for one row of marker displacements.
inline VectorField3 reconstruct_dvf(const CorrespondenceModel& model, const Eigen::Ref<const Eigen::VectorXd>& marker_row) {
    require(marker_row.size() == 3 * model.r, "reconstruct_dvf: marker row must have 3r entries");
    Eigen::MatrixXd M(3, model.r);
    for (int p = 0; p < model.r; ++p) M.col(p) = marker_row.segment(3 * p, 3);
    const Eigen::MatrixXd U = model.gamma * M.transpose();  // V x 3
    VectorField3 out(model.dims);
    for (Eigen::Index n = 0; n < U.rows(); ++n) out[static_cast<std::size_t>(n)] = {U(n, 0), U(n, 1), U(n, 2)};
    return out;
}

struct WarpParams {
    double sigma_w = 0.5;
    int h = 3;
    double fill_value = 0.0;

    void validate() const {
        require(sigma_w > 0.0, "warp sigma_w must be > 0");
        require(h >= 1, "warp window h must be >= 1");
    }
};

namespace detail {
// First integer strictly above a, last strictly below b; finite inputs within int range.
inline int first_above(double a) {
    const int i = static_cast<int>(a);
    return i - (a < i) + 1;
}
inline int last_below(double b) {
    const int i = static_cast<int>(b);
    return i + (b > i) - 1;
}
}  // namespace detail

/// Nadaraya-Watson forward warp: every source voxel p lands at p + u(p) and
/// spreads its intensity over target voxels closer than h with weight
/// K_{sigma_w}(distance). Targets reached by no source get fill_value.
/// Cost is O(V h^3).
inline Volume3 nw_forward_warp(const Volume3& src, const VectorField3& dvf, const WarpParams& wp) {
    wp.validate();
    const Dims& d = src.dims();
    require(d == dvf.dims(), "nw_forward_warp: volume " + d.str() + " and field " + dvf.dims().str() + " differ");
    const double h = wp.h;
    const double h2 = h * h;
    const double inv2s2 = 1.0 / (2.0 * wp.sigma_w * wp.sigma_w);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * wp.sigma_w * wp.sigma_w);
    std::vector<double> num(d.size(), 0.0), den(d.size(), 0.0);

    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const std::size_t n = d.index(i, j, k);
                const Vec3 y = Vec3{double(i), double(j), double(k)} + dvf[n];
                const double value = src[n];
                const int z0 = std::max(0, detail::first_above(y.z - h));
                const int z1 = std::min(d.nz - 1, detail::last_below(y.z + h));
                // Open intervals: the distance test below only guards rounding at the sphere.
                for (int z = z0; z <= z1; ++z) {
                    const double dz2 = (z - y.z) * (z - y.z);
                    if (dz2 >= h2) continue;
                    const double ry = std::sqrt(h2 - dz2);
                    const int yy0 = std::max(0, detail::first_above(y.y - ry));
                    const int yy1 = std::min(d.ny - 1, detail::last_below(y.y + ry));
                    for (int yy = yy0; yy <= yy1; ++yy) {
                        const double dyz2 = dz2 + (yy - y.y) * (yy - y.y);
                        if (dyz2 >= h2) continue;
                        const double rx = std::sqrt(h2 - dyz2);
                        const int x0 = std::max(0, detail::first_above(y.x - rx));
                        const int x1 = std::min(d.nx - 1, detail::last_below(y.x + rx));
                        std::size_t t = d.index(x0, yy, z);
                        for (int x = x0; x <= x1; ++x, ++t) {
                            const double d2 = dyz2 + (x - y.x) * (x - y.x);
                            if (d2 >= h2) continue;
                            const double w = norm * std::exp(-d2 * inv2s2);
                            num[t] += w * value;
                            den[t] += w;
                        }
                    }
                }
            }

    const double lo = src.min(), hi = src.max();
    Volume3 out(d, 0.0, src.spacing());
    for (std::size_t n = 0; n < d.size(); ++n)
        out[n] = den[n] > 0.0 ? std::clamp(num[n] / den[n], lo, hi) : wp.fill_value;
    return out;
}

inline Volume3 predict_image(const Volume3& src, const CorrespondenceModel& model,
                             const Eigen::Ref<const Eigen::VectorXd>& marker_row, const WarpParams& wp) {
    require(src.dims() == model.dims, "predict_image: source and model dims differ");
    return nw_forward_warp(src, reconstruct_dvf(model, marker_row), wp);
}

inline void save_correspondence(const CorrespondenceModel& m, const std::filesystem::path& path) {
    GridHeader h;
    h.dims = m.dims;
    h.dtype = Dtype::f64;
    h.kind = "correspondence";
    h.extra = {{"r", m.r}, {"rank_deficient", m.rank_deficient}, {"warnings", m.warnings}};
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(m.r));
    std::vector<std::span<const double>> spans;
    std::vector<std::string> names;
    for (int p = 0; p < m.r; ++p) {
        cols[static_cast<std::size_t>(p)].assign(m.gamma.col(p).data(), m.gamma.col(p).data() + m.gamma.rows());
        spans.emplace_back(cols[static_cast<std::size_t>(p)]);
        names.push_back("gamma" + std::to_string(p + 1));
    }
    save_components(path, h, spans, names);
}

inline CorrespondenceModel load_correspondence(const std::filesystem::path& path) {
    auto g = load_components(path);
    CorrespondenceModel m;
    m.dims = g.header.dims;
    m.r = static_cast<int>(g.components.size());
    m.rank_deficient = g.header.extra.value("rank_deficient", false);
    m.warnings = g.header.extra.value("warnings", 0L);
    m.gamma.resize(static_cast<Eigen::Index>(m.dims.size()), m.r);
    for (int p = 0; p < m.r; ++p)
        m.gamma.col(p) = Eigen::Map<const Eigen::VectorXd>(g.components[static_cast<std::size_t>(p)].data(), m.gamma.rows());
    return m;
}

}  // namespace motionpred
