#pragma once

// Reference helpers without a test-framework dependency: seeded random
// volumes and fields, an analytic phantom and a dense forward-warp oracle.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "motionpred/correspondence.hpp"
#include "motionpred/synthetic.hpp"
#include "motionpred/volume.hpp"

namespace mp_test {

using namespace motionpred;

inline Volume3 random_volume(Dims d, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(lo, hi);
    Volume3 v(d);
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = U(rng);
    return v;
}

inline VectorField3 random_field(Dims d, std::uint64_t seed, double amp) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-amp, amp);
    VectorField3 f(d);
    for (std::size_t n = 0; n < f.size(); ++n) f[n] = {U(rng), U(rng), U(rng)};
    return f;
}

/// Smooth blob phantom shifted by `shift` voxels (analytic, no resampling).
inline Volume3 smooth_phantom(Dims d, Vec3 shift = {}) {
    const Vec3 c{0.5 * (d.nx - 1), 0.5 * (d.ny - 1), 0.5 * (d.nz - 1)};
    const double s = 0.15 * std::min({d.nx, d.ny, d.nz});
    std::vector<Blob> blobs{{c + Vec3{-0.15 * d.nx, -0.1 * d.ny, 0.0} + shift, {s, 1.2 * s, s}, 100.0},
                            {c + Vec3{0.15 * d.nx, 0.12 * d.ny, 0.08 * d.nz} + shift, {1.1 * s, s, 1.3 * s}, 70.0},
                            {c + Vec3{0.0, 0.1 * d.ny, -0.15 * d.nz} + shift, {s, s, s}, 50.0}};
    return make_phantom(d, blobs, 10.0);
}

inline Eigen::MatrixXd random_markers(int frames, int r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 3.0);
    Eigen::MatrixXd m(frames, 3 * r);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = g(rng);
    return m;
}

/// Fields u(x, t_n) = sum_p gamma_p(x) u_p(t_n) for a given V x r gamma.
inline std::vector<VectorField3> fields_from(const Eigen::MatrixXd& gamma, Dims d, const Eigen::MatrixXd& markers) {
    std::vector<VectorField3> out;
    const int r = static_cast<int>(gamma.cols());
    for (Eigen::Index n = 0; n < markers.rows(); ++n) {
        VectorField3 f(d);
        for (std::size_t v = 0; v < d.size(); ++v)
            for (int p = 0; p < r; ++p) {
                const Vec3 up{markers(n, 3 * p), markers(n, 3 * p + 1), markers(n, 3 * p + 2)};
                f[v] += gamma(static_cast<Eigen::Index>(v), p) * up;
            }
        out.push_back(f);
    }
    return out;
}

/// Dense double-loop forward warp: every source against every target.
inline Volume3 dense_nw(const Volume3& src, const VectorField3& u, const WarpParams& wp) {
    const Dims& d = src.dims();
    Volume3 out(d);
    const double lo = src.min(), hi = src.max();
    for (int tk = 0; tk < d.nz; ++tk)
        for (int tj = 0; tj < d.ny; ++tj)
            for (int ti = 0; ti < d.nx; ++ti) {
                double num = 0, den = 0;
                for (int k = 0; k < d.nz; ++k)
                    for (int j = 0; j < d.ny; ++j)
                        for (int i = 0; i < d.nx; ++i) {
                            const Vec3 y = Vec3{double(i), double(j), double(k)} + u(i, j, k);
                            const double dist = (Vec3{double(ti), double(tj), double(tk)} - y).norm();
                            if (dist >= wp.h) continue;
                            const double w = std::exp(-dist * dist / (2 * wp.sigma_w * wp.sigma_w)) /
                                             std::sqrt(2 * std::numbers::pi * wp.sigma_w * wp.sigma_w);
                            num += w * src(i, j, k);
                            den += w;
                        }
                out(ti, tj, tk) = den > 0 ? std::clamp(num / den, lo, hi) : wp.fill_value;
            }
    return out;
}

}  // namespace mp_test
