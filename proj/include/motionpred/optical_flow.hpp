#pragma once

// Pyramidal iterative Lucas-Kanade registration of 3D volumes.
//
// For a template I and target J, lk_register returns u such that
// I(x) ~ J(x + u(x)). Coarse-to-fine: per level the structure tensor G(x)
// of the template's Scharr gradients is accumulated once over a truncated
// Gaussian window, then n_iter refinements r += (G + eps I)^-1 b are taken
// with b built from the residual I_l(x) - J_l(x + g + r). The guess passed
// to the next finer level is 2 (g + r)(x / 2), sampled trilinearly.

#include <cmath>
#include <optional>
#include <vector>

#include "motionpred/error.hpp"
#include "motionpred/parallel.hpp"
#include "motionpred/volume.hpp"

namespace motionpred {

struct FlowParams {
    double sigma_init = 0.2;
    double sigma_sub = 0.2;
    double sigma_lk = 2.0;
    int n_layers = 3;
    int n_iter = 3;
    int lk_window_h = 0;          ///< 0 selects ceil(2 sigma_lk)
    double tensor_epsilon = 1e-3; ///< Tikhonov weight relative to trace(G)/3

    int window_h() const { return lk_window_h > 0 ? lk_window_h : std::max(1, static_cast<int>(std::ceil(2.0 * sigma_lk))); }

    void validate() const {
        require(sigma_init > 0 && sigma_sub > 0 && sigma_lk > 0, "flow sigmas must be > 0");
        require(n_layers >= 1, "n_layers must be >= 1");
        require(n_iter >= 1, "n_iter must be >= 1");
        require(lk_window_h >= 0, "lk_window_h must be >= 1 (or 0 for the default)");
        require(tensor_epsilon >= 0, "tensor_epsilon must be >= 0");
    }
};

struct Pyramid {
    std::vector<Volume3> levels;  ///< levels[0] is the finest
};

inline Pyramid build_pyramid(const Volume3& vol, const FlowParams& p) {
    p.validate();
    const int need = 1 << (p.n_layers - 1);
    const Dims& d = vol.dims();
    if (d.nx < need || d.ny < need || d.nz < need)
        throw PyramidTooDeep(std::to_string(p.n_layers) + " layers need dims >= " + std::to_string(need) +
                             ", volume is " + d.str());
    Pyramid pyr;
    pyr.levels.push_back(gaussian_filter(vol, p.sigma_init));
    for (int l = 1; l < p.n_layers; ++l) pyr.levels.push_back(subsample2(gaussian_filter(pyr.levels.back(), p.sigma_sub)));
    return pyr;
}

/// Symmetric 3x3 tensor per voxel, stored as (xx, xy, xz, yy, yz, zz).
struct TensorField {
    Dims dims;
    std::array<Volume3, 6> c;

    std::array<double, 6> at(std::size_t n) const {
        return {c[0][n], c[1][n], c[2][n], c[3][n], c[4][n], c[5][n]};
    }
};

inline constexpr std::array<std::array<int, 2>, 6> kTensorPairs{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

/// G(x) = sum_v K~(|x - v|) g(v) g(v)^T with g the Scharr gradient of `level`.
inline TensorField structure_tensor(const Gradient3& grad, const WindowKernel& window) {
    TensorField G{grad.gx.dims(), {}};
    for (int t = 0; t < 6; ++t) {
        const auto [a, b] = kTensorPairs[static_cast<std::size_t>(t)];
        Volume3 prod(G.dims);
        for (std::size_t n = 0; n < prod.size(); ++n) prod[n] = grad[a][n] * grad[b][n];
        G.c[static_cast<std::size_t>(t)] = window_sum(prod, window);
    }
    return G;
}

inline TensorField structure_tensor(const Volume3& level, const FlowParams& p) {
    p.validate();
    return structure_tensor(scharr_gradient(level), WindowKernel(p.sigma_lk, p.window_h()));
}

/// Solves (G + eps I) v = b, eps = rel_eps * trace(G) / 3 + 1e-12.
inline Vec3 solve_tensor(const std::array<double, 6>& g, const Vec3& b, double rel_eps) {
    const double eps = rel_eps * (g[0] + g[3] + g[5]) / 3.0 + 1e-12;
    const double a00 = g[0] + eps, a01 = g[1], a02 = g[2], a11 = g[3] + eps, a12 = g[4], a22 = g[5] + eps;
    const double c00 = a11 * a22 - a12 * a12;
    const double c01 = a02 * a12 - a01 * a22;
    const double c02 = a01 * a12 - a02 * a11;
    const double det = a00 * c00 + a01 * c01 + a02 * c02;
    if (!(std::abs(det) > 0.0) || !std::isfinite(det)) return {};
    const double c11 = a00 * a22 - a02 * a02;
    const double c12 = a01 * a02 - a00 * a12;
    const double c22 = a00 * a11 - a01 * a01;
    return {(c00 * b.x + c01 * b.y + c02 * b.z) / det, (c01 * b.x + c11 * b.y + c12 * b.z) / det,
            (c02 * b.x + c12 * b.y + c22 * b.z) / det};
}

/// Upsamples a coarse field onto `fine` dims: out(x) = 2 * coarse(x / 2).
inline VectorField3 propagate_guess(const VectorField3& coarse, const Dims& fine) {
    VectorField3 out(fine);
    for (int k = 0; k < fine.nz; ++k)
        for (int j = 0; j < fine.ny; ++j)
            for (int i = 0; i < fine.nx; ++i)
                out(i, j, k) = 2.0 * trilinear_sample(coarse, Vec3{0.5 * i, 0.5 * j, 0.5 * k});
    return out;
}

/// Per-level solve. `guess` is g_l; returns g_l + r_l^{n_iter}.
inline VectorField3 lk_refine_level(const Volume3& I, const Volume3& J, const VectorField3& guess, const FlowParams& p) {
    const Dims& d = I.dims();
    const WindowKernel window(p.sigma_lk, p.window_h());
    const Gradient3 grad = scharr_gradient(I);
    const TensorField G = structure_tensor(grad, window);

    VectorField3 r(d);
    Volume3 bx(d), by(d), bz(d);
    for (int it = 0; it < p.n_iter; ++it) {
        for (int k = 0; k < d.nz; ++k)
            for (int j = 0; j < d.ny; ++j)
                for (int i = 0; i < d.nx; ++i) {
                    const std::size_t n = d.index(i, j, k);
                    const Vec3 x{double(i), double(j), double(k)};
                    const double dI = I[n] - trilinear_sample(J, x + guess[n] + r[n]);
                    bx[n] = dI * grad.gx[n];
                    by[n] = dI * grad.gy[n];
                    bz[n] = dI * grad.gz[n];
                }
        const Volume3 sbx = window_sum(bx, window), sby = window_sum(by, window), sbz = window_sum(bz, window);
        for (std::size_t n = 0; n < d.size(); ++n) r[n] += solve_tensor(G.at(n), {sbx[n], sby[n], sbz[n]}, p.tensor_epsilon);
    }
    VectorField3 out(d);
    for (std::size_t n = 0; n < d.size(); ++n) out[n] = guess[n] + r[n];
    return out;
}

inline VectorField3 lk_register(const Pyramid& I, const Pyramid& J, const FlowParams& p) {
    require(I.levels.size() == J.levels.size(), "lk_register: pyramids have different depths");
    const int L = static_cast<int>(I.levels.size());
    VectorField3 guess(I.levels[static_cast<std::size_t>(L - 1)].dims());
    VectorField3 total;
    for (int l = L - 1; l >= 0; --l) {
        const auto& Il = I.levels[static_cast<std::size_t>(l)];
        const auto& Jl = J.levels[static_cast<std::size_t>(l)];
        require(Il.dims() == Jl.dims(), "lk_register: pyramid levels differ in size");
        total = lk_refine_level(Il, Jl, guess, p);
        if (l > 0) guess = propagate_guess(total, I.levels[static_cast<std::size_t>(l - 1)].dims());
    }
    return total;
}

inline VectorField3 lk_register(const Volume3& I, const Volume3& J, const FlowParams& p) {
    require(I.dims() == J.dims(), "lk_register: volumes differ in size (" + I.dims().str() + " vs " + J.dims().str() + ")");
    return lk_register(build_pyramid(I, p), build_pyramid(J, p), p);
}

/// Registers every frame against frame 0. Element 0 is the zero field.
inline std::vector<VectorField3> register_sequence(const std::vector<Volume3>& seq, const FlowParams& p,
                                                   int threads = 1) {
    require(!seq.empty(), "register_sequence: empty sequence");
    for (const auto& v : seq)
        require(v.dims() == seq.front().dims(), "register_sequence: frames differ in size");
    const Pyramid ref = build_pyramid(seq.front(), p);
    std::vector<VectorField3> out(seq.size(), VectorField3(seq.front().dims()));
    parallel_for(seq.size() - 1, threads,
                 [&](std::size_t k) { out[k + 1] = lk_register(ref, build_pyramid(seq[k + 1], p), p); });
    return out;
}

/// Root mean square of I(x, t_1) - I(x + u(x, t_k), t_k) over frames k >= 2
/// and all voxels (or the listed voxel indices). `dvfs[k-2]` belongs to frame k.
inline double registration_error(const std::vector<Volume3>& seq, const std::vector<VectorField3>& dvfs,
                                 const std::vector<std::size_t>& voxels = {}) {
    require(seq.size() >= 2, "registration_error needs at least two frames");
    require(dvfs.size() == seq.size() - 1, "registration_error: expected " + std::to_string(seq.size() - 1) +
                                               " fields, got " + std::to_string(dvfs.size()));
    const Volume3& ref = seq.front();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 1; k < seq.size(); ++k) {
        const Volume3 warped = warp_pull(seq[k], dvfs[k - 1]);
        require(warped.dims() == ref.dims(), "registration_error: frame dims differ");
        if (voxels.empty()) {
            for (std::size_t n = 0; n < ref.size(); ++n) {
                const double r = ref[n] - warped[n];
                sum += r * r;
            }
            count += ref.size();
        } else {
            for (std::size_t n : voxels) {
                const double r = ref[n] - warped[n];
                sum += r * r;
            }
            count += voxels.size();
        }
    }
    return std::sqrt(sum / static_cast<double>(count));
}

}  // namespace motionpred
