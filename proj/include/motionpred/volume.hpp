#pragma once

// Dense 3D grids and the numerical primitives built on them: trilinear
// sampling with clamped coordinates, separable Gaussian filtering, factor-2
// subsampling, Scharr gradients and pull-warping.
//
// Storage is x-fastest: index(i, j, k) = i + nx * (j + ny * k).
// All filters use replicate padding at the boundary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "motionpred/error.hpp"

namespace motionpred {

struct Dims {
    int nx = 1, ny = 1, nz = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    bool valid() const { return nx >= 1 && ny >= 1 && nz >= 1; }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(nx) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) * k);
    }
    std::string str() const {
        return std::to_string(nx) + "x" + std::to_string(ny) + "x" + std::to_string(nz);
    }
    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Physical voxel size in mm.
struct Spacing {
    double sx = 1.0, sy = 1.0, sz = 1.0;
    double operator[](int axis) const { return axis == 0 ? sx : (axis == 1 ? sy : sz); }
    friend bool operator==(const Spacing&, const Spacing&) = default;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
    double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double squared_norm() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(squared_norm()); }
};

/// Dense scalar grid. Values are kept in double precision.
class Volume3 {
public:
    Volume3() = default;
    explicit Volume3(Dims dims, double fill = 0.0, Spacing spacing = {})
        : dims_(dims), spacing_(spacing) {
        require(dims.valid(), "volume dims must all be >= 1, got " + dims.str());
        data_.assign(dims.size(), fill);
    }
    Volume3(Dims dims, std::vector<double> data, Spacing spacing = {})
        : dims_(dims), spacing_(spacing), data_(std::move(data)) {
        require(dims.valid(), "volume dims must all be >= 1, got " + dims.str());
        require(data_.size() == dims.size(), "volume data length does not match dims " + dims.str());
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    void set_spacing(Spacing s) { spacing_ = s; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int i, int j, int k) { return data_[dims_.index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
    double& operator[](std::size_t n) { return data_[n]; }
    double operator[](std::size_t n) const { return data_[n]; }

    /// Replicate-padded access.
    double clamped(int i, int j, int k) const {
        return (*this)(std::clamp(i, 0, dims_.nx - 1), std::clamp(j, 0, dims_.ny - 1),
                       std::clamp(k, 0, dims_.nz - 1));
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }

    double min() const { return *std::min_element(data_.begin(), data_.end()); }
    double max() const { return *std::max_element(data_.begin(), data_.end()); }
    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    Dims dims_{};
    Spacing spacing_{};
    std::vector<double> data_ = std::vector<double>(1, 0.0);
};

/// Dense grid of 3-vectors in voxel units.
class VectorField3 {
public:
    VectorField3() = default;
    explicit VectorField3(Dims dims, Vec3 fill = {}) : dims_(dims) {
        require(dims.valid(), "field dims must all be >= 1, got " + dims.str());
        data_.assign(dims.size(), fill);
    }

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }

    Vec3& operator()(int i, int j, int k) { return data_[dims_.index(i, j, k)]; }
    const Vec3& operator()(int i, int j, int k) const { return data_[dims_.index(i, j, k)]; }
    Vec3& operator[](std::size_t n) { return data_[n]; }
    const Vec3& operator[](std::size_t n) const { return data_[n]; }

    std::span<Vec3> data() { return data_; }
    std::span<const Vec3> data() const { return data_; }

    /// One component as a scalar volume.
    Volume3 component(int axis, Spacing spacing = {}) const {
        Volume3 out(dims_, 0.0, spacing);
        for (std::size_t n = 0; n < data_.size(); ++n) out[n] = data_[n][axis];
        return out;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](const Vec3& v) {
            return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
        });
    }

private:
    Dims dims_{};
    std::vector<Vec3> data_ = std::vector<Vec3>(1);
};

namespace detail {

struct TrilinearStencil {
    int i0, i1, j0, j1, k0, k1;
    double fx, fy, fz;
};

inline void clamp_axis(double p, int n, int& lo, int& hi, double& frac) {
    double c = std::clamp(p, 0.0, static_cast<double>(n - 1));
    double f = std::floor(c);
    lo = static_cast<int>(f);
    hi = std::min(lo + 1, n - 1);
    frac = c - f;
}

inline TrilinearStencil stencil(const Dims& d, const Vec3& p) {
    TrilinearStencil s{};
    clamp_axis(p.x, d.nx, s.i0, s.i1, s.fx);
    clamp_axis(p.y, d.ny, s.j0, s.j1, s.fy);
    clamp_axis(p.z, d.nz, s.k0, s.k1, s.fz);
    return s;
}

template <class T, class Get>
T blend(const TrilinearStencil& s, Get&& at) {
    T c00 = at(s.i0, s.j0, s.k0) * (1 - s.fx) + at(s.i1, s.j0, s.k0) * s.fx;
    T c10 = at(s.i0, s.j1, s.k0) * (1 - s.fx) + at(s.i1, s.j1, s.k0) * s.fx;
    T c01 = at(s.i0, s.j0, s.k1) * (1 - s.fx) + at(s.i1, s.j0, s.k1) * s.fx;
    T c11 = at(s.i0, s.j1, s.k1) * (1 - s.fx) + at(s.i1, s.j1, s.k1) * s.fx;
    T c0 = c00 * (1 - s.fy) + c10 * s.fy;
    T c1 = c01 * (1 - s.fy) + c11 * s.fy;
    return c0 * (1 - s.fz) + c1 * s.fz;
}

}  // namespace detail

/// Trilinear interpolation at a continuous voxel coordinate. Coordinates are
/// clamped to the grid, so the result is defined everywhere.
inline double trilinear_sample(const Volume3& vol, const Vec3& p) {
    auto s = detail::stencil(vol.dims(), p);
    return detail::blend<double>(s, [&](int i, int j, int k) { return vol(i, j, k); });
}

inline Vec3 trilinear_sample(const VectorField3& field, const Vec3& p) {
    auto s = detail::stencil(field.dims(), p);
    return detail::blend<Vec3>(s, [&](int i, int j, int k) { return field(i, j, k); });
}

/// Sampled, truncated Gaussian used by the separable filters.
struct GaussianKernel {
    double sigma = 1.0;
    int half_width = 3;

    static GaussianKernel with_sigma(double sigma) {
        require(sigma > 0.0, "Gaussian sigma must be > 0");
        return {sigma, std::max(1, static_cast<int>(std::ceil(3.0 * sigma)))};
    }

    void validate() const {
        require(sigma > 0.0, "Gaussian sigma must be > 0");
        require(half_width >= 1, "Gaussian half_width must be >= 1");
    }

    /// 2*half_width+1 weights, normalized to sum 1.
    std::vector<double> weights() const {
        validate();
        std::vector<double> w(2 * half_width + 1);
        double sum = 0.0;
        for (int t = -half_width; t <= half_width; ++t) {
            double v = std::exp(-0.5 * t * t / (sigma * sigma));
            w[t + half_width] = v;
            sum += v;
        }
        for (double& v : w) v /= sum;
        return w;
    }
};

/// Centered normal density K_sigma(d).
inline double gaussian_density(double d, double sigma) {
    return std::exp(-0.5 * d * d / (sigma * sigma)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
}

/// K_sigma restricted to a ball: every integer offset o with |o| < h and its weight.
struct WindowKernel {
    struct Tap {
        int dx, dy, dz;
        double weight;
    };
    double sigma = 1.0;
    int h = 2;
    std::vector<Tap> taps;

    WindowKernel(double sigma_, int h_) : sigma(sigma_), h(h_) {
        require(sigma > 0.0, "window kernel sigma must be > 0");
        require(h >= 1, "window kernel radius h must be >= 1");
        for (int dz = -h; dz <= h; ++dz)
            for (int dy = -h; dy <= h; ++dy)
                for (int dx = -h; dx <= h; ++dx) {
                    double d = std::sqrt(static_cast<double>(dx * dx + dy * dy + dz * dz));
                    if (d < h) taps.push_back({dx, dy, dz, gaussian_density(d, sigma)});
                }
    }

    /// K~(d): K_sigma(d) inside the window, 0 outside.
    double operator()(double d) const { return std::abs(d) < h ? gaussian_density(d, sigma) : 0.0; }

    double weight_sum() const {
        double s = 0.0;
        for (const auto& t : taps) s += t.weight;
        return s;
    }
};

/// Windowed sum out(x) = sum_o w(o) * in(x + o), replicate padding.
inline Volume3 window_sum(const Volume3& in, const WindowKernel& kernel) {
    const Dims& d = in.dims();
    Volume3 out(d, 0.0, in.spacing());
    const int h = kernel.h;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const bool interior = i >= h && i < d.nx - h && j >= h && j < d.ny - h && k >= h && k < d.nz - h;
                double acc = 0.0;
                if (interior) {
                    for (const auto& t : kernel.taps) acc += t.weight * in(i + t.dx, j + t.dy, k + t.dz);
                } else {
                    for (const auto& t : kernel.taps) acc += t.weight * in.clamped(i + t.dx, j + t.dy, k + t.dz);
                }
                out(i, j, k) = acc;
            }
    return out;
}

/// 1D convolution along one axis (0 = x, 1 = y, 2 = z) with replicate padding.
/// `weights` has odd length and is centered.
inline Volume3 convolve_axis(const Volume3& in, std::span<const double> weights, int axis) {
    require(weights.size() % 2 == 1, "convolution weights must have odd length");
    const Dims& d = in.dims();
    const int half = static_cast<int>(weights.size() / 2);
    const int n = d[axis];
    Volume3 out(d, 0.0, in.spacing());
    std::vector<double> line(static_cast<std::size_t>(n + 2 * half));

    auto run = [&](auto&& get, auto&& put) {
        for (int t = -half; t < n + half; ++t) line[t + half] = get(std::clamp(t, 0, n - 1));
        for (int t = 0; t < n; ++t) {
            double acc = 0.0;
            for (int w = 0; w < static_cast<int>(weights.size()); ++w) acc += weights[w] * line[t + w];
            put(t, acc);
        }
    };

    if (axis == 0) {
        for (int k = 0; k < d.nz; ++k)
            for (int j = 0; j < d.ny; ++j)
                run([&](int t) { return in(t, j, k); }, [&](int t, double v) { out(t, j, k) = v; });
    } else if (axis == 1) {
        for (int k = 0; k < d.nz; ++k)
            for (int i = 0; i < d.nx; ++i)
                run([&](int t) { return in(i, t, k); }, [&](int t, double v) { out(i, t, k) = v; });
    } else {
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i)
                run([&](int t) { return in(i, j, t); }, [&](int t, double v) { out(i, j, t) = v; });
    }
    return out;
}

/// Separable isotropic Gaussian filter, X then Y then Z.
inline Volume3 gaussian_filter(const Volume3& vol, const GaussianKernel& kernel) {
    const auto w = kernel.weights();
    return convolve_axis(convolve_axis(convolve_axis(vol, w, 0), w, 1), w, 2);
}

inline Volume3 gaussian_filter(const Volume3& vol, double sigma) {
    return gaussian_filter(vol, GaussianKernel::with_sigma(sigma));
}

/// out(x) = in(2x); output dims are floor(dims / 2).
inline Volume3 subsample2(const Volume3& vol) {
    const Dims& d = vol.dims();
    if (d.nx < 2 || d.ny < 2 || d.nz < 2)
        throw PyramidTooDeep("cannot subsample a " + d.str() + " volume: pyramid too deep");
    Dims o{d.nx / 2, d.ny / 2, d.nz / 2};
    Spacing s = vol.spacing();
    Volume3 out(o, 0.0, Spacing{2 * s.sx, 2 * s.sy, 2 * s.sz});
    for (int k = 0; k < o.nz; ++k)
        for (int j = 0; j < o.ny; ++j)
            for (int i = 0; i < o.nx; ++i) out(i, j, k) = vol(2 * i, 2 * j, 2 * k);
    return out;
}

struct Gradient3 {
    Volume3 gx, gy, gz;
    const Volume3& operator[](int axis) const { return axis == 0 ? gx : (axis == 1 ? gy : gz); }
};

/// 3D Scharr operator: central difference (-1, 0, 1)/2 along the derivative
/// axis and (3, 10, 3)/16 smoothing along the other two.
inline Gradient3 scharr_gradient(const Volume3& vol) {
    static constexpr std::array<double, 3> diff{-0.5, 0.0, 0.5};
    static constexpr std::array<double, 3> smooth{3.0 / 16.0, 10.0 / 16.0, 3.0 / 16.0};
    auto along = [&](int axis) {
        Volume3 v = vol;
        for (int a = 0; a < 3; ++a) v = convolve_axis(v, a == axis ? std::span<const double>(diff) : std::span<const double>(smooth), a);
        return v;
    };
    return {along(0), along(1), along(2)};
}

/// out(x) = vol(x + dvf(x)), trilinear with clamped coordinates.
inline Volume3 warp_pull(const Volume3& vol, const VectorField3& dvf) {
    const Dims& d = vol.dims();
    require(d == dvf.dims(), "warp_pull: volume " + d.str() + " and field " + dvf.dims().str() + " differ");
    Volume3 out(d, 0.0, vol.spacing());
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                Vec3 p{static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
                out(i, j, k) = trilinear_sample(vol, p + dvf(i, j, k));
            }
    return out;
}

}  // namespace motionpred
