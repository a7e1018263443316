#pragma once

// Synthetic data: sequence extension of a 10-phase breathing cycle with a
// sinusoidal craniocaudal drift and Poisson noise, analytic Gaussian-blob
// phantoms, and marker trajectory fixtures.

#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "motionpred/error.hpp"
#include "motionpred/seeding.hpp"
#include "motionpred/tracking.hpp"
#include "motionpred/volume.hpp"

namespace motionpred {

struct DriftSpec {
    double amplitude = 0.0;  ///< A, mm
    double period = 400.0;   ///< T, s
    double sample_dt = 0.4;  ///< s between frames (2.5 Hz)
    int n_frames = 2400;

    void validate() const {
        require(amplitude >= 0.0, "drift amplitude must be >= 0");
        require(period > 0.0, "drift period must be > 0");
        require(sample_dt > 0.0, "sample_dt must be > 0");
        require(n_frames >= 1, "n_frames must be >= 1");
    }
    /// Frame k is 1-based; t_1 = 0.
    double time(int k) const { return (k - 1) * sample_dt; }
    double offset(int k) const { return amplitude * std::sin(2.0 * std::numbers::pi * time(k) / period); }
};

struct NoiseSpec {
    bool enabled = true;
    double lambda = 1000.0;
    std::uint64_t seed = 0;
    /// Intensity range the noise is scaled to; derived from the base frames when unset.
    std::optional<double> dynamic_range;
    double clamp_lo = 0.0;
    double clamp_hi = 65535.0;

    void validate() const {
        require(lambda > 0.0, "Poisson lambda must be > 0");
        require(clamp_lo <= clamp_hi, "noise clamp range is inverted");
    }
};

/// Additive zero-mean Poisson noise: v + s (n - lambda), n ~ Poisson(lambda),
/// s = range / lambda, clamped to [clamp_lo, clamp_hi].
inline void add_poisson_noise(Volume3& vol, const NoiseSpec& noise, double range, std::uint64_t stream_seed) {
    std::mt19937_64 rng(stream_seed);
    std::poisson_distribution<long long> pois(noise.lambda);
    const double scale = range / noise.lambda;
    for (double& v : vol.data()) {
        const double n = static_cast<double>(pois(rng));
        v = std::clamp(v + scale * (n - noise.lambda), noise.clamp_lo, noise.clamp_hi);
    }
}

/// Extends a 10-phase cycle to drift.n_frames frames. Frame k (1-based) is
/// phase ((k-1) mod 10) + 1 of the (optionally permuted) base, resampled at
/// z + A sin(2 pi t_k / T), then noised with a per-frame stream.
inline std::vector<Volume3> extend_sequence(const std::vector<Volume3>& base, const DriftSpec& drift,
                                            const NoiseSpec& noise, std::vector<int> permutation = {}) {
    require(base.size() == 10, "extend_sequence needs exactly 10 base phases, got " + std::to_string(base.size()));
    drift.validate();
    noise.validate();
    const Dims& d = base.front().dims();
    for (const auto& b : base) require(b.dims() == d, "extend_sequence: base phases have different dims");
    if (permutation.empty()) {
        permutation.resize(10);
        std::iota(permutation.begin(), permutation.end(), 0);
    }
    require(permutation.size() == 10, "phase permutation must have 10 entries");
    {
        std::vector<int> sorted = permutation;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < 10; ++i) require(sorted[i] == i, "phase permutation must be a permutation of 0..9");
    }

    double range = 0.0;
    if (noise.enabled) {
        if (noise.dynamic_range) {
            range = *noise.dynamic_range;
        } else {
            double lo = base.front().min(), hi = base.front().max();
            for (const auto& b : base) {
                lo = std::min(lo, b.min());
                hi = std::max(hi, b.max());
            }
            range = hi - lo;
        }
    }

    std::vector<Volume3> out;
    out.reserve(static_cast<std::size_t>(drift.n_frames));
    for (int k = 1; k <= drift.n_frames; ++k) {
        const Volume3& src = base[static_cast<std::size_t>(permutation[static_cast<std::size_t>((k - 1) % 10)])];
        const double shift = drift.offset(k) / src.spacing().sz;  // mm -> voxels
        Volume3 frame(d, 0.0, src.spacing());
        if (shift == 0.0) {
            frame = src;
        } else {
            for (int z = 0; z < d.nz; ++z)
                for (int y = 0; y < d.ny; ++y)
                    for (int x = 0; x < d.nx; ++x)
                        frame(x, y, z) = trilinear_sample(src, {double(x), double(y), z + shift});
        }
        if (noise.enabled) add_poisson_noise(frame, noise, range, derive_seed(noise.seed, "poisson", k));
        out.push_back(std::move(frame));
    }
    return out;
}

struct Blob {
    Vec3 center;
    Vec3 sigma{1.0, 1.0, 1.0};
    double amplitude = 1.0;
};

inline double blob_value(const Blob& b, const Vec3& p) {
    double q = 0.0;
    for (int a = 0; a < 3; ++a) {
        double t = (p[a] - b.center[a]) / b.sigma[a];
        q += t * t;
    }
    return b.amplitude * std::exp(-0.5 * q);
}

/// Background plus a sum of anisotropic Gaussian blobs, evaluated at voxel centers.
inline Volume3 make_phantom(Dims dims, const std::vector<Blob>& blobs, double background = 0.0) {
    Volume3 v(dims, background);
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                double s = background;
                for (const auto& b : blobs) s += blob_value(b, {double(i), double(j), double(k)});
                v(i, j, k) = s;
            }
    return v;
}

/// Ten breathing phases of a blob phantom: at phase f every blob is displaced
/// by `motion` * sin(2 pi f / 10) voxels (per-axis amplitudes).
inline std::vector<Volume3> make_breathing_phases(Dims dims, const std::vector<Blob>& blobs, const Vec3& motion,
                                                  double background = 0.0) {
    std::vector<Volume3> phases;
    for (int f = 0; f < 10; ++f) {
        const double s = std::sin(2.0 * std::numbers::pi * f / 10.0);
        std::vector<Blob> moved = blobs;
        for (auto& b : moved) b.center += s * motion;
        phases.push_back(make_phantom(dims, moved, background));
    }
    return phases;
}

/// Cyclic motion of one marker: per-axis sinusoid amplitude (mm) and phase (rad).
struct MarkerMotion {
    Vec3 amplitude;
    Vec3 phase;
    double period = 4.0;  ///< s
};

/// Synthetic trajectories: sinusoid + slow z drift + iid Gaussian noise.
/// Frame n (0-based) is sampled at t = n * drift.sample_dt.
inline TrajectorySet make_marker_series(int n_frames, const std::vector<MarkerMotion>& markers, const DriftSpec& drift,
                                        double noise_sigma, std::uint64_t seed) {
    require(n_frames >= 1, "make_marker_series: n_frames must be >= 1");
    require(!markers.empty(), "make_marker_series: no markers");
    require(noise_sigma >= 0.0, "make_marker_series: noise sigma must be >= 0");
    TrajectorySet ts;
    ts.r = static_cast<int>(markers.size());
    ts.series.resize(n_frames, 3 * ts.r);
    std::mt19937_64 rng(derive_seed(seed, "marker-noise"));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int n = 0; n < n_frames; ++n) {
        const double t = n * drift.sample_dt;
        const double drift_z = drift.amplitude * std::sin(2.0 * std::numbers::pi * t / drift.period);
        for (int p = 0; p < ts.r; ++p) {
            const MarkerMotion& m = markers[static_cast<std::size_t>(p)];
            for (int a = 0; a < 3; ++a) {
                double v = m.amplitude[a] * std::sin(2.0 * std::numbers::pi * t / m.period + m.phase[a]);
                if (a == 2) v += drift_z;
                if (noise_sigma > 0.0) v += noise_sigma * gauss(rng);
                ts.series(n, 3 * p + a) = v;
            }
        }
    }
    return ts;
}

}  // namespace motionpred
