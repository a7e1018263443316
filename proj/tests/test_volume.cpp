#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "motionpred/volume.hpp"
#include "motionpred/volume_io.hpp"
#include "support.hpp"

using namespace motionpred;
using mp_test::random_field;
using mp_test::random_volume;

namespace {

/// Explicit 8-corner blend, written out term by term.
double corner_oracle(const Volume3& v, Vec3 p) {
    const Dims& d = v.dims();
    auto cl = [](double x, int n) { return std::clamp(x, 0.0, double(n - 1)); };
    const double x = cl(p.x, d.nx), y = cl(p.y, d.ny), z = cl(p.z, d.nz);
    const int x0 = int(std::floor(x)), y0 = int(std::floor(y)), z0 = int(std::floor(z));
    const int x1 = std::min(x0 + 1, d.nx - 1), y1 = std::min(y0 + 1, d.ny - 1), z1 = std::min(z0 + 1, d.nz - 1);
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    return v(x0, y0, z0) * (1 - fx) * (1 - fy) * (1 - fz) + v(x1, y0, z0) * fx * (1 - fy) * (1 - fz) +
           v(x0, y1, z0) * (1 - fx) * fy * (1 - fz) + v(x1, y1, z0) * fx * fy * (1 - fz) +
           v(x0, y0, z1) * (1 - fx) * (1 - fy) * fz + v(x1, y0, z1) * fx * (1 - fy) * fz +
           v(x0, y1, z1) * (1 - fx) * fy * fz + v(x1, y1, z1) * fx * fy * fz;
}

Volume3 affine(Dims d, double a, double b, double c, double e) {
    Volume3 v(d);
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) v(i, j, k) = a + b * i + c * j + e * k;
    return v;
}

int clampi(int v, int n) { return std::clamp(v, 0, n - 1); }

}  // namespace

TEST(Trilinear, LatticePointReturnsStoredValue) {
    const auto v = random_volume({5, 6, 7}, 1);
    EXPECT_EQ(trilinear_sample(v, {2, 3, 4}), v(2, 3, 4));
}

TEST(Trilinear, MidpointOfTwoVoxels) {
    Volume3 v({2, 1, 1});
    v(1, 0, 0) = 1.0;
    EXPECT_DOUBLE_EQ(trilinear_sample(v, {0.5, 0, 0}), 0.5);
}

TEST(Trilinear, RandomPointsMatchCornerOracle) {
    const auto v = random_volume({6, 5, 7}, 2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 7.5);
    for (int t = 0; t < 500; ++t) {
        const Vec3 p{U(rng), U(rng), U(rng)};
        EXPECT_NEAR(trilinear_sample(v, p), corner_oracle(v, p), 1e-12);
    }
}

TEST(Trilinear, ExactOnAffineFields) {
    const auto v = affine({8, 8, 8}, 0.3, 1.5, -2.0, 0.7);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 7.0);
    for (int t = 0; t < 200; ++t) {
        const Vec3 p{U(rng), U(rng), U(rng)};
        EXPECT_NEAR(trilinear_sample(v, p), 0.3 + 1.5 * p.x - 2.0 * p.y + 0.7 * p.z, 1e-12);
    }
}

TEST(Trilinear, OutsideCoordinatesClampToBoundary) {
    const auto v = random_volume({4, 4, 4}, 5);
    EXPECT_EQ(trilinear_sample(v, {-3.0, 1.0, 2.0}), v(0, 1, 2));
    EXPECT_EQ(trilinear_sample(v, {1.0, 9.0, 2.0}), v(1, 3, 2));
}

TEST(GaussianKernel, WeightsNormalizedAndTruncatedAtThreeSigma) {
    for (double s : {0.2, 0.5, 1.0, 2.0}) {
        const auto k = GaussianKernel::with_sigma(s);
        EXPECT_EQ(k.half_width, std::max(1, int(std::ceil(3 * s))));
        double sum = 0;
        for (double w : k.weights()) sum += w;
        EXPECT_NEAR(sum, 1.0, 1e-15);
    }
    EXPECT_THROW(GaussianKernel::with_sigma(0.0), ConfigError);
    EXPECT_THROW((GaussianKernel{1.0, 0}.validate()), ConfigError);
}

TEST(GaussianFilter, ConstantStaysConstant) {
    const Volume3 v({6, 5, 4}, 3.25);
    const auto f = gaussian_filter(v, 1.3);
    double sum = 0;
    for (std::size_t n = 0; n < f.size(); ++n) {
        EXPECT_NEAR(f[n], 3.25, 1e-12);
        sum += f[n];
    }
    EXPECT_NEAR(sum, 3.25 * v.size(), 1e-12 * 3.25 * v.size());
}

TEST(GaussianFilter, ImpulseMatchesDenseConvolution) {
    const Dims d{9, 9, 9};
    Volume3 v(d);
    v(4, 4, 4) = 1.0;
    const auto k = GaussianKernel::with_sigma(1.0);
    const auto w = k.weights();
    const auto f = gaussian_filter(v, k);
    EXPECT_NEAR(f(4, 4, 4), w[3] * w[3] * w[3], 1e-15);
    // Dense 3D convolution with the product kernel and replicate padding.
    const int h = k.half_width;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                double acc = 0;
                for (int c = -h; c <= h; ++c)
                    for (int b = -h; b <= h; ++b)
                        for (int a = -h; a <= h; ++a)
                            acc += w[a + h] * w[b + h] * w[c + h] *
                                   v(clampi(x + a, d.nx), clampi(y + b, d.ny), clampi(z + c, d.nz));
                EXPECT_NEAR(f(x, y, z), acc, 1e-15);
            }
}

TEST(GaussianFilter, InteriorRampUnchanged) {
    const auto v = affine({16, 5, 5}, 1.0, 0.5, 0.0, 0.0);
    const auto k = GaussianKernel::with_sigma(1.0);
    const auto f = gaussian_filter(v, k);
    for (int x = k.half_width; x < 16 - k.half_width; ++x) EXPECT_NEAR(f(x, 2, 2), v(x, 2, 2), 1e-12);
}

TEST(GaussianFilter, AxisOrderCommutes) {
    const auto v = random_volume({7, 6, 8}, 6);
    const auto w = GaussianKernel::with_sigma(0.8).weights();
    const auto xyz = gaussian_filter(v, GaussianKernel::with_sigma(0.8));
    const auto zyx = convolve_axis(convolve_axis(convolve_axis(v, w, 2), w, 1), w, 0);
    for (std::size_t n = 0; n < v.size(); ++n) EXPECT_NEAR(xyz[n], zyx[n], 1e-12);
}

TEST(Subsample, EvenAndOddDims) {
    const auto v4 = random_volume({4, 4, 4}, 7);
    const auto s4 = subsample2(v4);
    EXPECT_EQ(s4.dims(), (Dims{2, 2, 2}));
    EXPECT_EQ(s4(1, 0, 1), v4(2, 0, 2));
    EXPECT_EQ(subsample2(random_volume({5, 5, 5}, 8)).dims(), (Dims{2, 2, 2}));
}

TEST(Subsample, MatchesIndexDoublingOracle) {
    const auto v = random_volume({8, 8, 8}, 9);
    const auto s = subsample2(v);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j)
            for (int i = 0; i < 4; ++i) EXPECT_EQ(s(i, j, k), v(2 * i, 2 * j, 2 * k));
}

TEST(Subsample, TooSmallRaisesPyramidTooDeep) {
    EXPECT_THROW(subsample2(Volume3({4, 1, 4})), PyramidTooDeep);
}

TEST(Scharr, ConstantGivesZero) {
    const auto g = scharr_gradient(Volume3({5, 5, 5}, 2.0));
    for (int a = 0; a < 3; ++a)
        for (std::size_t n = 0; n < g[a].size(); ++n) EXPECT_EQ(g[a][n], 0.0);
}

TEST(Scharr, RampGivesSlope) {
    const auto g = scharr_gradient(affine({7, 7, 7}, 0.0, 2.5, 0.0, 0.0));
    for (int k = 1; k < 6; ++k)
        for (int j = 1; j < 6; ++j)
            for (int i = 1; i < 6; ++i) {
                EXPECT_NEAR(g.gx(i, j, k), 2.5, 1e-12);
                EXPECT_NEAR(g.gy(i, j, k), 0.0, 1e-12);
                EXPECT_NEAR(g.gz(i, j, k), 0.0, 1e-12);
            }
}

TEST(Scharr, MatchesTwentySevenPointStencil) {
    const auto v = random_volume({5, 5, 5}, 10);
    const auto g = scharr_gradient(v);
    const double diff[3] = {-0.5, 0.0, 0.5};
    const double smooth[3] = {3.0 / 16, 10.0 / 16, 3.0 / 16};
    for (int axis = 0; axis < 3; ++axis)
        for (int z = 0; z < 5; ++z)
            for (int y = 0; y < 5; ++y)
                for (int x = 0; x < 5; ++x) {
                    double acc = 0;
                    for (int c = -1; c <= 1; ++c)
                        for (int b = -1; b <= 1; ++b)
                            for (int a = -1; a <= 1; ++a) {
                                const int o[3] = {a, b, c};
                                double w = 1;
                                for (int t = 0; t < 3; ++t) w *= (t == axis ? diff : smooth)[o[t] + 1];
                                acc += w * v(clampi(x + a, 5), clampi(y + b, 5), clampi(z + c, 5));
                            }
                    EXPECT_NEAR(g[axis](x, y, z), acc, 1e-14);
                }
}

TEST(WarpPull, ZeroFieldIsIdentity) {
    const auto v = random_volume({5, 4, 6}, 11);
    const auto w = warp_pull(v, VectorField3(v.dims()));
    for (std::size_t n = 0; n < v.size(); ++n) EXPECT_EQ(w[n], v[n]);
}

TEST(WarpPull, UnitShiftOnRamp) {
    const auto v = affine({8, 4, 4}, 0.0, 1.5, 0.0, 0.0);
    const auto w = warp_pull(v, VectorField3(v.dims(), {1, 0, 0}));
    for (int x = 0; x < 7; ++x) EXPECT_NEAR(w(x, 2, 2), v(x, 2, 2) + 1.5, 1e-12);
}

TEST(WarpPull, MatchesPointwiseSampling) {
    const auto v = random_volume({6, 6, 6}, 12);
    const auto f = random_field(v.dims(), 13, 1.5);
    const auto w = warp_pull(v, f);
    for (int k = 0; k < 6; ++k)
        for (int j = 0; j < 6; ++j)
            for (int i = 0; i < 6; ++i)
                EXPECT_EQ(w(i, j, k), trilinear_sample(v, Vec3{double(i), double(j), double(k)} + f(i, j, k)));
}

// ---- file format ----

class VolumeIo : public ::testing::Test {
protected:
    std::filesystem::path dir = mp_test::scratch_dir("volume_io");

    void write_header(const std::string& name, const std::string& json) {
        std::ofstream(dir / name) << json;
    }
    void write_raw(const std::string& name, std::size_t bytes) {
        std::ofstream out(dir / name, std::ios::binary);
        std::vector<char> z(bytes, 0);
        out.write(z.data(), static_cast<std::streamsize>(z.size()));
    }
    template <class Fn>
    FormatFault fault_of(Fn&& fn) {
        try {
            fn();
        } catch (const VolumeFormatError& e) {
            return e.fault();
        }
        ADD_FAILURE() << "no VolumeFormatError thrown";
        return FormatFault::malformed_header;
    }
};

TEST_F(VolumeIo, DoubleRoundTripIsBitIdentical) {
    Volume3 v = random_volume({4, 4, 4}, 14);
    v.set_spacing({0.5, 1.0, 2.5});
    save_volume(v, dir / "v.json", Dtype::f64);
    const auto r = load_volume(dir / "v.json");
    EXPECT_EQ(r.dims(), v.dims());
    EXPECT_EQ(r.spacing().sz, 2.5);
    for (std::size_t n = 0; n < v.size(); ++n) EXPECT_EQ(r[n], v[n]);
}

TEST_F(VolumeIo, FloatAndU16RoundTrips) {
    Volume3 v({3, 2, 2});
    for (std::size_t n = 0; n < v.size(); ++n) v[n] = 0.25 * double(n) + 7.0;
    save_volume(v, dir / "f.json", Dtype::f32);
    const auto f = load_volume(dir / "f.json");
    for (std::size_t n = 0; n < v.size(); ++n) EXPECT_EQ(f[n], v[n]);

    for (std::size_t n = 0; n < v.size(); ++n) v[n] = double(n * 1000);
    save_volume(v, dir / "u.json", Dtype::u16);
    const auto u = load_volume(dir / "u.json");
    for (std::size_t n = 0; n < v.size(); ++n) EXPECT_EQ(u[n], v[n]);
}

TEST_F(VolumeIo, VectorFieldRoundTrip) {
    const auto f = random_field({3, 4, 5}, 15, 2.0);
    save_vector_field(f, dir / "dvf.json", Dtype::f64);
    const auto r = load_vector_field(dir / "dvf.json");
    for (std::size_t n = 0; n < f.size(); ++n) {
        EXPECT_EQ(r[n].x, f[n].x);
        EXPECT_EQ(r[n].y, f[n].y);
        EXPECT_EQ(r[n].z, f[n].z);
    }
}

TEST_F(VolumeIo, TruncatedPayload) {
    write_header("t.json", R"({"dims":[2,2,2],"spacing":[1,1,1],"dtype":"f32","byte_order":"little","payloads":["t.raw"]})");
    write_raw("t.raw", 7 * 4);
    EXPECT_EQ(fault_of([&] { load_volume(dir / "t.json"); }), FormatFault::truncated_payload);
}

TEST_F(VolumeIo, OversizedPayloadIsDimensionMismatch) {
    write_header("o.json", R"({"dims":[2,2,2],"spacing":[1,1,1],"dtype":"f32","byte_order":"little","payloads":["o.raw"]})");
    write_raw("o.raw", 9 * 4);
    EXPECT_EQ(fault_of([&] { load_volume(dir / "o.json"); }), FormatFault::dimension_mismatch);
}

TEST_F(VolumeIo, MalformedHeaders) {
    write_header("z.json", R"({"dims":[2,0,2],"spacing":[1,1,1],"dtype":"f32","byte_order":"little","payloads":["z.raw"]})");
    EXPECT_EQ(fault_of([&] { load_volume(dir / "z.json"); }), FormatFault::malformed_header);
    write_header("j.json", "{not json");
    EXPECT_EQ(fault_of([&] { load_volume(dir / "j.json"); }), FormatFault::malformed_header);
    write_header("d.json", R"({"dims":[1,1,1],"spacing":[1,1,1],"dtype":"i8","byte_order":"little","payloads":["d.raw"]})");
    EXPECT_EQ(fault_of([&] { load_volume(dir / "d.json"); }), FormatFault::malformed_header);
}

TEST_F(VolumeIo, BigEndianPayload) {
    write_header("b.json", R"({"dims":[2,1,1],"spacing":[1,1,1],"dtype":"u16","byte_order":"big","payloads":["b.raw"]})");
    std::ofstream out(dir / "b.raw", std::ios::binary);
    const unsigned char bytes[4] = {0x01, 0x02, 0x00, 0x05};
    out.write(reinterpret_cast<const char*>(bytes), 4);
    out.close();
    const auto v = load_volume(dir / "b.json");
    EXPECT_EQ(v[0], 258.0);
    EXPECT_EQ(v[1], 5.0);
}

TEST_F(VolumeIo, MissingFileIsIoError) {
    EXPECT_THROW(load_volume(dir / "absent.json"), IoError);
}
