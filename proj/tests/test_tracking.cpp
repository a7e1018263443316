#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "motionpred/csv_io.hpp"
#include "motionpred/tracking.hpp"
#include "support.hpp"

using namespace motionpred;

namespace {

TrajectorySet random_series(int N, int r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 2.0);
    TrajectorySet ts;
    ts.r = r;
    ts.series.resize(N, 3 * r);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < 3 * r; ++c) ts.series(n, c) = g(rng) + 0.5 * c;
    return ts;
}

}  // namespace

TEST(Extract, ZeroFieldsGiveZeroSeries) {
    std::vector<VectorField3> f(4, VectorField3({5, 5, 5}));
    const auto ts = extract_trajectories(f, {{1, 2, 3}, {2.5, 2.5, 0.5}});
    EXPECT_EQ(ts.n_frames(), 4);
    EXPECT_EQ(ts.series.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Extract, ConstantFieldScaledBySpacing) {
    std::vector<VectorField3> f(3, VectorField3({4, 4, 4}, {0, 0, 2}));
    const auto ts = extract_trajectories(f, {{1.5, 1.5, 1.5}});
    for (int n = 0; n < 3; ++n) {
        EXPECT_EQ(ts.series(n, 2), 2.0);
        EXPECT_EQ(ts.series(n, 0), 0.0);
    }
    const auto mm = extract_trajectories(f, {{1.5, 1.5, 1.5}}, {1.0, 1.0, 2.5});
    EXPECT_EQ(mm.series(0, 2), 5.0);
}

TEST(Extract, LatticePointReturnsStoredVector) {
    const auto f = mp_test::random_field({5, 6, 7}, 3, 1.0);
    const auto ts = extract_trajectories({f}, {{2, 3, 4}});
    EXPECT_EQ(ts.series(0, 0), f(2, 3, 4).x);
    EXPECT_EQ(ts.series(0, 1), f(2, 3, 4).y);
    EXPECT_EQ(ts.series(0, 2), f(2, 3, 4).z);
}

TEST(Extract, LinearInField) {
    const auto f = mp_test::random_field({5, 5, 5}, 4, 1.0);
    VectorField3 g(f.dims());
    for (std::size_t n = 0; n < f.size(); ++n) g[n] = -2.5 * f[n];
    const std::vector<Vec3> pts{{1.2, 3.3, 0.4}, {3.9, 0.1, 2.2}};
    const auto a = extract_trajectories({f}, pts), b = extract_trajectories({g}, pts);
    for (int c = 0; c < 6; ++c) EXPECT_NEAR(b.series(0, c), -2.5 * a.series(0, c), 1e-14);
}

TEST(Extract, OutOfGridPointRejected) {
    std::vector<VectorField3> f(1, VectorField3({4, 4, 4}));
    EXPECT_THROW(extract_trajectories(f, {{1, 1, 4.5}}), ConfigError);
    EXPECT_THROW(extract_trajectories(f, {{-0.1, 1, 1}}), ConfigError);
}

TEST(Norm, TrainingRowsStandardized) {
    const auto ts = random_series(60, 2, 5);
    const SplitSpec split{40, 10, 10};
    const auto st = fit_norm(ts, split);
    const auto z = apply_norm(ts.series, st);
    for (int c = 0; c < 6; ++c) {
        const auto col = z.col(c).head(40);
        const double m = col.mean();
        EXPECT_NEAR(m, 0.0, 1e-10);
        EXPECT_NEAR((col.array() - m).square().mean(), 1.0, 1e-10);
    }
}

TEST(Norm, ConstantColumnNamed) {
    auto ts = random_series(30, 2, 6);
    ts.series.col(4).setConstant(1.5);
    try {
        fit_norm(ts, {20, 5, 5});
        FAIL() << "expected DegenerateSignal";
    } catch (const DegenerateSignal& e) {
        EXPECT_NE(std::string(e.what()).find("marker 2 axis y"), std::string::npos) << e.what();
    }
}

TEST(Norm, RoundTripIdentity) {
    const auto ts = random_series(50, 3, 7);
    const auto st = fit_norm(ts, {30, 10, 10});
    const auto back = invert_norm(apply_norm(ts.series, st), st);
    EXPECT_LE((back - ts.series).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Norm, IgnoresHeldOutRows) {
    auto ts = random_series(50, 2, 8);
    const SplitSpec split{30, 10, 10};
    const auto a = fit_norm(ts, split);
    ts.series.bottomRows(20).setRandom();
    const auto b = fit_norm(ts, split);
    EXPECT_TRUE(a.mu == b.mu);
    EXPECT_TRUE(a.sigma == b.sigma);
}

TEST(Split, Validation) {
    EXPECT_NO_THROW((SplitSpec{10, 5, 5}.validate(20)));
    EXPECT_THROW((SplitSpec{10, 5, 6}.validate(20)), ConfigError);
    EXPECT_THROW((SplitSpec{10, 0, 5}.validate(20)), ConfigError);
}

TEST(Amplitude, ConstantSeriesIsZero) {
    TrajectorySet ts;
    ts.r = 1;
    ts.series = Eigen::MatrixXd::Constant(10, 3, 4.0);
    EXPECT_EQ(motion_amplitude(ts)(0), 0.0);
}

TEST(Amplitude, SinusoidPeakToPeak) {
    TrajectorySet ts;
    ts.r = 1;
    ts.series = Eigen::MatrixXd::Zero(41, 3);
    for (int n = 0; n < 41; ++n) ts.series(n, 2) = 3.0 * std::sin(2 * std::numbers::pi * n / 8.0);
    EXPECT_NEAR(motion_amplitude(ts)(0), 6.0, 1e-12);
}

TEST(Amplitude, MatchesAllPairsOracle) {
    const auto ts = random_series(25, 3, 9);
    const auto amp = motion_amplitude(ts);
    for (int p = 0; p < 3; ++p) {
        double best = 0;
        for (int a = 0; a < 25; ++a)
            for (int b = 0; b < 25; ++b) best = std::max(best, (ts.displacement(a, p) - ts.displacement(b, p)).norm());
        EXPECT_NEAR(amp(p), best, 1e-12);
    }
}

TEST(TrajectoryCsv, RoundTrip) {
    const auto dir = mp_test::scratch_dir("traj_csv");
    const auto ts = random_series(12, 2, 10);
    write_trajectories(ts, dir / "t.csv");
    const auto back = read_trajectories(dir / "t.csv");
    EXPECT_EQ(back.r, 2);
    EXPECT_TRUE(back.series == ts.series);
    std::ifstream in(dir / "t.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "t_index,marker,ux_mm,uy_mm,uz_mm");
}

TEST(TrajectoryCsv, IncompleteFileRejected) {
    const auto dir = mp_test::scratch_dir("traj_bad");
    std::ofstream(dir / "t.csv") << "t_index,marker,ux_mm,uy_mm,uz_mm\n1,1,0,0,0\n1,2,0,0,0\n2,1,0,0,0\n";
    EXPECT_THROW(read_trajectories(dir / "t.csv"), IoError);
}
