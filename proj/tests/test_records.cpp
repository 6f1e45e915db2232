#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "gmsynth/error.hpp"
#include "gmsynth/records.hpp"
#include "test_util.hpp"

using namespace gmsynth;
using gmtest::kPi;

TEST(Records, LoadsMinimalCsv) {
    const auto dir = gmtest::scratch_dir("records_csv");
    {
        std::ofstream f(dir / "r.csv");
        f << "# id=abc\n# dt=0.02\n0\n1\n0\n";
    }
    const AccelRecord r = load_record(dir / "r.csv");
    EXPECT_EQ(r.id, "abc");
    EXPECT_DOUBLE_EQ(r.dt, 0.02);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r.samples[1], 1.0);
}

TEST(Records, RejectsNanSample) {
    const auto dir = gmtest::scratch_dir("records_nan");
    {
        std::ofstream f(dir / "r.csv");
        f << "# id=x\n# dt=0.02\n0\nnan\n0\n";
    }
    EXPECT_THROW(load_record(dir / "r.csv"), DataError);
}

TEST(Records, RoundTripIsBitExact) {
    const auto dir = gmtest::scratch_dir("records_rt");
    AccelRecord r = gmtest::noise_record(5, 500, 0.01);
    r.samples[3] = 1.0 / 3.0;
    r.samples[4] = -2.2250738585072014e-308;
    for (const char* name : {"a.csv", "a.json"}) {
        save_record(r, dir / name);
        const AccelRecord b = load_record(dir / name);
        ASSERT_EQ(b.samples.size(), r.samples.size());
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(b.samples[i], r.samples[i]) << name << " " << i;
        EXPECT_EQ(b.dt, r.dt);
    }
}

TEST(Records, InvalidRecordRejected) {
    EXPECT_THROW(make_record("x", 0.0, {0.0, 1.0}), ValidationError);
    EXPECT_THROW(make_record("x", 0.01, {0.0}), ValidationError);
}

TEST(Husid, ZeroRecordHasZeroEnergy) {
    const auto r = make_record("z", 0.01, std::vector<double>(100, 0.0));
    EXPECT_EQ(husid(r).ia_total, 0.0);
    const auto im = intensity_measures(r);
    EXPECT_EQ(im.pga, 0.0);
    EXPECT_EQ(im.pgv, 0.0);
    EXPECT_EQ(im.ia, 0.0);
    EXPECT_EQ(im.d5_95, 0.0);
}

TEST(Husid, SineMatchesClosedForm) {
    const double A = 0.3, f = 2.0, dt = 0.001, T = 5.0;
    std::vector<double> a;
    for (int i = 0; i <= static_cast<int>(T / dt); ++i) a.push_back(A * std::sin(2 * kPi * f * i * dt));
    const auto r = make_record("s", dt, a);
    const double closed = 0.5 * kPi * A * A * T / 2.0;
    EXPECT_NEAR(husid(r).ia_total, closed, 1e-3 * closed);
    EXPECT_NEAR(husid(r).ia_total, gmtest::arias_oracle(a, dt), 1e-12);
}

TEST(Husid, QuadraticScalingAndMonotone) {
    auto r = gmtest::noise_record(9, 1000, 0.02);
    const HusidCurve h = husid(r);
    for (std::size_t i = 1; i < h.ia_cum.size(); ++i) EXPECT_GE(h.ia_cum[i], h.ia_cum[i - 1]);
    EXPECT_EQ(h.ia_cum.back(), h.ia_total);
    for (auto& v : r.samples) v *= 2.0;
    EXPECT_NEAR(husid(r).ia_total, 4.0 * h.ia_total, 1e-12 * h.ia_total);
}

TEST(IntensityMeasures, RampHasNinetyPercentDuration) {
    const auto r = gmtest::ramp_record(10.0, 0.01);
    EXPECT_NEAR(intensity_measures(r).d5_95, 9.0, 1e-9);
}

TEST(IntensityMeasures, HalfSinePulsePgv) {
    // a = A sin(pi t / Tp) on [0, Tp]: v_max = 2 A Tp / pi (in g*s)
    const double A = 0.5, Tp = 0.5, dt = 0.001;
    std::vector<double> a;
    for (int i = 0; i <= 2000; ++i) {
        const double t = i * dt;
        a.push_back(t <= Tp ? A * std::sin(kPi * t / Tp) : 0.0);
    }
    const auto im = intensity_measures(make_record("p", dt, a));
    const double closed = 2.0 * A * Tp / kPi * kGravityCmS2;
    EXPECT_NEAR(im.pgv, closed, 5e-3 * closed);
    EXPECT_DOUBLE_EQ(im.pga, A);
}

TEST(IntensityMeasures, InvariantToTrailingZeros) {
    auto r = gmtest::noise_record(2, 400, 0.02);
    r.samples.back() = 0.0;  // otherwise the trapezoid gains a half segment
    const auto a = intensity_measures(r);
    r.samples.insert(r.samples.end(), 300, 0.0);
    const auto b = intensity_measures(r);
    EXPECT_DOUBLE_EQ(a.pga, b.pga);
    EXPECT_DOUBLE_EQ(a.pgv, b.pgv);
    EXPECT_DOUBLE_EQ(a.ia, b.ia);
    EXPECT_NEAR(a.d5_95, b.d5_95, 1e-12);
}

namespace {

/// Brute-force rotation: the angle in [0, pi/2) minimizing |cross covariance|.
std::pair<double, double> sweep_rotation(const std::vector<double>& x, const std::vector<double>& y, double dt) {
    const PairCovariance c = pair_covariance(x, y);
    double best = 0.0, best_val = 1e300;
    const int N = 200000;
    for (int i = 0; i < N; ++i) {
        const double th = 0.5 * kPi * i / N;
        const double cs = std::cos(th), sn = std::sin(th);
        // cov(x cs + y sn, -x sn + y cs)
        const double v = std::abs((c.syy - c.sxx) * sn * cs + c.sxy * (cs * cs - sn * sn));
        if (v < best_val) {
            best_val = v;
            best = th;
        }
    }
    std::vector<double> xr(x.size()), yr(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xr[i] = x[i] * std::cos(best) + y[i] * std::sin(best);
        yr[i] = -x[i] * std::sin(best) + y[i] * std::cos(best);
    }
    return {best, std::max(gmtest::arias_oracle(xr, dt), gmtest::arias_oracle(yr, dt))};
}

}  // namespace

TEST(Rotation, UncorrelatedPairKeepsAngleZero) {
    auto x = gmtest::noise_record(3, 800, 0.02, 0.1);
    auto y = gmtest::noise_record(4, 800, 0.02, 0.05);
    // remove the sample correlation exactly
    const PairCovariance c = pair_covariance(x.samples, y.samples);
    double mx = 0;
    for (double v : x.samples) mx += v;
    mx /= x.size();
    for (std::size_t i = 0; i < x.size(); ++i) y.samples[i] -= c.sxy / c.sxx * (x.samples[i] - mx);
    const auto res = rotate_and_select(x, y);
    EXPECT_NEAR(res.angle, 0.0, 1e-9);
    EXPECT_NEAR(arias_intensity(res.record), arias_intensity(x), 1e-9 * arias_intensity(x));
}

TEST(Rotation, ScaledCopyMatchesAngleSweep) {
    const auto x = gmtest::noise_record(6, 1000, 0.02, 0.1);
    auto y = x;
    for (auto& v : y.samples) v *= 2.0;
    const auto res = rotate_and_select(x, y);
    const auto [angle, ia] = sweep_rotation(x.samples, y.samples, x.dt);
    EXPECT_NEAR(res.angle, angle, 1e-4);
    EXPECT_NEAR(arias_intensity(res.record), ia, 1e-6 * ia);
    // all energy lands on one axis: Ia(x) + Ia(2x)
    EXPECT_NEAR(arias_intensity(res.record), 5.0 * arias_intensity(x), 1e-6 * ia);
}

TEST(Rotation, RecoversKnownThirtyDegrees) {
    auto u = gmtest::noise_record(7, 2000, 0.02, 0.1);
    auto w = gmtest::noise_record(8, 2000, 0.02, 0.04);
    const PairCovariance c = pair_covariance(u.samples, w.samples);
    double mu = 0;
    for (double v : u.samples) mu += v;
    mu /= u.size();
    for (std::size_t i = 0; i < u.size(); ++i) w.samples[i] -= c.sxy / c.sxx * (u.samples[i] - mu);
    const double th = 30.0 * kPi / 180.0;
    AccelRecord c1 = u, c2 = w;
    for (std::size_t i = 0; i < u.size(); ++i) {
        c1.samples[i] = u.samples[i] * std::cos(th) - w.samples[i] * std::sin(th);
        c2.samples[i] = u.samples[i] * std::sin(th) + w.samples[i] * std::cos(th);
    }
    const auto res = rotate_and_select(c1, c2);
    EXPECT_NEAR(res.angle * 180.0 / kPi, 30.0, 0.1);
    const PairCovariance after = pair_covariance(res.record.samples, u.samples);
    EXPECT_NEAR(after.sxy, after.sxx, 1e-9);
}

TEST(Rotation, MismatchedLengthsRejected) {
    EXPECT_THROW(rotate_and_select(gmtest::noise_record(1, 10, 0.02), gmtest::noise_record(1, 11, 0.02)),
                 ValidationError);
}

TEST(Decimation, FactorRule) {
    EXPECT_EQ(decimation_factor(0.005), 4);
    EXPECT_EQ(decimation_factor(0.02), 1);
    const auto r = decimate_to_50hz(gmtest::noise_record(1, 400, 0.005));
    EXPECT_DOUBLE_EQ(r.dt, 0.02);
    const auto same = gmtest::noise_record(1, 400, 0.02);
    EXPECT_EQ(decimate_to_50hz(same).samples, same.samples);
}

TEST(Decimation, PreservesLowFrequencySine) {
    std::vector<double> a;
    for (int i = 0; i < 3000; ++i) a.push_back(std::sin(2 * kPi * 1.0 * i * 0.01));
    const auto d = decimate_to_50hz(make_record("s", 0.01, a));
    double peak = 0;
    // interior only, away from filter edge transients
    for (std::size_t i = d.size() / 4; i < 3 * d.size() / 4; ++i) peak = std::max(peak, std::abs(d.samples[i]));
    EXPECT_NEAR(peak, 1.0, 0.01);
}

TEST(Truncation, IdentityAndPadRemoval) {
    auto r = gmtest::noise_record(2, 500, 0.02);
    EXPECT_EQ(truncate_energy(r, 0.0, 1.0).samples, r.samples);
    r.samples.front() = r.samples.back() = 0.0;

    AccelRecord padded = r;
    padded.samples.insert(padded.samples.begin(), 400, 0.0);
    padded.samples.insert(padded.samples.end(), 400, 0.0);
    const auto t = truncate_energy(padded);
    EXPECT_LT(t.size(), 520u);
    // at most 1e-4 of the energy is cut from each end
    EXPECT_NEAR(arias_intensity(t), arias_intensity(r), 2e-4 * arias_intensity(r));
}

TEST(Truncation, RampRetainsNinetyPercent) {
    const auto r = gmtest::ramp_record(20.0, 0.01);
    const auto t = truncate_energy(r, 0.05, 0.95);
    EXPECT_NEAR(t.duration(), 18.0, 2.0 * r.dt);
}

TEST(Truncation, ZeroEnergyRejected) {
    EXPECT_THROW(truncate_energy(make_record("z", 0.02, std::vector<double>(10, 0.0))), DataError);
}
