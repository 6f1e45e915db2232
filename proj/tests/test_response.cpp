#include <gtest/gtest.h>

#include <cmath>

#include "gmsynth/error.hpp"
#include "gmsynth/response.hpp"
#include "test_util.hpp"

using namespace gmsynth;
using gmtest::kPi;

namespace {

AccelRecord harmonic(double A, double f, double T, double dt, double ramp = 0.0) {
    std::vector<double> a;
    for (int i = 0; i * dt <= T; ++i) {
        const double t = i * dt, w = t < ramp ? 0.5 - 0.5 * std::cos(kPi * t / ramp) : 1.0;
        a.push_back(w * A * std::sin(2 * kPi * f * t));
    }
    return make_record("h", dt, a);
}

}  // namespace

TEST(Response, LogSpacedEndpoints) {
    const auto p = log_spaced(0.05, 10.0, 101);
    ASSERT_EQ(p.size(), 101u);
    EXPECT_DOUBLE_EQ(p.front(), 0.05);
    EXPECT_NEAR(p.back(), 10.0, 1e-12);
    EXPECT_NEAR(p[1] / p[0], p[100] / p[99], 1e-12);
}

TEST(Response, ResonantSteadyStateClosedForm) {
    // steady-state pseudo-acceleration at resonance: A / (2 zeta)
    for (double zeta : {0.05, 0.2}) {
        for (double T : {0.5, 1.0}) {
            const auto r = harmonic(0.1, 1.0 / T, 120.0, 0.005);
            const auto s = linear_spectrum(r, {T}, zeta);
            const double closed = 0.1 / (2 * zeta);
            EXPECT_NEAR(s.values[0], closed, 0.01 * closed) << zeta << " " << T;
        }
    }
}

TEST(Response, OffResonanceSteadyState) {
    // |H| = 1 / sqrt((1 - b^2)^2 + (2 zeta b)^2); a slow onset keeps the start-up transient negligible
    const double T = 1.0, zeta = 0.1, f = 0.5, b = f * T;
    const auto r = harmonic(0.2, f, 150.0, 0.005, 60.0);
    const auto s = linear_spectrum(r, {T}, zeta);
    const double closed = 0.2 / std::sqrt((1 - b * b) * (1 - b * b) + (2 * zeta * b) * (2 * zeta * b));
    EXPECT_NEAR(s.values[0], closed, 0.01 * closed);
}

TEST(Response, BatchMatchesScalar) {
    const std::size_t n = 700, S = 5;
    std::vector<double> a(n * S);
    std::vector<std::vector<double>> cols(S);
    for (std::size_t s = 0; s < S; ++s) {
        cols[s] = gmtest::noise_record(100 + s, n, 0.02).samples;
        for (std::size_t i = 0; i < n; ++i) a[i * S + s] = cols[s][i];
    }
    for (double T : {0.05, 0.3, 2.0, 9.0}) {
        std::vector<double> peak(S);
        sdof_peak_displacement_batch(a.data(), n, S, 0.02, T, 0.05, peak.data());
        for (std::size_t s = 0; s < S; ++s) {
            const double ref = sdof_peak_displacement(cols[s].data(), n, 0.02, T, 0.05);
            EXPECT_NEAR(peak[s], ref, 1e-12 * ref) << T;
        }
    }
}

TEST(Response, ShortPeriodTendsToPga) {
    // a smooth input: the stiff oscillator then follows the ground quasi-statically
    std::vector<double> a;
    for (int i = 0; i < 4000; ++i) {
        const double t = i * 0.005;
        a.push_back(0.1 * std::sin(2 * kPi * 1.0 * t) + 0.07 * std::sin(2 * kPi * 2.3 * t + 0.4));
    }
    const auto r = make_record("smooth", 0.005, a);
    double pga = 0.0;
    for (double v : r.samples) pga = std::max(pga, std::abs(v));
    const auto s = linear_spectrum(r, {0.002}, 0.05);
    EXPECT_NEAR(s.values[0], pga, 0.02 * pga);
}

TEST(Response, InvalidInputsRejected) {
    const auto r = gmtest::noise_record(1, 100, 0.02);
    EXPECT_THROW(linear_spectrum(r, {1.0}, 0.0), ValidationError);
    EXPECT_THROW(linear_spectrum(r, {1.0, 0.5}, 0.05), ValidationError);
    EXPECT_THROW(constant_ductility_point(r, 1.0, 0.05, 0.5), ValidationError);
    EXPECT_THROW(ductility_demand(r, 1.0, 0.05, 0.0), ValidationError);
}

TEST(Inelastic, StrongYieldIsElastic) {
    const auto r = gmtest::noise_record(8, 1500, 0.02, 0.1);
    const double T = 0.7, zeta = 0.05, w = 2 * kPi / T;
    const double u_el = sdof_peak_displacement(r.samples.data(), r.size(), r.dt, T, zeta);
    const double fy = 100.0 * w * w * u_el;
    EXPECT_NEAR(ductility_demand(r, T, zeta, fy), w * w * u_el / fy, 1e-9);
}

TEST(Inelastic, TargetDuctilityReachedOnResimulation) {
    const auto r = gmtest::noise_record(12, 1500, 0.02, 0.1);
    for (double mu : {1.5, 2.0, 4.0}) {
        for (double T : {0.2, 1.0}) {
            const auto p = constant_ductility_point(r, T, 0.05, mu);
            EXPECT_FALSE(p.fallback);
            const double achieved = ductility_demand(r, T, 0.05, p.fy);
            EXPECT_NEAR(achieved, mu, 0.01 * mu) << mu << " " << T;
            const auto s = inelastic_spectrum(r, {T}, 0.05, mu);
            EXPECT_NEAR(s.values[0], mu * p.fy, 1e-12);
        }
    }
}

TEST(Inelastic, UnitDuctilityIsElastic) {
    const auto r = gmtest::noise_record(13, 1500, 0.02, 0.1);
    const auto per = log_spaced(0.1, 5.0, 7);
    const auto lin = linear_spectrum(r, per, 0.05);
    const auto nl = inelastic_spectrum(r, per, 0.05, 1.0);
    for (std::size_t i = 0; i < per.size(); ++i) EXPECT_NEAR(nl.values[i], lin.values[i], 0.01 * lin.values[i]);
}
