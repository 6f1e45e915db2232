#include <gtest/gtest.h>

#include <cmath>

#include "gmsynth/error.hpp"
#include "gmsynth/rng.hpp"
#include "gmsynth/uq.hpp"
#include "test_util.hpp"

using namespace gmsynth;

namespace {

struct Case {
    Family f;
    std::vector<double> p;
    double lo, hi;
};

std::vector<Case> cases() {
    const double inf = std::numeric_limits<double>::infinity();
    return {{Family::Gaussian, {-5.557, 1.896}, -inf, inf}, {Family::Lognormal, {0.5, 0.4}, 0, inf},
            {Family::Gumbel, {8.172, 3.637}, -inf, inf},    {Family::Weibull, {5.398, 1.729}, 0, inf},
            {Family::Gamma, {0.595, 4.357}, 0, inf},        {Family::Exponential, {1.5}, 0, inf},
            {Family::Beta, {2.0, 3.5}, 0.5, 3.0},           {Family::Logistic, {1.0, 0.7}, -inf, inf},
            {Family::Laplace, {-0.227, 0.709}, -inf, inf},  {Family::Rayleigh, {2.0}, 0, inf}};
}

/// Moments of a density by composite Simpson on [quantile(1e-12), quantile(1 - 1e-12)].
std::array<double, 3> numeric_moments(const MarginalModel& m) {
    const double a = m.quantile(1e-12), b = m.quantile(1 - 1e-12);
    const int n = 200000;
    const double h = (b - a) / n;
    double s0 = 0, s1 = 0, s2 = 0;
    for (int i = 0; i <= n; ++i) {
        const double x = a + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        const double p = m.pdf(x);
        s0 += w * p;
        s1 += w * p * x;
        s2 += w * p * x * x;
    }
    s0 *= h / 3;
    s1 *= h / 3;
    s2 *= h / 3;
    return {s0, s1 / s0, std::sqrt(s2 / s0 - (s1 / s0) * (s1 / s0))};
}

}  // namespace

TEST(Marginals, DensityMomentsMatchClosedForms) {
    for (const auto& c : cases()) {
        const MarginalModel m{c.f, c.p, c.lo, c.hi};
        const auto mom = numeric_moments(m);
        EXPECT_NEAR(mom[0], 1.0, 1e-6) << to_string(c.f);
        EXPECT_NEAR(mom[1], m.mean(), 1e-5 * (1 + std::abs(m.mean()))) << to_string(c.f);
        EXPECT_NEAR(mom[2], m.sd(), 1e-5 * m.sd()) << to_string(c.f);
    }
}

TEST(Marginals, QuantileInvertsCdf) {
    for (const auto& c : cases()) {
        const MarginalModel m{c.f, c.p, c.lo, c.hi};
        for (double p : {0.001, 0.1, 0.5, 0.9, 0.999}) EXPECT_NEAR(m.cdf(m.quantile(p)), p, 1e-10) << to_string(c.f);
    }
}

TEST(Marginals, CdfIsIntegralOfPdf) {
    for (const auto& c : cases()) {
        const MarginalModel m{c.f, c.p, c.lo, c.hi};
        const double a = m.quantile(0.2), b = m.quantile(0.7);
        const int n = 20000;
        const double h = (b - a) / n;
        double s = 0;
        for (int i = 0; i <= n; ++i) s += ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * m.pdf(a + i * h);
        EXPECT_NEAR(s * h / 3, 0.5, 1e-8) << to_string(c.f);
    }
}

TEST(Marginals, ReferenceModelMomentsMatchRows) {
    // moment columns listed next to the reference parameters
    const auto j = reference_joint_model();
    ASSERT_EQ(j.dim(), 11u);
    const double mean[11] = {-5.557, 28.446, -0.227, 0.448, 7.320, 4.811, 1.684, 4.549, 10.271, 38.737, 0.239};
    const double sd[11] = {1.896, 19.112, 1.003, 0.190, 3.507, 2.869, 1.202, 2.672, 4.664, 47.634, 0.259};
    for (std::size_t i = 0; i < 11; ++i) {
        EXPECT_NEAR(j.marginals[i].mean(), mean[i], 2e-3 * std::abs(mean[i]) + 1e-3) << j.names[i];
        EXPECT_NEAR(j.marginals[i].sd(), sd[i], 2e-3 * sd[i] + 1e-3) << j.names[i];
    }
}

TEST(Marginals, FitSelectsGaussianForGaussianData) {
    auto x = standard_normals(5, 5000);
    for (auto& v : x) v = 3.0 + 2.0 * v;
    const auto fit = fit_marginal(x, all_families(), -std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity());
    EXPECT_EQ(fit.model.family, Family::Gaussian);
    const auto se = marginal_standard_errors(fit.model, x);
    EXPECT_NEAR(se[0], 2.0 / std::sqrt(5000.0), 0.05 * 2.0 / std::sqrt(5000.0));
    EXPECT_NEAR(fit.model.params[0], 3.0, 3 * se[0]);
}

TEST(Marginals, InvalidParamsRejected) {
    EXPECT_THROW((MarginalModel{Family::Gamma, {-1.0, 2.0}}).validate(), ValidationError);
    EXPECT_THROW((MarginalModel{Family::Beta, {1.0, 2.0}}).validate(), ValidationError);
    EXPECT_THROW(family_from_string("Cauchy"), ValidationError);
}

TEST(Dependence, KendallTauMatchesBruteForce) {
    auto x = standard_normals(1, 300), y = standard_normals(2, 300);
    for (std::size_t i = 0; i < 300; ++i) {
        y[i] += 0.5 * x[i];
        if (i % 10 == 0) x[i] = std::round(x[i]);  // ties
        if (i % 7 == 0) y[i] = std::round(y[i]);
    }
    double nc = 0, nd = 0, tx = 0, ty = 0;
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = i + 1; j < 300; ++j) {
            const double a = x[i] - x[j], b = y[i] - y[j];
            if (a == 0 && b == 0) continue;
            if (a == 0) ++tx;
            else if (b == 0) ++ty;
            else if (a * b > 0) ++nc;
            else ++nd;
        }
    const double ref = (nc - nd) / std::sqrt((nc + nd + tx) * (nc + nd + ty));
    EXPECT_NEAR(kendall_tau(x, y), ref, 1e-12);
}

TEST(Dependence, NearestCorrelationIsValid) {
    Eigen::MatrixXd A(3, 3);
    A << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
    const auto R = nearest_correlation(A);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(R(i, i), 1.0, 1e-14);
}

TEST(PairCopulas, HIsIntegralOfDensity) {
    const std::vector<PairCopula> cops = {{PairFamily::Gaussian, 0.6}, {PairFamily::Clayton, 2.0},
                                          {PairFamily::Gumbel, 1.8},   {PairFamily::Frank, 5.0},
                                          {PairFamily::StudentT, 0.5, 4.0}};
    for (const auto& c : cops) {
        for (double v : {0.2, 0.7}) {
            const double u = 0.6;
            const int n = 20000;
            const double h = u / n;
            double s = 0;
            for (int i = 0; i <= n; ++i) {
                const double x = std::max(i * h, 1e-9);
                s += ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0)) * std::exp(c.log_density(x, v));
            }
            EXPECT_NEAR(c.h(u, v), s * h / 3, 2e-4) << to_string(c.family) << " v=" << v;
            EXPECT_NEAR(c.hinv(c.h(u, v), v), u, 1e-6) << to_string(c.family);
        }
    }
}

TEST(PairCopulas, TauMatchesConditionalSampling) {
    const std::vector<PairCopula> cops = {{PairFamily::Gaussian, 0.6}, {PairFamily::Clayton, 2.0},
                                          {PairFamily::Gumbel, 1.8}, {PairFamily::Frank, 5.0}};
    for (const auto& c : cops) {
        RandomStream rs(stream_key(9, to_string(c.family), 0));
        std::vector<double> u(20000), v(20000);
        for (std::size_t i = 0; i < u.size(); ++i) {
            v[i] = rs.uniform();
            u[i] = c.hinv(rs.uniform(), v[i]);
        }
        EXPECT_NEAR(kendall_tau(u, v), c.tau(), 0.015) << to_string(c.family);
        const auto fit = fit_pair(u, v);
        EXPECT_EQ(fit.family, c.family);
    }
}

TEST(Vines, RosenblattRoundTrip) {
    VineCopulaModel vm;
    vm.kind = VineKind::CVine;
    vm.order = {2, 0, 1};
    vm.trees = {{{PairFamily::Clayton, 2.0}, {PairFamily::Gaussian, 0.4}}, {{PairFamily::Frank, 3.0}}};
    const double u[3] = {0.3, 0.8, 0.55};
    const auto w = vm.rosenblatt(u);
    const auto back = vm.inverse_rosenblatt(w.data());
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(back[i], u[i], 1e-9);
    vm.kind = VineKind::DVine;
    const auto w2 = vm.rosenblatt(u);
    const auto back2 = vm.inverse_rosenblatt(w2.data());
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(back2[i], u[i], 1e-9);
}

TEST(Joint, ReferenceSamplesRespectSupports) {
    const auto j = reference_joint_model();
    const auto x = sample_joint(j, 2000, 3);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < j.dim(); ++c) EXPECT_TRUE(j.marginals[c].in_support(x(r, c)));
    EXPECT_EQ(sample_joint(j, 50, 3), sample_joint(j, 50, 3));
}
