#include <gtest/gtest.h>

#include <cmath>

#include "gmsynth/error.hpp"
#include "gmsynth/rng.hpp"
#include "gmsynth/spectral.hpp"
#include "test_util.hpp"

using namespace gmsynth;

namespace {

FreqGrid test_grid() { return {2.0 * gmtest::kPi * 25.0 / 999.0, 1000}; }

/// Random feasible parameters for a filter.
FilterParams random_params(const FilterSpec& spec, RandomStream& rs) {
    FilterParams p;
    for (int j = 0; j < spec.modes(); ++j) {
        p.omega.push_back(1.0 + 80.0 * rs.uniform());
        p.zeta.push_back(0.02 + 0.98 * rs.uniform());
    }
    if (spec.has_weights()) {
        const double w = 0.01 + 0.98 * rs.uniform();
        p.weights = {w, 1.0 - w};
    }
    return p;
}

}  // namespace

TEST(Spectral, ShapesMatchClosedForms) {
    const double wg = 10.0, z = 0.3;
    EXPECT_DOUBLE_EQ(second_order_shape(0.0, wg, z), 1.0);
    EXPECT_DOUBLE_EQ(kanai_tajimi_shape(0.0, wg, z), 1.0);
    // at omega = omega_g: 1 / (4 zeta^2) and (1 + 4 zeta^2) / (4 zeta^2)
    EXPECT_NEAR(second_order_shape(wg, wg, z), 1.0 / (4 * z * z), 1e-12);
    EXPECT_NEAR(kanai_tajimi_shape(wg, wg, z), (1 + 4 * z * z) / (4 * z * z), 1e-12);
    // high-frequency decay: omega^-4 and omega^-2
    EXPECT_NEAR(second_order_shape(1e4, wg, z) * std::pow(1e4 / wg, 4), 1.0, 1e-3);
    EXPECT_NEAR(kanai_tajimi_shape(1e4, wg, z) * std::pow(1e4 / wg, 2), 4 * z * z, 1e-3);
}

TEST(Spectral, AllConfigsNormalizeToUnitMass) {
    const FreqGrid g = test_grid();
    RandomStream rs(stream_key(1, "filters", 0));
    for (int id = 1; id <= kNumConfigs; ++id) {
        const auto m = model_config(id);
        for (int r = 0; r < 20; ++r) {
            const auto phi = eval_filter(m.filter, random_params(m.filter, rs), g);
            double s = 0.0;
            for (double v : phi) {
                EXPECT_GE(v, 0.0);
                s += v;
            }
            EXPECT_NEAR(s * g.d_omega, 1.0, 1e-9) << "config " << id;
        }
    }
}

TEST(Spectral, ConvexIsWeightedSumOfNormalizedModes) {
    const FreqGrid g = test_grid();
    const FilterSpec conv{FilterKind::Convex, 2, FilterKind::SecondOrder};
    const FilterSpec one{FilterKind::SecondOrder, 1, FilterKind::SecondOrder};
    const FilterParams p{{12.0, 40.0}, {0.4, 0.2}, {0.3, 0.7}};
    const auto phi = eval_filter(conv, p, g);
    const auto a = eval_filter(one, {{12.0}, {0.4}, {}}, g);
    const auto b = eval_filter(one, {{40.0}, {0.2}, {}}, g);
    for (std::size_t k = 0; k < g.n; ++k) EXPECT_NEAR(phi[k], 0.3 * a[k] + 0.7 * b[k], 1e-12);
}

TEST(Spectral, CascadeIsProductOfModes) {
    const FreqGrid g = test_grid();
    const FilterSpec cas{FilterKind::Cascade, 2, FilterKind::SecondOrder};
    const auto phi = eval_filter(cas, {{15.0, 30.0}, {0.3, 0.5}, {}}, g);
    std::vector<double> prod(g.n);
    double s = 0.0;
    for (std::size_t k = 0; k < g.n; ++k) {
        prod[k] = second_order_shape(g.omega(k), 15.0, 0.3) * second_order_shape(g.omega(k), 30.0, 0.5);
        s += prod[k];
    }
    for (std::size_t k = 0; k < g.n; ++k) EXPECT_NEAR(phi[k], prod[k] / (s * g.d_omega), 1e-12);
}

TEST(Spectral, InvalidParamsRejected) {
    const FilterSpec one;
    EXPECT_THROW(eval_filter(one, {{0.0}, {0.3}, {}}, test_grid()), ValidationError);
    EXPECT_THROW(eval_filter(one, {{10.0}, {-0.1}, {}}, test_grid()), ValidationError);
    EXPECT_THROW(eval_filter(one, {{10.0, 2.0}, {0.3}, {}}, test_grid()), ValidationError);
    EXPECT_THROW(model_config(9), ValidationError);
}

TEST(Spectral, ParameterCountsPerConfig) {
    const int theta[9] = {0, 3, 4, 10, 3, 10, 25, 8, 20};
    for (int id = 1; id <= 8; ++id) {
        const auto m = model_config(id);
        EXPECT_EQ(m.trends.n_params(), theta[id]) << id;
        EXPECT_EQ(total_param_count(m), 8 + theta[id]) << id;
        EXPECT_EQ(static_cast<int>(m.theta_names().size()), theta[id]);
    }
}

TEST(Spectral, ScalarRoundTrip) {
    const auto m = model_config(5);
    const FilterParams p{{12.0, 40.0}, {0.4, 0.2}, {0.3, 0.7}};
    std::vector<double> s(m.filter.n_scalars());
    params_to_scalars(m.filter, p, s.data());
    const auto back = params_from_scalars(m.filter, s.data());
    EXPECT_EQ(back.omega, p.omega);
    EXPECT_EQ(back.zeta, p.zeta);
    EXPECT_NEAR(back.weights[1], 0.7, 1e-15);
}

TEST(Trends, LinearIsClampedOutsideFivePercentKnots) {
    const auto env = gmtest::short_env();
    const auto knots = env.knot_times();
    const auto m = gmtest::model1(25.0, -0.5, 0.3);
    const TrendEvaluator ev(m, knots);
    EXPECT_NEAR(ev.at(knots[3]).omega[0], 25.0, 1e-12);
    EXPECT_NEAR(ev.at(4.0).omega[0], 25.0 - 0.5 * (4.0 - knots[3]), 1e-12);
    EXPECT_DOUBLE_EQ(ev.at(0.0).omega[0], ev.at(knots[1]).omega[0]);
    EXPECT_DOUBLE_EQ(ev.at(env.t_final()).omega[0], ev.at(knots[5]).omega[0]);
    EXPECT_DOUBLE_EQ(ev.at(1.0).zeta[0], 0.3);
}

TEST(Trends, ProjectionClampsToFeasibleBox) {
    const auto env = gmtest::short_env();
    auto m = gmtest::model1(0.05, 0.0, 5.0);
    const auto p = eval_trend(m, 1.0, env.knot_times());
    EXPECT_DOUBLE_EQ(p.omega[0], kOmegaMin);
    EXPECT_DOUBLE_EQ(p.zeta[0], kZetaMax);
}

TEST(Trends, PolylineMovingAverageOfLinearValues) {
    EnvelopeParams env;
    env.d = {1.0, 4.0, 3.0, 5.0, 4.0, 1.0};
    env.ia_total = 0.1;
    const auto k = env.knot_times();
    auto m = model_config(3);
    // values on a line: the smoothed polyline equals the line wherever the window stays inside [t5, t95]
    const double a = 20.0, b = -0.7;
    m.theta_f.clear();
    for (int i = 1; i <= 5; ++i) m.theta_f.push_back(a + b * k[i]);
    for (int i = 1; i <= 5; ++i) m.theta_f.push_back(0.25);
    const TrendEvaluator ev(m, k);
    for (double t : {k[1] + 1.0, 6.0, 9.5, k[5] - 1.0}) {
        EXPECT_NEAR(ev.at(t).omega[0], a + b * t, 1e-12) << t;
        EXPECT_NEAR(ev.at(t).zeta[0], 0.25, 1e-14);
    }
    // beyond t95 + 1 s the value is the last knot value
    EXPECT_NEAR(ev.at(env.t_final()).omega[0], a + b * k[5], 1e-12);
}
