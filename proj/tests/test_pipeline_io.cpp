#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "gmsynth/error.hpp"
#include "gmsynth/io.hpp"
#include "gmsynth/pipeline.hpp"
#include "test_util.hpp"

using namespace gmsynth;

namespace {

PipelineConfig fast_config() {
    PipelineConfig c;
    c.seed = 7;
    c.fc.n_sims = 20;
    c.fc.fc_step = 0.05;
    return c;
}

FittedModel some_model() {
    FittedModel m;
    m.record_id = "r1";
    m.env = gmtest::short_env(0.0123);
    m.model = gmtest::model1(24.5, -0.37, 0.31, 0.27);
    m.kappa = 1.0625;
    return m;
}

}  // namespace

TEST(Json, EnvelopeAndModelRoundTrip) {
    const auto m = some_model();
    const auto back = fitted_model_from_json(fitted_model_to_json(m));
    EXPECT_EQ(back.record_id, m.record_id);
    EXPECT_EQ(back.env.d, m.env.d);
    EXPECT_EQ(back.env.ia_total, m.env.ia_total);
    EXPECT_EQ(back.model.theta_f, m.model.theta_f);
    EXPECT_EQ(back.model.fc, m.model.fc);
    EXPECT_EQ(back.model.config_id, 1);
    EXPECT_EQ(back.kappa, m.kappa);
    EXPECT_EQ(fitted_model_to_json(back), fitted_model_to_json(m));
}

TEST(Json, JointModelRoundTripIsStable) {
    const auto j = reference_joint_model();
    const auto text = joint_model_to_json(j);
    EXPECT_EQ(joint_model_to_json(joint_model_from_json(text)), text);
    const auto marg = marginal_from_json(marginal_to_json(j.marginals[10]));
    EXPECT_EQ(marg.family, Family::Gamma);
    EXPECT_EQ(marg.params, j.marginals[10].params);
    EXPECT_EQ(marg.hi, 2.0);
}

TEST(Json, ShippedReferenceModelMatchesBuiltIn) {
    const auto j = joint_model_from_json(read_file(GMSYNTH_DATA_DIR "/reference_joint_model.json"));
    EXPECT_EQ(joint_model_to_json(j), joint_model_to_json(reference_joint_model()));
}

TEST(Config, RoundTripAndRequiredKeys) {
    const auto c = load_config(GMSYNTH_DATA_DIR "/default_config.json");
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))), config_to_json(c));
    EXPECT_THROW(config_from_json(R"({"schema_version": 1})"), ValidationError);
    EXPECT_THROW(config_from_json(R"({"seed": 1})"), ValidationError);
    EXPECT_THROW(config_from_json(R"({"seed": 1, "schema_version": 1, "bogus": 2})"), ValidationError);
    EXPECT_THROW(config_from_json(R"({"seed": 1, "schema_version": 2})"), ValidationError);
    EXPECT_THROW(config_from_json(R"({"seed": 1, "schema_version": 1, "config_id": 9})"), ValidationError);
    const auto d = config_from_json(R"({"seed": 3, "schema_version": 1, "fc": {"n_sims": 10}})");
    EXPECT_EQ(d.fc.n_sims, 10);
    EXPECT_EQ(d.fc.fc_step, 0.01);
}

TEST(ParameterTable, ColumnsAndRows) {
    const auto cols = parameter_columns(1);
    const std::vector<std::string> expect = {"log_Ia",  "omega_mid", "omega_slope", "zeta_mid", "D_0_5",   "D_5_30",
                                             "D_30_45", "D_45_75",   "D_75_95",     "D_95_100", "fc"};
    EXPECT_EQ(cols, expect);
    EXPECT_EQ(reference_joint_model().names, expect);
    EXPECT_EQ(parameter_columns(6).size(), 33u);

    const auto m = some_model();
    const auto row = model_to_row(m);
    EXPECT_DOUBLE_EQ(row[0], std::log(0.0123));
    const auto back = model_from_row(1, row, "x");
    EXPECT_NEAR(back.env.ia_total, m.env.ia_total, 1e-15);
    EXPECT_EQ(back.model.theta_f, m.model.theta_f);
    EXPECT_THROW(model_from_row(2, row), ValidationError);
}

TEST(ParameterTable, CsvRoundTripIsExact) {
    auto a = some_model();
    auto b = some_model();
    b.record_id = "r2";
    b.model.theta_f[1] = 1.0 / 3.0;
    const auto t = make_parameter_table({a, b});
    const auto text = t.to_csv();
    EXPECT_EQ(text.rfind("# units:", 0), 0u);
    const auto u = ParameterTable::from_csv(text);
    EXPECT_EQ(u.columns, t.columns);
    EXPECT_EQ(u.record_ids, t.record_ids);
    EXPECT_EQ(u.values, t.values);
    EXPECT_EQ(u.to_csv(), text);
    EXPECT_THROW(ParameterTable::from_csv("a,b\n1,2\n"), DataError);
    EXPECT_THROW(ParameterTable::from_csv("record_id,x\nr,abc\n"), DataError);
}

TEST(Pipeline, SupportsCoverReferenceTable) {
    EXPECT_EQ(default_support("fc"), std::make_pair(0.0, 2.0));
    EXPECT_EQ(default_support("zeta_mid"), std::make_pair(0.02, 1.0));
    EXPECT_EQ(default_support("D_75_95").second, 40.0);
    EXPECT_TRUE(std::isinf(default_support("omega_slope").first));
}

TEST(Pipeline, FitRecordRecoversSimulatedModel) {
    const auto env = gmtest::short_env(0.05);
    const auto truth = gmtest::model1(30.0, -1.0, 0.3, 0.2);
    const auto g = SimGrid::make(env.t_final());
    auto rec = simulate_gm(env, truth, g, make_noise(g, 21), "s21");
    // embed in quiet padding, as a field record would be
    rec.samples.insert(rec.samples.begin(), 50, 0.0);
    rec.samples.insert(rec.samples.end(), 50, 0.0);
    const auto cfg = fast_config();
    const auto m = fit_record(rec, cfg);
    EXPECT_EQ(m.record_id, "s21");
    EXPECT_NEAR(std::log(m.env.ia_total), std::log(arias_intensity(rec)), 1e-12);
    EXPECT_NEAR(m.model.theta_f[0], 30.0, 0.25 * 30.0);
    EXPECT_NEAR(m.model.theta_f[2], 0.3, 0.2);
    EXPECT_GE(m.kappa, 1.0);
    // same inputs, same answer
    const auto m2 = fit_record(rec, cfg);
    EXPECT_EQ(fitted_model_to_json(m), fitted_model_to_json(m2));
}

TEST(Pipeline, FitBatchCapturesFailures) {
    const auto good = simulate_gm(gmtest::short_env(), gmtest::model1(), SimGrid::make(8.5),
                                  make_noise(SimGrid::make(8.5), 2), "good");
    const auto bad = make_record("bad", 0.02, std::vector<double>(300, 0.0));
    const auto b = fit_records({bad, good}, fast_config());
    EXPECT_EQ(b.n_records, 2u);
    ASSERT_EQ(b.models.size(), 1u);
    EXPECT_EQ(b.models[0].record_id, "good");
    ASSERT_EQ(b.failures.size(), 1u);
    EXPECT_EQ(b.failures[0].record_id, "bad");
}

TEST(Pipeline, HierarchicalSimulationIsDeterministic) {
    auto j = reference_joint_model();
    // shorten the durations so the test stays quick
    for (std::size_t c = 4; c <= 9; ++c) j.marginals[c] = MarginalModel{Family::Gamma, {4.0, 8.0}, 0.1, 40.0};
    const auto cfg = fast_config();
    const auto a = hierarchical_sim(j, 1, 3, 11, cfg);
    const auto b = hierarchical_sim(j, 1, 3, 11, cfg);
    ASSERT_EQ(a.records.size(), 3u);
    EXPECT_EQ(a.records[1].id, "sim_00001");
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.records[i].samples, b.records[i].samples);
        const double ia = std::exp(a.parameters.values(i, 0));
        EXPECT_NEAR(arias_intensity(a.records[i]), ia, 0.8 * ia);
    }
    EXPECT_EQ(a.parameters.to_csv(), b.parameters.to_csv());
    EXPECT_TRUE(hierarchical_sim(j, 1, 0, 11, cfg).records.empty());
    EXPECT_THROW(hierarchical_sim(j, 2, 1, 11, cfg), ValidationError);
}

TEST(Pipeline, SaveAndLoadRecordsDirectory) {
    const auto dir = gmtest::scratch_dir("records_dir");
    auto a = gmtest::noise_record(1, 50, 0.02);
    a.id = "b_rec";
    auto b = gmtest::noise_record(2, 60, 0.02);
    b.id = "a_rec";
    save_records({a, b}, dir);
    const auto back = load_records(dir);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].id, "a_rec");
    EXPECT_EQ(back[1].samples, a.samples);
}

TEST(Io, EpsdCsvLayout) {
    EpsdGrid e;
    e.freq = {0.5, 2};
    e.times = {0.0, 0.02};
    e.values = {1, 2, 3, 4};
    const auto csv = epsd_to_csv(e);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,omega,S");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
