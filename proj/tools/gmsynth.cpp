// gmsynth command line front end.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gmsynth/envelope.hpp"
#include "gmsynth/epsd.hpp"
#include "gmsynth/error.hpp"
#include "gmsynth/io.hpp"
#include "gmsynth/pipeline.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/response.hpp"
#include "gmsynth/rng.hpp"
#include "gmsynth/synth.hpp"
#include "gmsynth/uq.hpp"
#include "gmsynth/validate.hpp"

namespace fs = std::filesystem;
using namespace gmsynth;

namespace {

std::vector<double> parse_numbers(const std::string& text, std::size_t expected, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError(std::string("invalid number in ") + what + ": '" + tok + "'");
        }
    }
    if (expected && out.size() != expected)
        throw ValidationError(std::string(what) + " needs " + std::to_string(expected) + " comma separated values");
    return out;
}

std::vector<int> parse_ints(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_numbers(text, 0, "integer list")) out.push_back(static_cast<int>(v));
    return out;
}

/// Record files named on the command line; directories expand to their records.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (auto& p : list_record_files(in)) out.push_back(p);
        } else if (fs::exists(in)) {
            out.emplace_back(in);
        } else {
            throw DataError("no such file or directory: " + in);
        }
    }
    return out;
}

std::vector<AccelRecord> load_inputs(const std::vector<std::string>& inputs) {
    std::vector<AccelRecord> recs;
    for (const auto& p : expand_inputs(inputs)) recs.push_back(load_record(p));
    return recs;
}

struct ConfigArgs {
    std::string path;
    std::optional<std::uint64_t> seed;
    std::optional<int> config_id;

    void attach(CLI::App* sub, bool with_config_id = true) {
        sub->add_option("--config", path, "pipeline configuration JSON");
        sub->add_option("--seed", seed, "random seed (overrides the configuration)");
        if (with_config_id) sub->add_option("--config-id", config_id, "model configuration 1..8")->check(CLI::Range(1, 8));
    }

    PipelineConfig load(bool need_seed = true) const {
        PipelineConfig c;
        if (!path.empty()) {
            c = load_config(path);
        } else if (need_seed && !seed) {
            throw ValidationError("a seed is required: pass --seed or --config");
        }
        if (seed) {
            c.seed = *seed;
            c.fc.seed = *seed;
        }
        if (config_id) c.config_id = *config_id;
        c.validate();
        return c;
    }
};

void write_out(const fs::path& path, const std::string& text) {
    write_file_atomic(path, text);
    log_event("write", {{"path", path.string()}, {"bytes", std::to_string(text.size())}});
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::vector<std::string> inputs;
    bool rotate = false, decimate = false;
    std::string truncate;
    std::string out;
};

void cmd_preprocess(const PreprocessArgs& a) {
    const auto files = expand_inputs(a.inputs);
    std::vector<AccelRecord> out;
    std::optional<std::array<double, 2>> trunc;
    if (!a.truncate.empty()) {
        const auto v = parse_numbers(a.truncate, 2, "--truncate");
        trunc = std::array<double, 2>{v[0], v[1]};
    }
    auto finish = [&](AccelRecord r) {
        if (a.decimate) r = decimate_to_50hz(r);
        if (trunc) r = truncate_energy(r, (*trunc)[0], (*trunc)[1]);
        out.push_back(std::move(r));
    };
    if (a.rotate) {
        if (files.size() % 2) throw ValidationError("--rotate needs component pairs (an even number of inputs)");
        for (std::size_t i = 0; i < files.size(); i += 2) {
            auto res = rotate_and_select(load_record(files[i]), load_record(files[i + 1]));
            log_event("rotate", {{"record", res.record.id}, {"angle_rad", format_double(res.angle)}});
            finish(std::move(res.record));
        }
    } else {
        for (const auto& f : files) finish(load_record(f));
    }
    save_records(out, a.out);
    log_event("preprocess", {{"records", std::to_string(out.size())}, {"out", a.out}});
}

struct FitArgs {
    ConfigArgs cfg;
    std::string records, out;
};

int cmd_fit(const FitArgs& a) {
    PipelineConfig cfg = a.cfg.load();
    const std::string rdir = a.records.empty() ? cfg.records_dir : a.records;
    const std::string odir = a.out.empty() ? cfg.out_dir : a.out;
    if (rdir.empty() || odir.empty()) throw ValidationError("fit needs --records and --out (or the config paths)");
    const auto recs = load_records(rdir);
    log_event("fit_start", {{"records", std::to_string(recs.size())}, {"config_id", std::to_string(cfg.config_id)}});
    const FitBatch b = fit_records(recs, cfg);
    std::vector<std::vector<std::string>> frows;
    for (const auto& f : b.failures) {
        log_event("fit_failed", {{"record", f.record_id}, {"error", f.message}}, "warning");
        std::string msg = f.message;
        for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
        frows.push_back({f.record_id, msg});
    }
    for (const auto& m : b.models) write_out(fs::path(odir) / "models" / (m.record_id + ".json"), fitted_model_to_json(m));
    ParameterTable t = make_parameter_table(b.models);
    if (b.models.empty()) {
        t.columns = parameter_columns(cfg.config_id);
        for (const auto& c : t.columns) t.units.push_back(parameter_unit(c));
        t.values.resize(0, static_cast<Eigen::Index>(t.columns.size()));
    }
    write_out(fs::path(odir) / "params.csv", t.to_csv());
    write_out(fs::path(odir) / "failures.csv", csv_table({"record_id", "message"}, frows));
    const double frac = b.n_records ? static_cast<double>(b.failures.size()) / static_cast<double>(b.n_records) : 0.0;
    log_event("fit_done", {{"fitted", std::to_string(b.models.size())}, {"failed", std::to_string(b.failures.size())}});
    if (frac > cfg.max_failure_fraction) {
        log_event("fit_failure_rate", {{"fraction", format_double(frac)}}, "error");
        return 3;
    }
    return 0;
}

struct EpsdArgs {
    std::string record, out;
    double window = 2.0, nw = 2.5, smooth = 0.0;
    int tapers = 4;
    bool normalize = false;
};

void cmd_epsd(const EpsdArgs& a) {
    const AccelRecord rec = load_record(a.record);
    SttmwOptions o;
    o.window_s = a.window;
    o.nw = a.nw;
    o.n_tapers = a.tapers;
    EpsdGrid e = sttmw(rec, o);
    if (a.normalize) e = normalize_epsd(e);
    if (a.smooth > 0.0) e = smooth_time(e, a.smooth);
    write_out(a.out, epsd_to_csv(e));
}

struct SpectraArgs {
    std::vector<std::string> inputs;
    double zeta = 0.05, mu = 1.0;
    std::string periods = "0.05,10,101";
    std::string out;
};

void cmd_spectra(const SpectraArgs& a) {
    const auto p = parse_numbers(a.periods, 3, "--periods");
    if (p[2] < 1) throw ValidationError("--periods needs n >= 1");
    SpectrumType t{a.zeta, a.mu, p[0], p[1], static_cast<std::size_t>(p[2])};
    if (!(a.mu >= 1.0)) throw ValidationError("--mu must be >= 1");
    const auto recs = load_inputs(a.inputs);
    const SpectraMatrix m = compute_spectra(recs, t);
    std::vector<std::string> ids;
    std::vector<SpectrumResult> res;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        ids.push_back(recs[i].id);
        SpectrumResult r;
        r.periods = m.periods;
        r.zeta = a.zeta;
        r.mu = a.mu;
        for (Eigen::Index c = 0; c < m.sa.cols(); ++c) r.values.push_back(m.sa(static_cast<Eigen::Index>(i), c));
        res.push_back(std::move(r));
    }
    write_out(a.out, spectra_to_csv(ids, res));
}

struct SimulateArgs {
    std::string model, out;
    std::size_t n = 100;
    std::uint64_t seed = 0;
    double dt = 0.02;
};

void cmd_simulate(const SimulateArgs& a) {
    const FittedModel m = fitted_model_from_json(read_file(a.model));
    PipelineConfig cfg;
    cfg.dt_sim = a.dt;
    cfg.seed = a.seed;
    cfg.validate();
    const std::string base = m.record_id.empty() ? "model" : m.record_id;
    std::vector<AccelRecord> recs(a.n);
    const SimGrid grid = sim_grid_for(m.env, cfg);
    const Simulator sim(m.env, m.model, grid);
    for (std::size_t i = 0; i < a.n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "_sim_%05zu", i);
        const auto z = make_noise(grid, stream_key(a.seed, "sim/" + base, i)).z;
        recs[i] = make_record(base + id, grid.dt, sim.simulate(z));
    }
    save_records(recs, a.out);
    log_event("simulate", {{"records", std::to_string(a.n)}, {"out", a.out}});
}

struct FcOptArgs {
    ConfigArgs cfg;
    std::string model, record, out, curve;
};

void cmd_fc_opt(const FcOptArgs& a) {
    const PipelineConfig cfg = a.cfg.load();
    FittedModel m = fitted_model_from_json(read_file(a.model));
    const AccelRecord rec = load_record(a.record);
    FcOptions fo = cfg.fc;
    fo.seed = cfg.seed;
    fo.stream_label = "fc/" + rec.id;
    const auto target = linear_spectrum(rec, fc_periods(fo), fo.zeta).values;
    const SimGrid grid = sim_grid_for(m.env, cfg);
    const FcResult r = optimize_fc(m.env, m.model, grid, target, fo);
    m.model.fc = r.fc;
    for (std::size_t i = 0; i < r.fc_grid.size(); ++i)
        if (r.fc_grid[i] == r.fc) m.kappa = r.kappa[i];
    write_out(a.out, fitted_model_to_json(m));
    if (!a.curve.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t i = 0; i < r.fc_grid.size(); ++i)
            rows.push_back({format_double(r.fc_grid[i]), format_double(r.eps[i]), format_double(r.kappa[i])});
        write_out(a.curve, csv_table({"fc", "eps", "kappa"}, rows));
    }
    log_event("fc_opt", {{"record", rec.id}, {"fc", format_double(r.fc)}});
}

std::vector<Family> parse_families(const std::string& s) {
    if (s.empty()) return all_families();
    std::vector<Family> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(family_from_string(tok));
    return out;
}

struct MarginalsArgs {
    std::string table, out, candidates;
};

void cmd_marginals(const MarginalsArgs& a) {
    const ParameterTable t = ParameterTable::from_csv(read_file(a.table));
    const auto cands = parse_families(a.candidates);
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : t.columns) {
        const auto x = t.column(c);
        auto s = default_support(c);
        for (double v : x) {
            s.first = std::min(s.first, v);
            s.second = std::max(s.second, v);
        }
        const MarginalFit f = fit_marginal(x, cands, s.first, s.second);
        for (const auto& cf : f.candidates) {
            std::string params;
            for (std::size_t i = 0; i < cf.params.size(); ++i) params += (i ? ";" : "") + format_double(cf.params[i]);
            rows.push_back({c, to_string(cf.family), cf.ok ? "1" : "0", cf.family == f.model.family ? "1" : "0",
                            format_double(cf.log_lik), format_double(cf.bic), params});
        }
    }
    write_out(a.out, csv_table({"parameter", "family", "ok", "selected", "log_lik", "bic", "params"}, rows));
}

struct CopulaArgs {
    ConfigArgs cfg;
    std::string table, out, copula;
};

void cmd_copula_fit(const CopulaArgs& a) {
    PipelineConfig cfg = a.cfg.load(false);
    if (!a.copula.empty()) cfg.copula = copula_kind_from_string(a.copula);
    const ParameterTable t = ParameterTable::from_csv(read_file(a.table));
    const JointModel j = fit_joint_table(t, cfg);
    if (j.copula == CopulaKind::CVine || j.copula == CopulaKind::DVine) {
        // report both vine structures
        PipelineConfig other = cfg;
        other.copula = j.copula == CopulaKind::CVine ? CopulaKind::DVine : CopulaKind::CVine;
        const JointModel o = fit_joint_table(t, other);
        log_event("vine_scores", {{to_string(j.copula) + "_log_lik", format_double(j.vine.log_lik)},
                                  {to_string(o.copula) + "_log_lik", format_double(o.vine.log_lik)},
                                  {to_string(j.copula) + "_bic", format_double(j.vine.bic)},
                                  {to_string(o.copula) + "_bic", format_double(o.vine.bic)}});
    }
    write_out(a.out, joint_model_to_json(j));
}

struct HsimArgs {
    ConfigArgs cfg;
    std::string joint, out;
    std::size_t n = 100;
};

void cmd_hierarchical_sim(const HsimArgs& a) {
    const PipelineConfig cfg = a.cfg.load();
    const JointModel j = joint_model_from_json(read_file(a.joint));
    const HierarchicalCatalog cat = hierarchical_sim(j, cfg.config_id, a.n, cfg.seed, cfg);
    fs::create_directories(a.out);
    save_records(cat.records, fs::path(a.out) / "records");
    write_out(fs::path(a.out) / "params.csv", cat.parameters.to_csv());
    log_event("hierarchical_sim", {{"records", std::to_string(a.n)}, {"out", a.out}});
}

struct ValidateArgs {
    ConfigArgs cfg;
    std::string real, out;
    std::vector<std::string> sims;
    std::size_t catalogs = 1;
};

void cmd_validate(const ValidateArgs& a) {
    const PipelineConfig cfg = a.cfg.load(false);
    const auto real = load_records(a.real);
    std::vector<std::vector<AccelRecord>> cats;
    if (a.sims.size() == 1 && a.catalogs > 1) {
        const auto all = load_records(a.sims.front());
        const std::size_t per = all.size() / a.catalogs;
        if (per < 2) throw ValidationError("too few simulated records for the requested catalog count");
        for (std::size_t c = 0; c < a.catalogs; ++c)
            cats.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(c * per),
                              all.begin() + static_cast<std::ptrdiff_t>((c + 1) * per));
    } else {
        for (const auto& d : a.sims) cats.push_back(load_records(d));
    }
    const ValidationReport r = validate_catalogs(real, cats, cfg.spectra, cfg.levels());
    for (const auto& w : r.warnings) log_event("validate_warning", {{"message", w}}, "warning");
    write_out(fs::path(a.out) / "metrics.csv", r.metrics_csv());
    write_out(fs::path(a.out) / "curves.csv", r.curves_csv());
}

struct RankArgs {
    ConfigArgs cfg;
    std::string records, out, configs = "1,2,3,4,5,6,7,8";
    std::optional<int> catalogs;
};

void cmd_rank(const RankArgs& a) {
    const PipelineConfig cfg = a.cfg.load();
    const auto recs = load_records(a.records);
    RankOptions o;
    o.configs = parse_ints(a.configs);
    for (int c : o.configs)
        if (c < 1 || c > kNumConfigs) throw ValidationError("--configs entries must be in 1..8");
    o.n_catalogs = a.catalogs ? *a.catalogs : cfg.n_catalogs;
    o.seed = cfg.seed;
    o.spectra = cfg.spectra;
    o.levels = cfg.levels();
    o.max_failure_fraction = cfg.max_failure_fraction;
    const RankReport r = rank_models(recs, cfg, o);
    write_out(fs::path(a.out) / "rank_summary.csv", r.summary_csv());
    write_out(fs::path(a.out) / "rank_metrics.csv", r.metrics_csv());
    std::vector<std::vector<std::string>> frows;
    for (const auto& f : r.failures) {
        std::string msg = f.message;
        for (char& ch : msg)
            if (ch == ',' || ch == '\n') ch = ';';
        frows.push_back({f.record_id, msg});
    }
    write_out(fs::path(a.out) / "rank_failures.csv", csv_table({"record_id", "message"}, frows));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic ground motion fitting, simulation and validation"};
    app.require_subcommand(1);
    std::function<int()> run;

    PreprocessArgs pre;
    auto* s_pre = app.add_subcommand("preprocess", "rotate, decimate and truncate raw records");
    s_pre->add_option("inputs", pre.inputs, "record files or directories")->required();
    s_pre->add_flag("--rotate", pre.rotate, "inputs are component pairs; rotate to principal axes");
    s_pre->add_flag("--decimate", pre.decimate, "decimate to 50 Hz");
    s_pre->add_option("--truncate", pre.truncate, "energy fractions lo,hi");
    s_pre->add_option("--out", pre.out, "output directory")->required();
    s_pre->callback([&] { run = [&] { return cmd_preprocess(pre), 0; }; });

    FitArgs fit;
    auto* s_fit = app.add_subcommand("fit", "fit the record-level model to every record");
    fit.cfg.attach(s_fit);
    s_fit->add_option("--records", fit.records, "directory of preprocessed records");
    s_fit->add_option("--out", fit.out, "output directory");
    s_fit->callback([&] { run = [&] { return cmd_fit(fit); }; });

    EpsdArgs ep;
    auto* s_ep = app.add_subcommand("epsd", "export the multitaper spectrogram of a record");
    s_ep->add_option("--record", ep.record, "record file")->required();
    s_ep->add_option("--out", ep.out, "output CSV")->required();
    s_ep->add_option("--window", ep.window, "window length (s)");
    s_ep->add_option("--nw", ep.nw, "time-bandwidth product");
    s_ep->add_option("--tapers", ep.tapers, "number of tapers");
    s_ep->add_flag("--normalize", ep.normalize, "normalize each time slice to unit mass");
    s_ep->add_option("--smooth", ep.smooth, "Hann smoothing window along time (s)");
    s_ep->callback([&] { run = [&] { return cmd_epsd(ep), 0; }; });

    SpectraArgs sp;
    auto* s_sp = app.add_subcommand("spectra", "response spectra of records");
    s_sp->add_option("inputs", sp.inputs, "record files or directories")->required();
    s_sp->add_option("--zeta", sp.zeta, "damping ratio");
    s_sp->add_option("--mu", sp.mu, "target ductility (1 = linear)");
    s_sp->add_option("--periods", sp.periods, "lo,hi,n log-spaced periods");
    s_sp->add_option("--out", sp.out, "output CSV")->required();
    s_sp->callback([&] { run = [&] { return cmd_spectra(sp), 0; }; });

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "simulate records from a fitted model");
    s_sim->add_option("--model", sim.model, "fitted model JSON")->required();
    s_sim->add_option("--n", sim.n, "number of records");
    s_sim->add_option("--seed", sim.seed, "random seed")->required();
    s_sim->add_option("--dt", sim.dt, "time step (s)");
    s_sim->add_option("--out", sim.out, "output directory")->required();
    s_sim->callback([&] { run = [&] { return cmd_simulate(sim), 0; }; });

    FcOptArgs fco;
    auto* s_fc = app.add_subcommand("fc-opt", "search the corner frequency of a fitted model");
    fco.cfg.attach(s_fc, false);
    s_fc->add_option("--model", fco.model, "fitted model JSON")->required();
    s_fc->add_option("--record", fco.record, "recorded motion providing the target spectrum")->required();
    s_fc->add_option("--out", fco.out, "updated model JSON")->required();
    s_fc->add_option("--curve", fco.curve, "optional CSV of the objective over the grid");
    s_fc->callback([&] { run = [&] { return cmd_fc_opt(fco), 0; }; });

    MarginalsArgs mg;
    auto* s_mg = app.add_subcommand("marginals", "fit candidate marginals to every parameter column");
    s_mg->add_option("--table", mg.table, "parameter table CSV")->required();
    s_mg->add_option("--candidates", mg.candidates, "comma separated families (default: all)");
    s_mg->add_option("--out", mg.out, "output CSV")->required();
    s_mg->callback([&] { run = [&] { return cmd_marginals(mg), 0; }; });

    CopulaArgs cp;
    auto* s_cp = app.add_subcommand("copula-fit", "fit the joint parameter model");
    cp.cfg.attach(s_cp, false);
    s_cp->add_option("--table", cp.table, "parameter table CSV")->required();
    s_cp->add_option("--copula", cp.copula, "Independence, Gaussian, CVine or DVine");
    s_cp->add_option("--out", cp.out, "joint model JSON")->required();
    s_cp->callback([&] { run = [&] { return cmd_copula_fit(cp), 0; }; });

    HsimArgs hs;
    auto* s_hs = app.add_subcommand("hierarchical-sim", "sample parameters and simulate one record each");
    hs.cfg.attach(s_hs);
    s_hs->add_option("--joint", hs.joint, "joint model JSON")->required();
    s_hs->add_option("--n", hs.n, "number of records");
    s_hs->add_option("--out", hs.out, "output directory")->required();
    s_hs->callback([&] { run = [&] { return cmd_hierarchical_sim(hs), 0; }; });

    ValidateArgs va;
    auto* s_va = app.add_subcommand("validate", "compare simulated catalogs with real records");
    va.cfg.attach(s_va, false);
    s_va->add_option("--real", va.real, "directory of real records")->required();
    s_va->add_option("--sim", va.sims, "catalog directory (repeatable)")->required();
    s_va->add_option("--catalogs", va.catalogs, "split a single --sim directory into this many catalogs");
    s_va->add_option("--out", va.out, "output directory")->required();
    s_va->callback([&] { run = [&] { return cmd_validate(va), 0; }; });

    RankArgs rk;
    auto* s_rk = app.add_subcommand("rank", "rank model configurations against real records");
    rk.cfg.attach(s_rk, false);
    s_rk->add_option("--records", rk.records, "directory of real records")->required();
    s_rk->add_option("--configs", rk.configs, "comma separated configuration ids");
    s_rk->add_option("--catalogs", rk.catalogs, "catalog count (overrides the configuration)");
    s_rk->add_option("--out", rk.out, "output directory")->required();
    s_rk->callback([&] { run = [&] { return cmd_rank(rk), 0; }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return run ? run() : 0;
    } catch (const ValidationError& e) {
        log_event("error", {{"kind", "validation"}, {"message", e.what()}}, "error");
        return 2;
    } catch (const DataError& e) {
        log_event("error", {{"kind", "data"}, {"message", e.what()}}, "error");
        return 3;
    } catch (const ConvergenceError& e) {
        log_event("error", {{"kind", "convergence"}, {"message", e.what()}}, "error");
        return 3;
    } catch (const std::exception& e) {
        log_event("error", {{"kind", "internal"}, {"message", e.what()}}, "error");
        return 1;
    }
}
