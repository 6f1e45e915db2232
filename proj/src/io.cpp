#include "gmsynth/io.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gmsynth/error.hpp"
#include "gmsynth/records.hpp"

namespace gmsynth {

using nlohmann::json;

namespace {

constexpr int kModelSchemaVersion = 1;

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

/// Wraps nlohmann type errors into DataError with context.
template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed ") + what + ": " + e.what());
    }
}

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double bound_from_json(const json& j, double inf_value) { return j.is_null() ? inf_value : j.get<double>(); }

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// envelope ------------------------------------------------------------------

json env_json(const EnvelopeParams& p) {
    json j = json::object();
    for (std::size_t k = 0; k < 6; ++k) j[kDurationNames[k]] = p.d[k];
    j["ia_total"] = p.ia_total;
    return j;
}

EnvelopeParams env_from(const json& j) {
    EnvelopeParams p;
    for (std::size_t k = 0; k < 6; ++k) {
        if (!j.contains(kDurationNames[k])) throw DataError(std::string("envelope lacks ") + kDurationNames[k]);
        p.d[k] = j.at(kDurationNames[k]).get<double>();
    }
    if (!j.contains("ia_total")) throw DataError("envelope lacks ia_total");
    p.ia_total = j.at("ia_total").get<double>();
    p.validate();
    return p;
}

// spectral model ------------------------------------------------------------

json spectral_json(const SpectralModel& m) {
    json j;
    j["config_id"] = m.config_id;
    j["filter"] = {{"kind", to_string(m.filter.kind)}, {"J", m.filter.J}, {"base", to_string(m.filter.base)}};
    json trends = json::array();
    for (auto k : m.trends.kinds) trends.push_back(to_string(k));
    j["trends"] = trends;
    json theta = json::object();
    const auto names = m.theta_names();
    for (std::size_t i = 0; i < m.theta_f.size() && i < names.size(); ++i) theta[names[i]] = m.theta_f[i];
    j["theta_f"] = theta;
    j["fc"] = m.fc;
    return j;
}

SpectralModel spectral_from(const json& j) {
    SpectralModel m;
    const int cid = j.value("config_id", 0);
    if (cid >= 1 && cid <= kNumConfigs) m = model_config(cid);
    m.config_id = cid;
    if (j.contains("filter")) {
        const auto& f = j.at("filter");
        m.filter.kind = filter_kind_from_string(f.at("kind").get<std::string>());
        m.filter.J = f.value("J", 1);
        m.filter.base = filter_kind_from_string(f.value("base", std::string("SecondOrder")));
    }
    if (j.contains("trends")) {
        m.trends.kinds.clear();
        for (const auto& k : j.at("trends")) m.trends.kinds.push_back(trend_kind_from_string(k.get<std::string>()));
    }
    if (m.trends.kinds.empty()) throw DataError("spectral model needs a config_id in 1..8 or explicit trends");
    m.theta_f.clear();
    const auto& th = j.at("theta_f");
    if (th.is_array()) {
        for (const auto& v : th) m.theta_f.push_back(v.get<double>());
    } else {
        for (const auto& name : m.theta_names()) {
            if (!th.contains(name)) throw DataError("theta_f lacks '" + name + "'");
            m.theta_f.push_back(th.at(name).get<double>());
        }
    }
    m.fc = j.value("fc", 0.0);
    m.validate();
    return m;
}

// marginals and copulas -----------------------------------------------------

json marginal_json(const MarginalModel& m) {
    json j;
    j["family"] = to_string(m.family);
    json p = json::object();
    const auto names = family_param_names(m.family);
    for (std::size_t i = 0; i < m.params.size() && i < names.size(); ++i) p[names[i]] = m.params[i];
    j["params"] = p;
    j["support"] = json::array({bound_to_json(m.lo), bound_to_json(m.hi)});
    return j;
}

MarginalModel marginal_from(const json& j) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    MarginalModel m;
    m.family = family_from_string(j.at("family").get<std::string>());
    const auto& p = j.at("params");
    m.params.clear();
    if (p.is_array()) {
        for (const auto& v : p) m.params.push_back(v.get<double>());
    } else {
        for (const auto& name : family_param_names(m.family)) {
            if (!p.contains(name)) throw DataError("marginal " + to_string(m.family) + " lacks '" + name + "'");
            m.params.push_back(p.at(name).get<double>());
        }
    }
    if (j.contains("support")) {
        const auto& s = j.at("support");
        if (!s.is_array() || s.size() != 2) throw DataError("support must be [lo, hi]");
        m.lo = bound_from_json(s[0], -inf);
        m.hi = bound_from_json(s[1], inf);
    }
    m.validate();
    return m;
}

json pair_json(const PairCopula& c) {
    json j = {{"family", to_string(c.family)}, {"theta", c.theta}};
    if (c.family == PairFamily::StudentT) j["nu"] = c.nu;
    j["log_lik"] = c.log_lik;
    j["bic"] = c.bic;
    return j;
}

PairCopula pair_from(const json& j) {
    PairCopula c;
    c.family = pair_family_from_string(j.at("family").get<std::string>());
    c.theta = j.value("theta", 0.0);
    c.nu = j.value("nu", 0.0);
    c.log_lik = j.value("log_lik", 0.0);
    c.bic = j.value("bic", 0.0);
    return c;
}

json joint_json(const JointModel& m) {
    json j;
    j["schema_version"] = kModelSchemaVersion;
    j["names"] = m.names;
    json margs = json::array();
    for (std::size_t i = 0; i < m.marginals.size(); ++i) {
        json mj = marginal_json(m.marginals[i]);
        mj["name"] = i < m.names.size() ? m.names[i] : "";
        margs.push_back(mj);
    }
    j["marginals"] = margs;
    json cop = {{"kind", to_string(m.copula)}};
    if (m.copula == CopulaKind::Gaussian) {
        json R = json::array();
        for (Eigen::Index r = 0; r < m.gaussian.R.rows(); ++r) {
            json row = json::array();
            for (Eigen::Index c = 0; c < m.gaussian.R.cols(); ++c) row.push_back(m.gaussian.R(r, c));
            R.push_back(row);
        }
        cop["R"] = R;
    } else if (m.copula == CopulaKind::CVine || m.copula == CopulaKind::DVine) {
        cop["order"] = m.vine.order;
        json trees = json::array();
        for (const auto& t : m.vine.trees) {
            json tj = json::array();
            for (const auto& e : t) tj.push_back(pair_json(e));
            trees.push_back(tj);
        }
        cop["trees"] = trees;
        cop["log_lik"] = m.vine.log_lik;
        cop["bic"] = m.vine.bic;
    }
    j["copula"] = cop;
    return j;
}

JointModel joint_from(const json& j) {
    const int v = j.value("schema_version", -1);
    if (v != kModelSchemaVersion) throw DataError("unsupported joint model schema_version " + std::to_string(v));
    JointModel m;
    for (const auto& mj : j.at("marginals")) m.marginals.push_back(marginal_from(mj));
    if (j.contains("names")) {
        m.names = j.at("names").get<std::vector<std::string>>();
    } else {
        for (const auto& mj : j.at("marginals")) m.names.push_back(mj.at("name").get<std::string>());
    }
    const auto& cop = j.at("copula");
    m.copula = copula_kind_from_string(cop.at("kind").get<std::string>());
    const std::size_t M = m.marginals.size();
    if (m.copula == CopulaKind::Gaussian) {
        const auto& R = cop.at("R");
        m.gaussian.R.resize(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
        if (R.size() != M) throw DataError("copula R has the wrong dimension");
        for (std::size_t r = 0; r < M; ++r) {
            if (R[r].size() != M) throw DataError("copula R has the wrong dimension");
            for (std::size_t c = 0; c < M; ++c)
                m.gaussian.R(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = R[r][c].get<double>();
        }
    } else if (m.copula == CopulaKind::CVine || m.copula == CopulaKind::DVine) {
        m.vine.kind = m.copula == CopulaKind::CVine ? VineKind::CVine : VineKind::DVine;
        m.vine.order = cop.at("order").get<std::vector<int>>();
        for (const auto& tj : cop.at("trees")) {
            std::vector<PairCopula> t;
            for (const auto& e : tj) t.push_back(pair_from(e));
            m.vine.trees.push_back(std::move(t));
        }
        m.vine.log_lik = cop.value("log_lik", 0.0);
        m.vine.bic = cop.value("bic", 0.0);
    }
    m.validate();
    return m;
}

// config --------------------------------------------------------------------

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

}  // namespace

std::string envelope_to_json(const EnvelopeParams& p) { return dump(env_json(p)); }
EnvelopeParams envelope_from_json(const std::string& text) {
    const json j = parse(text, "envelope");
    return guarded("envelope", [&] { return env_from(j); });
}

std::string spectral_model_to_json(const SpectralModel& m) { return dump(spectral_json(m)); }
SpectralModel spectral_model_from_json(const std::string& text) {
    const json j = parse(text, "spectral model");
    return guarded("spectral model", [&] { return spectral_from(j); });
}

std::string fitted_model_to_json(const FittedModel& m) {
    json j;
    j["schema_version"] = kModelSchemaVersion;
    j["record_id"] = m.record_id;
    j["envelope"] = env_json(m.env);
    j["spectral"] = spectral_json(m.model);
    j["kappa"] = m.kappa;
    return dump(j);
}

FittedModel fitted_model_from_json(const std::string& text) {
    const json j = parse(text, "fitted model");
    return guarded("fitted model", [&] {
        const int v = j.value("schema_version", -1);
        if (v != kModelSchemaVersion) throw DataError("unsupported model schema_version " + std::to_string(v));
        FittedModel m;
        m.record_id = j.value("record_id", std::string());
        m.env = env_from(j.at("envelope"));
        m.model = spectral_from(j.at("spectral"));
        m.kappa = j.value("kappa", 1.0);
        return m;
    });
}

std::string marginal_to_json(const MarginalModel& m) { return dump(marginal_json(m)); }
MarginalModel marginal_from_json(const std::string& text) {
    const json j = parse(text, "marginal");
    return guarded("marginal", [&] { return marginal_from(j); });
}

std::string joint_model_to_json(const JointModel& m) { return dump(joint_json(m)); }
JointModel joint_model_from_json(const std::string& text) {
    const json j = parse(text, "joint model");
    return guarded("joint model", [&] { return joint_from(j); });
}

std::string config_to_json(const PipelineConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["config_id"] = c.config_id;
    j["seed"] = c.seed;
    j["dt_sim"] = c.dt_sim;
    j["omega_upper_hz"] = c.omega_upper_hz;
    j["sttmw"] = {{"window_s", c.sttmw.window_s},
                  {"nw", c.sttmw.nw},
                  {"n_tapers", c.sttmw.n_tapers},
                  {"hop_s", c.sttmw.hop_s},
                  {"f_max_hz", c.sttmw.f_max_hz}};
    j["smooth_window_s"] = c.smooth_window_s;
    j["snapshot"] = {{"max_iter", c.snapshot.max_iter},
                     {"omega_multipliers", c.snapshot.omega_multipliers},
                     {"zeta_init", c.snapshot.zeta_init},
                     {"window_correction", c.snapshot.window_correction}};
    j["constant_trend"] = to_string(c.constant_trend);
    j["fc"] = {{"fc_lo", c.fc.fc_lo},         {"fc_hi", c.fc.fc_hi},         {"fc_step", c.fc.fc_step},
               {"n_sims", c.fc.n_sims},       {"n_periods", c.fc.n_periods}, {"period_lo", c.fc.period_lo},
               {"period_hi", c.fc.period_hi}, {"zeta", c.fc.zeta}};
    j["n_catalogs"] = c.n_catalogs;
    json sp = json::array();
    for (const auto& s : c.spectra)
        sp.push_back({{"zeta", s.zeta},
                      {"mu", s.mu},
                      {"period_lo", s.period_lo},
                      {"period_hi", s.period_hi},
                      {"n_periods", s.n_periods}});
    j["spectra"] = sp;
    j["quantile_levels"] = c.quantile_levels;
    j["copula"] = to_string(c.copula);
    json cands = json::array();
    for (auto f : c.marginal_candidates) cands.push_back(to_string(f));
    j["marginal_candidates"] = cands;
    j["train_split"] = c.train_split;
    j["n_samples"] = c.n_samples;
    j["max_failure_fraction"] = c.max_failure_fraction;
    j["records_dir"] = c.records_dir;
    j["out_dir"] = c.out_dir;
    return dump(j);
}

PipelineConfig config_from_json(const std::string& text) {
    const json j = parse(text, "config");
    if (!j.is_object()) throw DataError("config must be a JSON object");
    PipelineConfig c;
    guarded("config", [&] {
        reject_unknown(j,
                       {"schema_version", "config_id", "seed", "dt_sim", "omega_upper_hz", "sttmw",
                        "smooth_window_s", "snapshot", "constant_trend", "fc", "n_catalogs", "spectra", "quantile_levels", "copula",
                        "marginal_candidates", "train_split", "n_samples", "max_failure_fraction", "records_dir",
                        "out_dir"},
                       "config");
        if (!j.contains("schema_version")) throw ValidationError("config lacks schema_version");
        if (!j.contains("seed")) throw ValidationError("config lacks seed");
        read_opt(j, "schema_version", c.schema_version);
        read_opt(j, "config_id", c.config_id);
        read_opt(j, "seed", c.seed);
        read_opt(j, "dt_sim", c.dt_sim);
        read_opt(j, "omega_upper_hz", c.omega_upper_hz);
        if (j.contains("sttmw")) {
            const auto& s = j.at("sttmw");
            reject_unknown(s, {"window_s", "nw", "n_tapers", "hop_s", "f_max_hz"}, "sttmw");
            read_opt(s, "window_s", c.sttmw.window_s);
            read_opt(s, "nw", c.sttmw.nw);
            read_opt(s, "n_tapers", c.sttmw.n_tapers);
            read_opt(s, "hop_s", c.sttmw.hop_s);
            read_opt(s, "f_max_hz", c.sttmw.f_max_hz);
        }
        read_opt(j, "smooth_window_s", c.smooth_window_s);
        if (j.contains("snapshot")) {
            const auto& s = j.at("snapshot");
            reject_unknown(s, {"max_iter", "omega_multipliers", "zeta_init", "window_correction"}, "snapshot");
            read_opt(s, "max_iter", c.snapshot.max_iter);
            read_opt(s, "omega_multipliers", c.snapshot.omega_multipliers);
            read_opt(s, "zeta_init", c.snapshot.zeta_init);
            read_opt(s, "window_correction", c.snapshot.window_correction);
        }
        if (j.contains("constant_trend"))
            c.constant_trend = constant_trend_rule_from_string(j.at("constant_trend").get<std::string>());
        if (j.contains("fc")) {
            const auto& f = j.at("fc");
            reject_unknown(f, {"fc_lo", "fc_hi", "fc_step", "n_sims", "n_periods", "period_lo", "period_hi", "zeta"},
                           "fc");
            read_opt(f, "fc_lo", c.fc.fc_lo);
            read_opt(f, "fc_hi", c.fc.fc_hi);
            read_opt(f, "fc_step", c.fc.fc_step);
            read_opt(f, "n_sims", c.fc.n_sims);
            read_opt(f, "n_periods", c.fc.n_periods);
            read_opt(f, "period_lo", c.fc.period_lo);
            read_opt(f, "period_hi", c.fc.period_hi);
            read_opt(f, "zeta", c.fc.zeta);
        }
        read_opt(j, "n_catalogs", c.n_catalogs);
        if (j.contains("spectra")) {
            c.spectra.clear();
            for (const auto& s : j.at("spectra")) {
                reject_unknown(s, {"zeta", "mu", "period_lo", "period_hi", "n_periods"}, "spectra");
                SpectrumType t;
                read_opt(s, "zeta", t.zeta);
                read_opt(s, "mu", t.mu);
                read_opt(s, "period_lo", t.period_lo);
                read_opt(s, "period_hi", t.period_hi);
                read_opt(s, "n_periods", t.n_periods);
                c.spectra.push_back(t);
            }
        }
        read_opt(j, "quantile_levels", c.quantile_levels);
        if (j.contains("copula")) c.copula = copula_kind_from_string(j.at("copula").get<std::string>());
        if (j.contains("marginal_candidates")) {
            c.marginal_candidates.clear();
            for (const auto& f : j.at("marginal_candidates"))
                c.marginal_candidates.push_back(family_from_string(f.get<std::string>()));
        }
        read_opt(j, "train_split", c.train_split);
        read_opt(j, "n_samples", c.n_samples);
        read_opt(j, "max_failure_fraction", c.max_failure_fraction);
        read_opt(j, "records_dir", c.records_dir);
        read_opt(j, "out_dir", c.out_dir);
        return 0;
    });
    c.fc.seed = c.seed;
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) { return config_from_json(read_file(path)); }

std::string epsd_to_csv(const EpsdGrid& e) {
    std::string out = "t,omega,S\n";
    for (std::size_t n = 0; n < e.n_times(); ++n) {
        const std::string t = format_double(e.times[n]) + ",";
        for (std::size_t k = 0; k < e.freq.n; ++k)
            out += t + format_double(e.freq.omega(k)) + "," + format_double(e.at(n, k)) + "\n";
    }
    return out;
}

std::string spectra_to_csv(const std::vector<std::string>& ids, const std::vector<SpectrumResult>& s) {
    if (ids.size() != s.size()) throw ValidationError("spectra and ids differ in length");
    std::string out = "record_id,zeta,mu,period,sa\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string head = ids[i] + "," + format_double(s[i].zeta) + "," + format_double(s[i].mu) + ",";
        for (std::size_t p = 0; p < s[i].periods.size(); ++p)
            out += head + format_double(s[i].periods[p]) + "," + format_double(s[i].values[p]) + "\n";
    }
    return out;
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    auto line = [&](const std::vector<std::string>& f) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (i) out += ',';
            out += f[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

void log_event(const std::string& event, const std::map<std::string, std::string>& fields, const std::string& level) {
    static std::mutex mu;
    json j = json::object();
    for (const auto& [k, v] : fields) j[k] = v;
    j["event"] = event;
    j["level"] = level;
    const std::string line = j.dump() + "\n";
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << line << std::flush;
}

}  // namespace gmsynth
