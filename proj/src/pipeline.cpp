#include "gmsynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "gmsynth/error.hpp"
#include "gmsynth/parallel.hpp"
#include "gmsynth/response.hpp"
#include "gmsynth/rng.hpp"

namespace gmsynth {

namespace fs = std::filesystem;

std::string SpectrumType::name() const {
    std::string s = mu == 1.0 ? "linear" : "inelastic_mu" + format_double(mu);
    return s + "_zeta" + format_double(zeta);
}

std::vector<double> SpectrumType::periods() const { return log_spaced(period_lo, period_hi, n_periods); }

std::vector<SpectrumType> default_spectrum_types() {
    std::vector<SpectrumType> out;
    for (double z : {0.02, 0.05, 0.2}) out.push_back({z, 1.0, 0.05, 10.0, 101});
    for (double mu : {1.5, 2.0, 4.0}) out.push_back({0.05, mu, 0.1, 10.0, 101});
    return out;
}

void PipelineConfig::validate() const {
    if (schema_version != kConfigSchemaVersion)
        throw ValidationError("unsupported config schema_version " + std::to_string(schema_version));
    if (config_id < 1 || config_id > kNumConfigs) throw ValidationError("config_id must be in 1..8");
    if (!(dt_sim > 0.0)) throw ValidationError("dt_sim must be positive");
    if (!(omega_upper_hz > 0.0) || omega_upper_hz * dt_sim > 0.5)
        throw ValidationError("omega_upper_hz must be positive and below the Nyquist frequency of dt_sim");
    if (!(smooth_window_s >= 0.0)) throw ValidationError("smooth_window_s must be >= 0");
    if (!(fc.fc_lo >= 0.0) || !(fc.fc_hi >= fc.fc_lo) || !(fc.fc_step > 0.0))
        throw ValidationError("invalid corner frequency grid");
    if (fc.n_sims < 2) throw ValidationError("fc n_sims must be >= 2");
    if (fc.n_periods < 1 || !(fc.period_lo > 0.0) || !(fc.period_hi >= fc.period_lo))
        throw ValidationError("invalid fc period range");
    if (n_catalogs < 1) throw ValidationError("n_catalogs must be >= 1");
    for (const auto& s : spectra) {
        if (!(s.zeta > 0.0 && s.zeta < 1.0)) throw ValidationError("spectrum damping must be in (0, 1)");
        if (!(s.mu >= 1.0)) throw ValidationError("spectrum ductility must be >= 1");
        if (!(s.period_lo > 0.0) || !(s.period_hi >= s.period_lo) || s.n_periods < 1)
            throw ValidationError("invalid spectrum period grid");
    }
    for (double q : quantile_levels)
        if (!(q > 0.0 && q < 100.0)) throw ValidationError("quantile levels must lie in (0, 100)");
    if (marginal_candidates.empty()) throw ValidationError("no marginal candidates");
    if (!(train_split > 0.0 && train_split <= 1.0)) throw ValidationError("train_split must be in (0, 1]");
    if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
    if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0))
        throw ValidationError("max_failure_fraction must be in [0, 1]");
}

std::vector<double> PipelineConfig::levels() const {
    if (!quantile_levels.empty()) return quantile_levels;
    std::vector<double> out;
    for (int n = 1; n <= 99; ++n) out.push_back(n);
    return out;
}

// ---------------------------------------------------------------------------
// fitting

SimGrid sim_grid_for(const EnvelopeParams& env, const PipelineConfig& cfg) {
    return SimGrid::make(env.t_final(), cfg.dt_sim, cfg.omega_upper_hz);
}

FittedModel fit_record(const AccelRecord& rec, const PipelineConfig& cfg) {
    rec.validate();
    FittedModel out;
    out.record_id = rec.id;
    out.env = fit_envelope(husid(rec));

    const EpsdGrid phi = smooth_time(normalize_epsd(sttmw(rec, cfg.sttmw)), cfg.smooth_window_s);
    out.model = model_config(cfg.config_id);
    const auto series = fit_filter_snapshots(phi, out.model.filter, cfg.snapshot);
    out.model.theta_f = fit_trends(series, out.model.trends, out.env, cfg.constant_trend);

    const SimGrid grid = sim_grid_for(out.env, cfg);
    FcOptions fo = cfg.fc;
    fo.seed = cfg.seed;
    // keyed by record only, so every configuration sees the same noise
    fo.stream_label = "fc/" + rec.id;
    const auto target = linear_spectrum(rec, fc_periods(fo), fo.zeta).values;
    const FcResult r = optimize_fc(out.env, out.model, grid, target, fo);
    out.model.fc = r.fc;
    const auto it = std::find(r.fc_grid.begin(), r.fc_grid.end(), r.fc);
    out.kappa = it == r.fc_grid.end() ? energy_factor(out.env, out.model, grid)
                                      : r.kappa[static_cast<std::size_t>(it - r.fc_grid.begin())];
    return out;
}

FitBatch fit_records(const std::vector<AccelRecord>& records, const PipelineConfig& cfg) {
    cfg.validate();
    const std::size_t n = records.size();
    std::vector<FittedModel> fitted(n);
    std::vector<std::string> errors(n);
    std::vector<std::uint8_t> ok(n, 0);
    parallel_for(n, [&](std::size_t i) {
        try {
            fitted[i] = fit_record(records[i], cfg);
            ok[i] = 1;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    FitBatch b;
    b.n_records = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (ok[i])
            b.models.push_back(std::move(fitted[i]));
        else
            b.failures.push_back({records[i].id, errors[i]});
    }
    return b;
}

AccelRecord simulate_fitted(const FittedModel& m, const PipelineConfig& cfg, std::uint64_t noise_key,
                            const std::string& id) {
    const SimGrid grid = sim_grid_for(m.env, cfg);
    return simulate_gm(m.env, m.model, grid, make_noise(grid, noise_key), id);
}

// ---------------------------------------------------------------------------
// parameter table

std::vector<std::string> parameter_columns(int config_id) {
    std::vector<std::string> cols = {"log_Ia"};
    for (const auto& s : model_config(config_id).theta_names()) cols.push_back(s);
    for (const char* d : kDurationNames) cols.emplace_back(d);
    cols.emplace_back("fc");
    return cols;
}

namespace {

bool starts_with(const std::string& s, const char* p) { return s.rfind(p, 0) == 0; }
bool ends_with(const std::string& s, const char* p) {
    const std::string q(p);
    return s.size() >= q.size() && s.compare(s.size() - q.size(), q.size(), q) == 0;
}

}  // namespace

std::string parameter_unit(const std::string& c) {
    if (c == "log_Ia") return "ln(g*s)";
    if (c == "fc") return "Hz";
    if (starts_with(c, "D_")) return "s";
    if (starts_with(c, "omega")) return ends_with(c, "_slope") ? "rad/s^2" : "rad/s";
    if (starts_with(c, "zeta")) return ends_with(c, "_slope") ? "1/s" : "-";
    if (starts_with(c, "pi")) return ends_with(c, "_slope") ? "1/s" : "-";
    return "-";
}

std::vector<double> model_to_row(const FittedModel& m) {
    std::vector<double> row;
    row.push_back(std::log(m.env.ia_total));
    row.insert(row.end(), m.model.theta_f.begin(), m.model.theta_f.end());
    row.insert(row.end(), m.env.d.begin(), m.env.d.end());
    row.push_back(m.model.fc);
    return row;
}

FittedModel model_from_row(int config_id, const std::vector<double>& row, const std::string& id) {
    FittedModel m;
    m.record_id = id;
    m.model = model_config(config_id);
    const std::size_t nt = static_cast<std::size_t>(m.model.trends.n_params());
    if (row.size() != nt + 8)
        throw ValidationError("parameter row has " + std::to_string(row.size()) + " values, configuration " +
                              std::to_string(config_id) + " needs " + std::to_string(nt + 8));
    m.env.ia_total = std::exp(row[0]);
    m.model.theta_f.assign(row.begin() + 1, row.begin() + 1 + static_cast<std::ptrdiff_t>(nt));
    for (std::size_t k = 0; k < 6; ++k) m.env.d[k] = row[1 + nt + k];
    m.model.fc = row[7 + nt];
    m.env.validate();
    m.model.validate();
    return m;
}

ParameterTable make_parameter_table(const std::vector<FittedModel>& models) {
    ParameterTable t;
    if (models.empty()) return t;
    const int cid = models.front().model.config_id;
    t.columns = parameter_columns(cid);
    for (const auto& c : t.columns) t.units.push_back(parameter_unit(c));
    t.values.resize(static_cast<Eigen::Index>(models.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < models.size(); ++r) {
        if (models[r].model.config_id != cid) throw ValidationError("parameter table mixes configurations");
        const auto row = model_to_row(models[r]);
        for (std::size_t c = 0; c < row.size(); ++c)
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        t.record_ids.push_back(models[r].record_id);
    }
    return t;
}

std::vector<double> ParameterTable::column(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ValidationError("no column '" + name + "' in parameter table");
    const auto c = static_cast<Eigen::Index>(it - columns.begin());
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = values(static_cast<Eigen::Index>(r), c);
    return out;
}

std::string ParameterTable::to_csv() const {
    std::ostringstream os;
    os << "# units:";
    for (std::size_t c = 0; c < units.size(); ++c) os << (c ? "," : " ") << columns[c] << "=" << units[c];
    os << "\nrecord_id";
    for (const auto& c : columns) os << "," << c;
    os << "\n";
    for (std::size_t r = 0; r < rows(); ++r) {
        os << record_ids[r];
        for (std::size_t c = 0; c < columns.size(); ++c)
            os << "," << format_double(values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        os << "\n";
    }
    return os.str();
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && s[i] == ' ') ++i;
    return s.substr(i);
}

}  // namespace

ParameterTable ParameterTable::from_csv(const std::string& text) {
    ParameterTable t;
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string tag = "# units:";
            if (line.rfind(tag, 0) == 0) {
                for (const auto& f : split(trim(line.substr(tag.size())), ',')) {
                    const auto eq = f.find('=');
                    t.units.push_back(eq == std::string::npos ? trim(f) : trim(f.substr(eq + 1)));
                }
            }
            continue;
        }
        auto fields = split(line, ',');
        for (auto& f : fields) f = trim(f);
        if (!header) {
            if (fields.empty() || fields[0] != "record_id")
                throw DataError("parameter table header must start with record_id");
            t.columns.assign(fields.begin() + 1, fields.end());
            header = true;
            continue;
        }
        if (fields.size() != t.columns.size() + 1)
            throw DataError("parameter table line " + std::to_string(lineno) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(t.columns.size() + 1));
        std::vector<double> row;
        for (std::size_t c = 1; c < fields.size(); ++c) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(fields[c], &pos);
                if (pos != fields[c].size() || !std::isfinite(v)) throw std::invalid_argument("bad");
                row.push_back(v);
            } catch (const std::exception&) {
                throw DataError("parameter table line " + std::to_string(lineno) + ": invalid number '" +
                                fields[c] + "'");
            }
        }
        t.record_ids.push_back(fields[0]);
        rows.push_back(std::move(row));
    }
    if (!header) throw DataError("parameter table has no header");
    if (t.units.size() != t.columns.size()) {
        t.units.clear();
        for (const auto& c : t.columns) t.units.push_back(parameter_unit(c));
    }
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return t;
}

std::pair<double, double> default_support(const std::string& c) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (c == "fc") return {0.0, 2.0};
    if (c == "D_0_5") return {0.1, 20.0};
    if (c == "D_5_30") return {0.1, 15.0};
    if (c == "D_30_45") return {0.1, 10.0};
    if (c == "D_45_75") return {0.1, 20.0};
    if (c == "D_75_95" || c == "D_95_100") return {0.1, 40.0};
    if (ends_with(c, "_slope")) return {-inf, inf};
    if (starts_with(c, "omega")) return {0.0, inf};
    if (starts_with(c, "zeta")) return {kZetaMin, kZetaMax};
    if (starts_with(c, "pi")) return {0.0, 1.0};
    return {-inf, inf};
}

JointModel fit_joint_table(const ParameterTable& t, const PipelineConfig& cfg) {
    std::vector<std::pair<double, double>> supports;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        auto s = default_support(t.columns[c]);
        if (t.rows() > 0) {
            const auto col = t.values.col(static_cast<Eigen::Index>(c));
            s.first = std::min(s.first, col.minCoeff());
            s.second = std::max(s.second, col.maxCoeff());
        }
        supports.push_back(s);
    }
    JointFitOptions opt;
    opt.candidates = cfg.marginal_candidates;
    opt.copula = cfg.copula;
    return fit_joint(t.values, t.columns, supports, opt);
}

HierarchicalCatalog hierarchical_sim(const JointModel& joint, int config_id, std::size_t n, std::uint64_t seed,
                                     const PipelineConfig& cfg) {
    joint.validate();
    const auto cols = parameter_columns(config_id);
    std::vector<Eigen::Index> src(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto it = std::find(joint.names.begin(), joint.names.end(), cols[c]);
        if (it == joint.names.end())
            throw ValidationError("joint model lacks parameter '" + cols[c] + "' of configuration " +
                                  std::to_string(config_id));
        src[c] = static_cast<Eigen::Index>(it - joint.names.begin());
    }

    HierarchicalCatalog cat;
    cat.parameters.columns = cols;
    for (const auto& c : cols) cat.parameters.units.push_back(parameter_unit(c));
    cat.parameters.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    if (n == 0) return cat;

    const Eigen::MatrixXd draws = sample_joint(joint, n, seed);
    cat.records.resize(n);
    cat.parameters.record_ids.resize(n);
    parallel_for(n, [&](std::size_t r) {
        char id[32];
        std::snprintf(id, sizeof id, "sim_%05zu", r);
        std::vector<double> row(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) row[c] = draws(static_cast<Eigen::Index>(r), src[c]);
        const FittedModel m = model_from_row(config_id, row, id);
        cat.records[r] = simulate_fitted(m, cfg, stream_key(seed, "hsim", r), id);
        cat.parameters.record_ids[r] = id;
        for (std::size_t c = 0; c < cols.size(); ++c)
            cat.parameters.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
    });
    return cat;
}

std::vector<AccelRecord> load_records(const fs::path& dir) {
    const auto files = list_record_files(dir);
    std::vector<AccelRecord> out(files.size());
    parallel_for(files.size(), [&](std::size_t i) { out[i] = load_record(files[i]); });
    return out;
}

void save_records(const std::vector<AccelRecord>& recs, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& r : recs) {
        if (r.id.empty() || r.id.find('/') != std::string::npos)
            throw ValidationError("record id '" + r.id + "' is not a valid file name");
        save_record(r, dir / (r.id + ".csv"));
    }
}

}  // namespace gmsynth
