#include "gmsynth/validate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gmsynth/error.hpp"
#include "gmsynth/parallel.hpp"
#include "gmsynth/rng.hpp"

namespace gmsynth {

void SpectraMatrix::validate() const {
    if (static_cast<std::size_t>(sa.cols()) != periods.size())
        throw ValidationError("spectra matrix columns do not match the period grid");
    for (Eigen::Index r = 0; r < sa.rows(); ++r)
        for (Eigen::Index c = 0; c < sa.cols(); ++c)
            if (!std::isfinite(sa(r, c)) || !(sa(r, c) > 0.0))
                throw DataError("spectral acceleration must be finite and positive");
}

double empirical_quantile(const std::vector<double>& x, double p) {
    if (x.empty()) throw ValidationError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
    const double h = static_cast<double>(x.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= x.size()) return x.back();
    return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

SpectraStats spectra_stats(const SpectraMatrix& m, const std::vector<double>& levels) {
    m.validate();
    const auto n = static_cast<Eigen::Index>(m.n_records());
    if (n < 2) throw ValidationError("spectra statistics need at least 2 records");
    const Eigen::Index P = m.sa.cols();
    SpectraStats s;
    s.levels = levels;
    s.quantiles.resize(static_cast<Eigen::Index>(levels.size()), P);
    s.log_std.assign(static_cast<std::size_t>(P), 0.0);

    Eigen::MatrixXd L = m.sa.array().log().matrix();
    std::vector<std::uint8_t> constant(static_cast<std::size_t>(P), 0);
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index p = 0; p < P; ++p) {
        for (Eigen::Index r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = m.sa(r, p);
        std::sort(col.begin(), col.end());
        for (std::size_t l = 0; l < levels.size(); ++l)
            s.quantiles(static_cast<Eigen::Index>(l), p) = empirical_quantile(col, levels[l] / 100.0);
        // exact zero spread for constant columns, independent of rounding in the mean
        constant[static_cast<std::size_t>(p)] = col.front() == col.back();
        const double mean = L.col(p).mean();
        L.col(p).array() -= mean;
        if (constant[static_cast<std::size_t>(p)]) L.col(p).setZero();
    }
    const Eigen::MatrixXd cov = (L.transpose() * L) / static_cast<double>(n - 1);
    s.corr.resize(P, P);
    for (Eigen::Index i = 0; i < P; ++i) {
        s.log_std[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, cov(i, i)));
        for (Eigen::Index j = 0; j < P; ++j) {
            if (i == j) {
                s.corr(i, j) = 1.0;
            } else if (cov(i, i) <= 0.0 || cov(j, j) <= 0.0) {
                s.corr(i, j) = 0.0;
            } else {
                s.corr(i, j) = std::clamp(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j)), -1.0, 1.0);
            }
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// spectra

std::vector<double> record_spectrum(const AccelRecord& rec, const SpectrumType& type) {
    const auto periods = type.periods();
    if (type.mu == 1.0) return linear_spectrum(rec, periods, type.zeta).values;
    return inelastic_spectrum(rec, periods, type.zeta, type.mu).values;
}

namespace {

std::string cache_key(const AccelRecord& rec, const SpectrumType& t) {
    std::string bytes(reinterpret_cast<const char*>(rec.samples.data()), rec.samples.size() * sizeof(double));
    std::ostringstream os;
    os << std::hex << hash_string(bytes) << ':' << rec.samples.size() << ':' << format_double(rec.dt) << ':'
       << format_double(t.zeta) << ':' << format_double(t.mu) << ':' << format_double(t.period_lo) << ':'
       << format_double(t.period_hi) << ':' << t.n_periods;
    return os.str();
}

}  // namespace

std::vector<double> SpectraCache::get(const AccelRecord& rec, const SpectrumType& type) {
    const std::string key = cache_key(rec, type);
    {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto v = record_spectrum(rec, type);
    std::lock_guard<std::mutex> lock(mu_);
    cache_.emplace(key, v);
    return v;
}

std::size_t SpectraCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
}

SpectraMatrix compute_spectra(const std::vector<AccelRecord>& recs, const SpectrumType& type, SpectraCache* cache) {
    SpectraMatrix m;
    m.periods = type.periods();
    m.zeta = type.zeta;
    m.mu = type.mu;
    m.sa.resize(static_cast<Eigen::Index>(recs.size()), static_cast<Eigen::Index>(m.periods.size()));
    parallel_for(recs.size(), [&](std::size_t i) {
        const auto v = cache ? cache->get(recs[i], type) : record_spectrum(recs[i], type);
        for (std::size_t p = 0; p < v.size(); ++p)
            m.sa(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = v[p];
    });
    return m;
}

// ---------------------------------------------------------------------------
// metrics

EpsResult summarize_eps(std::vector<double> per_catalog) {
    EpsResult r;
    r.per_catalog = std::move(per_catalog);
    const auto n = static_cast<double>(r.per_catalog.size());
    if (r.per_catalog.empty()) return r;
    r.eps = std::accumulate(r.per_catalog.begin(), r.per_catalog.end(), 0.0) / n;
    if (r.per_catalog.size() > 1) {
        double ss = 0.0;
        for (double v : r.per_catalog) ss += (v - r.eps) * (v - r.eps);
        r.sd = std::sqrt(ss / (n - 1.0));
    }
    return r;
}

EpsResult eps_curve(const std::vector<double>& real, const std::vector<std::vector<double>>& sims) {
    if (sims.empty()) throw ValidationError("eps_curve needs at least one catalog");
    for (double q : real)
        if (q == 0.0 || !std::isfinite(q)) throw DataError("real statistic is zero or non-finite");
    std::vector<double> per(sims.size());
    for (std::size_t c = 0; c < sims.size(); ++c) {
        if (sims[c].size() != real.size()) throw ValidationError("catalog curve length differs from the real curve");
        double s = 0.0;
        for (std::size_t i = 0; i < real.size(); ++i) s += std::abs((real[i] - sims[c][i]) / real[i]);
        per[c] = real.empty() ? 0.0 : s / static_cast<double>(real.size());
    }
    return summarize_eps(std::move(per));
}

EpsResult eps_corr(const Eigen::MatrixXd& real, const std::vector<Eigen::MatrixXd>& sims) {
    if (sims.empty()) throw ValidationError("eps_corr needs at least one catalog");
    const Eigen::Index P = real.rows();
    if (real.cols() != P) throw ValidationError("correlation matrix must be square");
    std::vector<double> per(sims.size());
    for (std::size_t c = 0; c < sims.size(); ++c) {
        if (sims[c].rows() != P || sims[c].cols() != P) throw ValidationError("correlation grids differ");
        double s = 0.0;
        for (Eigen::Index i = 0; i < P; ++i)
            for (Eigen::Index j = 0; j < P; ++j)
                if (i != j) s += std::abs(real(i, j) - sims[c](i, j));
        per[c] = P > 1 ? s / static_cast<double>(P * (P - 1)) : 0.0;
    }
    return summarize_eps(std::move(per));
}

std::vector<double> ImCdfCurve::lower() const {
    std::vector<double> out(mean.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean[i] - 2.0 * sd[i];
    return out;
}

std::vector<double> ImCdfCurve::upper() const {
    std::vector<double> out(mean.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean[i] + 2.0 * sd[i];
    return out;
}

namespace {

std::vector<double> ecdf_on(std::vector<double> x, const std::vector<double>& grid) {
    std::sort(x.begin(), x.end());
    std::vector<double> out(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        out[g] = static_cast<double>(std::upper_bound(x.begin(), x.end(), grid[g]) - x.begin()) /
                 static_cast<double>(x.size());
    return out;
}

}  // namespace

ImCdfCurve im_cdf_compare(const std::string& im, const std::vector<double>& real,
                          const std::vector<std::vector<double>>& sims, std::size_t n_grid) {
    if (sims.size() < 2) throw ValidationError("IM CDF comparison needs at least 2 catalogs");
    if (real.empty()) throw ValidationError("IM CDF comparison needs real values");
    if (n_grid < 2) throw ValidationError("IM CDF grid needs at least 2 points");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    auto scan = [&](const std::vector<double>& v) {
        if (v.empty()) throw ValidationError("empty catalog in IM CDF comparison");
        for (double x : v) {
            if (!std::isfinite(x)) throw DataError("non-finite intensity measure");
            if (x > 0.0) lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    };
    scan(real);
    for (const auto& s : sims) scan(s);
    if (!(hi > 0.0)) throw DataError("intensity measure is zero everywhere");

    ImCdfCurve c;
    c.im = im;
    c.grid = hi > lo ? log_spaced(lo, hi, n_grid) : std::vector<double>(n_grid, hi);
    c.grid.front() = lo;
    c.grid.back() = hi;
    c.real_cdf = ecdf_on(real, c.grid);
    c.mean.assign(n_grid, 0.0);
    c.sd.assign(n_grid, 0.0);
    std::vector<std::vector<double>> cdfs;
    for (const auto& s : sims) cdfs.push_back(ecdf_on(s, c.grid));
    const double k = static_cast<double>(cdfs.size());
    for (std::size_t g = 0; g < n_grid; ++g) {
        double m = 0.0;
        for (const auto& f : cdfs) m += f[g];
        m /= k;
        double ss = 0.0;
        for (const auto& f : cdfs) ss += (f[g] - m) * (f[g] - m);
        c.mean[g] = m;
        c.sd[g] = std::sqrt(ss / (k - 1.0));
    }
    return c;
}

std::vector<ImCdfCurve> im_cdf_compare(const std::vector<AccelRecord>& real,
                                       const std::vector<std::vector<AccelRecord>>& sims, std::size_t n_grid) {
    auto ims = [](const std::vector<AccelRecord>& recs) {
        std::vector<IntensityMeasures> out(recs.size());
        parallel_for(recs.size(), [&](std::size_t i) { out[i] = intensity_measures(recs[i]); });
        return out;
    };
    const auto r = ims(real);
    std::vector<std::vector<IntensityMeasures>> s;
    for (const auto& c : sims) s.push_back(ims(c));

    using Getter = double (*)(const IntensityMeasures&);
    const std::vector<std::pair<std::string, Getter>> fields = {
        {"pga", [](const IntensityMeasures& m) { return m.pga; }},
        {"pgv", [](const IntensityMeasures& m) { return m.pgv; }},
        {"ia", [](const IntensityMeasures& m) { return m.ia; }},
        {"d5_95", [](const IntensityMeasures& m) { return m.d5_95; }}};
    std::vector<ImCdfCurve> out;
    for (const auto& [name, get] : fields) {
        std::vector<double> rv;
        for (const auto& m : r) rv.push_back(get(m));
        std::vector<std::vector<double>> sv;
        for (const auto& c : s) {
            sv.emplace_back();
            for (const auto& m : c) sv.back().push_back(get(m));
        }
        out.push_back(im_cdf_compare(name, rv, sv, n_grid));
    }
    return out;
}

// ---------------------------------------------------------------------------
// reports

std::string ValidationReport::metrics_csv() const {
    std::string out = "spectrum,metric,eps,sd,n_catalogs\n";
    for (const auto& m : metrics)
        out += m.spectrum + "," + m.metric + "," + format_double(m.eps) + "," + format_double(m.sd) + "," +
               std::to_string(m.n_catalogs) + "\n";
    return out;
}

std::string ValidationReport::curves_csv() const {
    std::string out = "curve,x,y\n";
    for (const auto& c : curves) out += c.curve + "," + format_double(c.x) + "," + format_double(c.y) + "\n";
    return out;
}

const MetricRow& ValidationReport::find(const std::string& spectrum, const std::string& metric) const {
    for (const auto& m : metrics)
        if (m.spectrum == spectrum && m.metric == metric) return m;
    throw ValidationError("no metric " + metric + " for spectrum " + spectrum);
}

namespace {

std::string level_name(double l) {
    return "q" + format_double(l);
}

void add_curve(std::vector<CurvePoint>& out, const std::string& id, const std::vector<double>& x,
               const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back({id, x[i], y[i]});
}

std::vector<double> row_of(const Eigen::MatrixXd& m, Eigen::Index r) {
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
    return v;
}

/// Pointwise mean and sample sd of curves.
void band(const std::vector<std::vector<double>>& curves, std::vector<double>& mean, std::vector<double>& sd) {
    const std::size_t P = curves.front().size();
    const double k = static_cast<double>(curves.size());
    mean.assign(P, 0.0);
    sd.assign(P, 0.0);
    for (std::size_t i = 0; i < P; ++i) {
        for (const auto& c : curves) mean[i] += c[i];
        mean[i] /= k;
        if (curves.size() > 1) {
            for (const auto& c : curves) sd[i] += (c[i] - mean[i]) * (c[i] - mean[i]);
            sd[i] = std::sqrt(sd[i] / (k - 1.0));
        }
    }
}

void add_band_curves(std::vector<CurvePoint>& out, const std::string& id, const std::vector<double>& x,
                     const std::vector<double>& real, const std::vector<std::vector<double>>& sims) {
    std::vector<double> mean, sd, lo, hi;
    band(sims, mean, sd);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        lo.push_back(mean[i] - 2.0 * sd[i]);
        hi.push_back(mean[i] + 2.0 * sd[i]);
    }
    add_curve(out, id + "/real", x, real);
    add_curve(out, id + "/sim_mean", x, mean);
    add_curve(out, id + "/sim_lower", x, lo);
    add_curve(out, id + "/sim_upper", x, hi);
}

std::string spectrum_name(const SpectraMatrix& m) {
    SpectrumType t;
    t.zeta = m.zeta;
    t.mu = m.mu;
    return t.name();
}

}  // namespace

ValidationReport score_spectra(const std::vector<SpectraMatrix>& real,
                               const std::vector<std::vector<SpectraMatrix>>& sims, const std::vector<double>& levels,
                               bool with_curves) {
    if (real.size() != sims.size()) throw ValidationError("spectrum type count mismatch");
    ValidationReport rep;
    for (std::size_t t = 0; t < real.size(); ++t) {
        const std::string name = spectrum_name(real[t]);
        if (sims[t].empty()) throw ValidationError("no simulated catalogs for " + name);
        const SpectraStats rs = spectra_stats(real[t], levels);
        std::vector<SpectraStats> ss(sims[t].size());
        parallel_for(ss.size(), [&](std::size_t c) {
            if (sims[t][c].periods != real[t].periods) throw ValidationError("catalog period grid differs");
            ss[c] = spectra_stats(sims[t][c], levels);
        });
        const std::size_t C = ss.size();

        std::vector<double> high(C, 0.0), low(C, 0.0);
        std::size_t n_high = 0, n_low = 0;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const auto li = static_cast<Eigen::Index>(l);
            std::vector<std::vector<double>> curves;
            for (const auto& s : ss) curves.push_back(row_of(s.quantiles, li));
            const EpsResult e = eps_curve(row_of(rs.quantiles, li), curves);
            rep.metrics.push_back({name, level_name(levels[l]), e.eps, e.sd, C, e.per_catalog});
            auto& acc = levels[l] > 75.0 ? high : low;
            (levels[l] > 75.0 ? n_high : n_low)++;
            for (std::size_t c = 0; c < C; ++c) acc[c] += e.per_catalog[c];
            if (with_curves && (levels[l] == 1.0 || levels[l] == 50.0 || levels[l] == 99.0 || levels.size() <= 3))
                add_band_curves(rep.curves, name + "/" + level_name(levels[l]), real[t].periods,
                                row_of(rs.quantiles, li), curves);
        }
        if (n_high) {
            for (double& v : high) v /= static_cast<double>(n_high);
            const auto e = summarize_eps(high);
            rep.metrics.push_back({name, "q_high", e.eps, e.sd, C, e.per_catalog});
        }
        if (n_low) {
            for (double& v : low) v /= static_cast<double>(n_low);
            const auto e = summarize_eps(low);
            rep.metrics.push_back({name, "q_low", e.eps, e.sd, C, e.per_catalog});
        }

        std::vector<std::vector<double>> stds;
        for (const auto& s : ss) stds.push_back(s.log_std);
        try {
            const EpsResult e = eps_curve(rs.log_std, stds);
            rep.metrics.push_back({name, "logstd", e.eps, e.sd, C, e.per_catalog});
        } catch (const DataError&) {
            rep.warnings.push_back(name + ": real log-std is zero at some period; logstd metric skipped");
        }
        if (with_curves) add_band_curves(rep.curves, name + "/logstd", real[t].periods, rs.log_std, stds);

        std::vector<Eigen::MatrixXd> corrs;
        for (const auto& s : ss) corrs.push_back(s.corr);
        const EpsResult ec = eps_corr(rs.corr, corrs);
        rep.metrics.push_back({name, "corr", ec.eps, ec.sd, C, ec.per_catalog});
        if (with_curves) {
            for (double t2 : {0.1, 0.2, 0.4, 1.0, 3.0, 6.0}) {
                const auto& P = real[t].periods;
                std::size_t j = 0;
                for (std::size_t i = 1; i < P.size(); ++i)
                    if (std::abs(std::log(P[i] / t2)) < std::abs(std::log(P[j] / t2))) j = i;
                std::vector<std::vector<double>> cols;
                for (const auto& c : corrs) cols.push_back(row_of(c, static_cast<Eigen::Index>(j)));
                add_band_curves(rep.curves, name + "/corr_T" + format_double(t2), P,
                                row_of(rs.corr, static_cast<Eigen::Index>(j)), cols);
            }
        }
    }
    return rep;
}

ValidationReport validate_catalogs(const std::vector<AccelRecord>& real,
                                   const std::vector<std::vector<AccelRecord>>& catalogs,
                                   const std::vector<SpectrumType>& types, const std::vector<double>& levels) {
    if (catalogs.empty()) throw ValidationError("validation needs at least one simulated catalog");
    SpectraCache cache;
    std::vector<SpectraMatrix> rs;
    std::vector<std::vector<SpectraMatrix>> ss;
    for (const auto& t : types) {
        rs.push_back(compute_spectra(real, t, &cache));
        ss.emplace_back();
        for (const auto& c : catalogs) ss.back().push_back(compute_spectra(c, t, &cache));
    }
    ValidationReport rep = score_spectra(rs, ss, levels);
    if (catalogs.size() >= 2) {
        for (const auto& c : im_cdf_compare(real, catalogs)) {
            add_curve(rep.curves, "im/" + c.im + "/real", c.grid, c.real_cdf);
            add_curve(rep.curves, "im/" + c.im + "/sim_mean", c.grid, c.mean);
            add_curve(rep.curves, "im/" + c.im + "/sim_lower", c.grid, c.lower());
            add_curve(rep.curves, "im/" + c.im + "/sim_upper", c.grid, c.upper());
        }
    } else {
        rep.warnings.push_back("IM CDF envelopes need at least 2 catalogs; skipped");
    }
    return rep;
}

// ---------------------------------------------------------------------------
// ranking

int config_param_count(int config_id) { return total_param_count(model_config(config_id)); }

namespace {

std::vector<double> default_levels(const std::vector<double>& l) {
    if (!l.empty()) return l;
    std::vector<double> out;
    for (int n = 1; n <= 99; ++n) out.push_back(n);
    return out;
}

double metric_or_zero(const std::vector<MetricRow>& rows, const std::string& metric, const std::string& spectrum) {
    for (const auto& r : rows)
        if (r.metric == metric && r.spectrum == spectrum) return r.eps;
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::string RankReport::summary_csv() const {
    std::string out = "config_id,n_params,n_fitted,n_failed,excluded,q_high,q_low,logstd,corr\n";
    for (const auto& m : models)
        out += std::to_string(m.config_id) + "," + std::to_string(m.n_params) + "," + std::to_string(m.n_fitted) +
               "," + std::to_string(m.n_failed) + "," + (m.excluded ? "1" : "0") + "," + format_double(m.q_high) +
               "," + format_double(m.q_low) + "," + format_double(m.logstd) + "," + format_double(m.corr) + "\n";
    return out;
}

std::string RankReport::metrics_csv() const {
    std::string out = "config_id,n_params,spectrum,metric,eps,sd,n_catalogs\n";
    for (const auto& [cid, rows] : metrics)
        for (const auto& m : rows)
            out += std::to_string(cid) + "," + std::to_string(config_param_count(cid)) + "," + m.spectrum + "," +
                   m.metric + "," + format_double(m.eps) + "," + format_double(m.sd) + "," +
                   std::to_string(m.n_catalogs) + "\n";
    return out;
}

const MetricRow& RankReport::find(int config_id, const std::string& spectrum, const std::string& metric) const {
    const auto it = metrics.find(config_id);
    if (it == metrics.end()) throw ValidationError("no metrics for configuration " + std::to_string(config_id));
    for (const auto& m : it->second)
        if (m.spectrum == spectrum && m.metric == metric) return m;
    throw ValidationError("no metric " + metric + " for spectrum " + spectrum);
}

RankReport rank_models(const std::vector<AccelRecord>& records, const PipelineConfig& cfg, const RankOptions& opt) {
    if (records.size() < 2) throw ValidationError("ranking needs at least 2 records");
    if (opt.n_catalogs < 1) throw ValidationError("ranking needs at least 1 catalog");
    const auto levels = default_levels(opt.levels);
    SpectraCache cache;
    std::vector<SpectraMatrix> real;
    for (const auto& t : opt.spectra) real.push_back(compute_spectra(records, t, &cache));

    RankReport rep;
    for (int cid : opt.configs) {
        PipelineConfig cc = cfg;
        cc.config_id = cid;
        cc.seed = opt.seed;
        const FitBatch b = fit_records(records, cc);
        ModelSummary s;
        s.config_id = cid;
        s.n_params = config_param_count(cid);
        s.n_fitted = b.models.size();
        s.n_failed = b.failures.size();
        for (const auto& f : b.failures) rep.failures.push_back({"c" + std::to_string(cid) + "/" + f.record_id, f.message});
        s.excluded = static_cast<double>(s.n_failed) > opt.max_failure_fraction * static_cast<double>(b.n_records) ||
                     s.n_fitted < 2;
        if (s.excluded) {
            rep.models.push_back(s);
            continue;
        }

        const std::size_t R = b.models.size(), C = static_cast<std::size_t>(opt.n_catalogs);
        std::vector<std::vector<SpectraMatrix>> sims(opt.spectra.size(), std::vector<SpectraMatrix>(C));
        for (std::size_t t = 0; t < opt.spectra.size(); ++t)
            for (auto& m : sims[t]) {
                m.periods = opt.spectra[t].periods();
                m.zeta = opt.spectra[t].zeta;
                m.mu = opt.spectra[t].mu;
                m.sa.resize(static_cast<Eigen::Index>(R), static_cast<Eigen::Index>(m.periods.size()));
            }
        parallel_for(R * C, [&](std::size_t idx) {
            const std::size_t c = idx / R, r = idx % R;
            const auto& m = b.models[r];
            // same noise stream for a record and catalog under every configuration
            const AccelRecord rec = simulate_fitted(m, cc, stream_key(opt.seed, "rank/" + m.record_id, c), m.record_id);
            for (std::size_t t = 0; t < opt.spectra.size(); ++t) {
                const auto v = record_spectrum(rec, opt.spectra[t]);
                for (std::size_t p = 0; p < v.size(); ++p)
                    sims[t][c].sa(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(p)) = v[p];
            }
        });
        const ValidationReport vr = score_spectra(real, sims, levels, false);
        double qh = 0, ql = 0, ls = 0, co = 0;
        for (const auto& t : opt.spectra) {
            qh += metric_or_zero(vr.metrics, "q_high", t.name());
            ql += metric_or_zero(vr.metrics, "q_low", t.name());
            ls += metric_or_zero(vr.metrics, "logstd", t.name());
            co += metric_or_zero(vr.metrics, "corr", t.name());
        }
        const double nt = static_cast<double>(opt.spectra.size());
        s.q_high = qh / nt;
        s.q_low = ql / nt;
        s.logstd = ls / nt;
        s.corr = co / nt;
        rep.models.push_back(s);
        rep.metrics[cid] = vr.metrics;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// train / test harness

std::string HarnessReport::summary_csv() const {
    std::string out = "key,value\n";
    out += "n_train," + std::to_string(n_train) + "\n";
    out += "n_test," + std::to_string(n_test) + "\n";
    out += "n_catalogs," + std::to_string(n_catalogs) + "\n";
    out += "n_failures," + std::to_string(failures.size()) + "\n";
    out += "q50_coverage," + format_double(q50_coverage) + "\n";
    for (const auto& m : metrics) out += "eps_" + m.metric + "," + format_double(m.eps) + "\n";
    return out;
}

std::string HarnessReport::bands_csv() const {
    std::string out = "level,period,test,mean,lower,upper\n";
    for (Eigen::Index l = 0; l < test_quantiles.rows(); ++l)
        for (Eigen::Index p = 0; p < test_quantiles.cols(); ++p)
            out += format_double(levels[static_cast<std::size_t>(l)]) + "," +
                   format_double(periods[static_cast<std::size_t>(p)]) + "," + format_double(test_quantiles(l, p)) +
                   "," + format_double(band_mean(l, p)) + "," + format_double(band_mean(l, p) - 2.0 * band_sd(l, p)) +
                   "," + format_double(band_mean(l, p) + 2.0 * band_sd(l, p)) + "\n";
    return out;
}

HarnessReport train_test_harness(const std::vector<AccelRecord>& records, const PipelineConfig& cfg,
                                 const HarnessOptions& opt) {
    const std::size_t n = records.size();
    if (n < 20) throw ValidationError("train/test harness needs at least 20 records");
    if (!(opt.split > 0.0 && opt.split <= 1.0)) throw ValidationError("split must be in (0, 1]");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 eng(stream_key(opt.seed, "split", 0));
    std::shuffle(perm.begin(), perm.end(), eng);

    std::vector<AccelRecord> train, test;
    if (opt.split >= 1.0) {
        for (auto i : perm) train.push_back(records[i]);
        test = train;
    } else {
        const auto n_train = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(opt.split * static_cast<double>(n))), 1, n - 1);
        for (std::size_t k = 0; k < n; ++k) (k < n_train ? train : test).push_back(records[perm[k]]);
    }

    HarnessReport rep;
    rep.n_train = train.size();
    rep.n_test = test.size();
    if (rep.n_test < 2) throw ValidationError("test split has fewer than 2 records");

    PipelineConfig fc = cfg;
    fc.seed = opt.seed;
    const FitBatch b = fit_records(train, fc);
    rep.failures = b.failures;
    if (static_cast<double>(b.failures.size()) > cfg.max_failure_fraction * static_cast<double>(b.n_records))
        throw DataError(std::to_string(b.failures.size()) + " of " + std::to_string(b.n_records) +
                        " training fits failed");
    const ParameterTable table = make_parameter_table(b.models);
    rep.joint = fit_joint_table(table, fc);

    for (double l : opt.levels) {
        const double tail = std::min(l, 100.0 - l) / 100.0;
        if (tail * static_cast<double>(rep.n_test) >= 1.0 || l == 50.0)
            rep.levels.push_back(l);
        else
            rep.warnings.push_back("quantile level " + format_double(l) + " dropped: test split of " +
                                   std::to_string(rep.n_test) + " records is too small");
    }
    if (rep.levels.empty()) throw ValidationError("no quantile level is supported by the test split");

    rep.n_catalogs = opt.n_samples / rep.n_test;
    if (rep.n_catalogs < 2) throw ValidationError("n_samples must cover at least 2 catalogs of test-set size");

    const HierarchicalCatalog cat =
        hierarchical_sim(rep.joint, cfg.config_id, rep.n_catalogs * rep.n_test, stream_key(opt.seed, "harness", 0), fc);
    const SpectraMatrix sim_all = compute_spectra(cat.records, opt.spectrum);
    const SpectraMatrix test_sp = compute_spectra(test, opt.spectrum);
    rep.periods = test_sp.periods;

    std::vector<SpectraMatrix> cats(rep.n_catalogs, sim_all);
    for (std::size_t c = 0; c < rep.n_catalogs; ++c)
        cats[c].sa = sim_all.sa.middleRows(static_cast<Eigen::Index>(c * rep.n_test),
                                           static_cast<Eigen::Index>(rep.n_test));

    const SpectraStats ts = spectra_stats(test_sp, rep.levels);
    rep.test_quantiles = ts.quantiles;
    std::vector<SpectraStats> cs(rep.n_catalogs);
    parallel_for(cs.size(), [&](std::size_t c) { cs[c] = spectra_stats(cats[c], rep.levels); });

    const auto L = static_cast<Eigen::Index>(rep.levels.size());
    const auto P = static_cast<Eigen::Index>(rep.periods.size());
    rep.band_mean = Eigen::MatrixXd::Zero(L, P);
    rep.band_sd = Eigen::MatrixXd::Zero(L, P);
    for (Eigen::Index l = 0; l < L; ++l) {
        std::vector<std::vector<double>> curves;
        for (const auto& s : cs) curves.push_back(row_of(s.quantiles, l));
        std::vector<double> mean, sd;
        band(curves, mean, sd);
        for (Eigen::Index p = 0; p < P; ++p) {
            rep.band_mean(l, p) = mean[static_cast<std::size_t>(p)];
            rep.band_sd(l, p) = sd[static_cast<std::size_t>(p)];
        }
    }
    const auto it50 = std::find(rep.levels.begin(), rep.levels.end(), 50.0);
    if (it50 != rep.levels.end()) {
        const auto l = static_cast<Eigen::Index>(it50 - rep.levels.begin());
        std::size_t inside = 0;
        for (Eigen::Index p = 0; p < P; ++p) {
            const double lo = rep.band_mean(l, p) - 2.0 * rep.band_sd(l, p);
            const double hi = rep.band_mean(l, p) + 2.0 * rep.band_sd(l, p);
            if (ts.quantiles(l, p) >= lo && ts.quantiles(l, p) <= hi) ++inside;
        }
        rep.q50_coverage = static_cast<double>(inside) / static_cast<double>(P);
    }
    const ValidationReport vr = score_spectra({test_sp}, {cats}, rep.levels, false);
    rep.metrics = vr.metrics;
    for (const auto& w : vr.warnings) rep.warnings.push_back(w);
    return rep;
}

}  // namespace gmsynth
