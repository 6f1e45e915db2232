#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmsynth/pipeline.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/response.hpp"

namespace gmsynth {

/// n_records x n_periods spectral accelerations of one spectrum type.
struct SpectraMatrix {
    std::vector<double> periods;
    double zeta = 0.05;
    double mu = 1.0;
    Eigen::MatrixXd sa;

    std::size_t n_records() const { return static_cast<std::size_t>(sa.rows()); }
    /// Throws DataError unless every value is finite and positive.
    void validate() const;
};

struct SpectraStats {
    std::vector<double> levels;   ///< percent
    Eigen::MatrixXd quantiles;    ///< levels x periods
    std::vector<double> log_std;  ///< sample sd (n - 1) of ln Sa
    Eigen::MatrixXd corr;         ///< Pearson correlation of ln Sa between periods
};

/// Linear interpolation between order statistics (type 7); p in [0, 1].
double empirical_quantile(const std::vector<double>& sorted, double p);

SpectraStats spectra_stats(const SpectraMatrix& m, const std::vector<double>& levels);

/// Memoizes spectra by (record content, damping, ductility, period grid).
class SpectraCache {
public:
    std::vector<double> get(const AccelRecord& rec, const SpectrumType& type);
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::vector<double>> cache_;
};

std::vector<double> record_spectrum(const AccelRecord& rec, const SpectrumType& type);
SpectraMatrix compute_spectra(const std::vector<AccelRecord>& recs, const SpectrumType& type,
                              SpectraCache* cache = nullptr);

struct EpsResult {
    double eps = 0.0;  ///< mean over catalogs
    double sd = 0.0;   ///< across-catalog sample sd (0 for one catalog)
    std::vector<double> per_catalog;
};

EpsResult summarize_eps(std::vector<double> per_catalog);

/// Mean over periods and catalogs of |(Q - Q_hat) / Q|.
EpsResult eps_curve(const std::vector<double>& real, const std::vector<std::vector<double>>& sims);

/// Mean over off-diagonal period pairs and catalogs of |rho - rho_hat|.
EpsResult eps_corr(const Eigen::MatrixXd& real, const std::vector<Eigen::MatrixXd>& sims);

struct ImCdfCurve {
    std::string im;
    std::vector<double> grid;
    std::vector<double> real_cdf;
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<double> lower() const;  ///< mean - 2 sd
    std::vector<double> upper() const;  ///< mean + 2 sd
};

/// Empirical CDF (fraction <= x) on n_grid log-spaced points.
ImCdfCurve im_cdf_compare(const std::string& im, const std::vector<double>& real,
                          const std::vector<std::vector<double>>& sims, std::size_t n_grid = 100);

/// Curves for PGA, PGV, Ia and D5-95.
std::vector<ImCdfCurve> im_cdf_compare(const std::vector<AccelRecord>& real,
                                       const std::vector<std::vector<AccelRecord>>& sims, std::size_t n_grid = 100);

struct MetricRow {
    std::string spectrum;
    std::string metric;  ///< q<n>, q_high, q_low, logstd, corr
    double eps = 0.0;
    double sd = 0.0;
    std::size_t n_catalogs = 0;
    std::vector<double> per_catalog;
};

struct CurvePoint {
    std::string curve;
    double x = 0.0;
    double y = 0.0;
};

struct ValidationReport {
    std::vector<MetricRow> metrics;
    std::vector<CurvePoint> curves;
    std::vector<std::string> warnings;

    std::string metrics_csv() const;
    std::string curves_csv() const;
    const MetricRow& find(const std::string& spectrum, const std::string& metric) const;
};

/// Scores simulated catalogs against real spectra for every spectrum type.
/// real[t] and sims[t][c] hold spectrum type t.
ValidationReport score_spectra(const std::vector<SpectraMatrix>& real,
                               const std::vector<std::vector<SpectraMatrix>>& sims, const std::vector<double>& levels,
                               bool with_curves = true);

/// Spectra plus IM CDF comparison of catalogs against a real dataset.
ValidationReport validate_catalogs(const std::vector<AccelRecord>& real,
                                   const std::vector<std::vector<AccelRecord>>& catalogs,
                                   const std::vector<SpectrumType>& types, const std::vector<double>& levels);

// ---------------------------------------------------------------------------
// model ranking

/// Total parameter counts of configurations 1..8.
int config_param_count(int config_id);

struct RankOptions {
    std::vector<int> configs = {1, 2, 3, 4, 5, 6, 7, 8};
    int n_catalogs = 30;
    std::uint64_t seed = 0;
    std::vector<SpectrumType> spectra = default_spectrum_types();
    std::vector<double> levels;  ///< empty means 1..99
    double max_failure_fraction = 0.05;
};

struct ModelSummary {
    int config_id = 0;
    int n_params = 0;
    std::size_t n_fitted = 0;
    std::size_t n_failed = 0;
    bool excluded = false;
    double q_high = 0.0;  ///< averaged over spectrum types
    double q_low = 0.0;
    double logstd = 0.0;
    double corr = 0.0;
};

struct RankReport {
    std::vector<ModelSummary> models;
    /// One block of metric rows per non-excluded model.
    std::map<int, std::vector<MetricRow>> metrics;
    std::vector<RecordFailure> failures;  ///< tagged "c<id>/<record>"

    std::string summary_csv() const;
    std::string metrics_csv() const;
    const MetricRow& find(int config_id, const std::string& spectrum, const std::string& metric) const;
};

/// Fits every configuration to every record, simulates n_catalogs catalogs of
/// one realization per record with noise shared across configurations, and
/// scores each configuration.
RankReport rank_models(const std::vector<AccelRecord>& records, const PipelineConfig& cfg, const RankOptions& opt);

// ---------------------------------------------------------------------------
// train / test harness

struct HarnessOptions {
    double split = 0.9;
    std::size_t n_samples = 5000;
    std::uint64_t seed = 0;
    SpectrumType spectrum;  ///< default: linear, 5 % damping, [0.05, 10] s, 101 periods
    std::vector<double> levels = {1.0, 50.0, 99.0};
};

struct HarnessReport {
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_catalogs = 0;
    std::vector<double> periods;
    std::vector<double> levels;
    Eigen::MatrixXd test_quantiles;  ///< levels x periods
    Eigen::MatrixXd band_mean;       ///< levels x periods, across catalogs
    Eigen::MatrixXd band_sd;
    double q50_coverage = 0.0;  ///< fraction of periods with test q50 inside mean +- 2 sd
    std::vector<MetricRow> metrics;
    std::vector<RecordFailure> failures;
    std::vector<std::string> warnings;
    JointModel joint;

    std::string summary_csv() const;
    std::string bands_csv() const;
};

/// Seeded shuffle, fit on the training share, hierarchical simulation of
/// n_samples records, grouped into catalogs of test-set size.
/// split = 1 compares against the training records themselves.
HarnessReport train_test_harness(const std::vector<AccelRecord>& records, const PipelineConfig& cfg,
                                 const HarnessOptions& opt);

}  // namespace gmsynth
