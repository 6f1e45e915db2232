#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gmsynth/envelope.hpp"
#include "gmsynth/epsd.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/spectral.hpp"
#include "gmsynth/synth.hpp"
#include "gmsynth/uq.hpp"

namespace gmsynth {

/// One response-spectrum type used by validation and ranking.
struct SpectrumType {
    double zeta = 0.05;
    double mu = 1.0;  ///< 1 means linear
    double period_lo = 0.05;
    double period_hi = 10.0;
    std::size_t n_periods = 101;

    std::string name() const;
    std::vector<double> periods() const;
};

std::vector<SpectrumType> default_spectrum_types();

inline constexpr int kConfigSchemaVersion = 1;

struct PipelineConfig {
    int schema_version = kConfigSchemaVersion;
    int config_id = 1;
    std::uint64_t seed = 0;
    double dt_sim = 0.02;
    double omega_upper_hz = 25.0;
    SttmwOptions sttmw;
    double smooth_window_s = 3.0;
    SnapshotOptions snapshot;
    ConstantTrendRule constant_trend = ConstantTrendRule::WeightedMean;
    FcOptions fc;
    int n_catalogs = 30;
    std::vector<SpectrumType> spectra = default_spectrum_types();
    std::vector<double> quantile_levels;  ///< percent; empty means 1..99
    CopulaKind copula = CopulaKind::CVine;
    std::vector<Family> marginal_candidates = all_families();
    double train_split = 0.9;
    std::size_t n_samples = 5000;
    double max_failure_fraction = 0.05;
    std::string records_dir;
    std::string out_dir;

    void validate() const;
    std::vector<double> levels() const;
};

/// Fitted envelope and spectral model of one record.
struct FittedModel {
    std::string record_id;
    EnvelopeParams env;
    SpectralModel model;
    double kappa = 1.0;
};

/// Runs the full fitting chain on one record: envelope, STTMW spectrum,
/// filter snapshots, trends and the corner frequency search.
FittedModel fit_record(const AccelRecord& rec, const PipelineConfig& cfg);

struct RecordFailure {
    std::string record_id;
    std::string message;
};

struct FitBatch {
    std::vector<FittedModel> models;  ///< successful fits, input order
    std::vector<RecordFailure> failures;
    std::size_t n_records = 0;
};

FitBatch fit_records(const std::vector<AccelRecord>& records, const PipelineConfig& cfg);

/// Simulation grid used for a fitted model.
SimGrid sim_grid_for(const EnvelopeParams& env, const PipelineConfig& cfg);

AccelRecord simulate_fitted(const FittedModel& m, const PipelineConfig& cfg, std::uint64_t noise_key,
                            const std::string& id);

// ---------------------------------------------------------------------------
// parameter table

struct ParameterTable {
    std::vector<std::string> columns;
    std::vector<std::string> units;
    std::vector<std::string> record_ids;
    Eigen::MatrixXd values;  ///< records x columns

    std::size_t rows() const { return record_ids.size(); }
    std::vector<double> column(const std::string& name) const;
    std::string to_csv() const;
    static ParameterTable from_csv(const std::string& text);
};

/// Column names for a configuration: log_Ia, theta_F names, the six durations, fc.
std::vector<std::string> parameter_columns(int config_id);
std::string parameter_unit(const std::string& column);

std::vector<double> model_to_row(const FittedModel& m);
FittedModel model_from_row(int config_id, const std::vector<double>& row, const std::string& id = "");
ParameterTable make_parameter_table(const std::vector<FittedModel>& models);

/// Declared support of a parameter column; infinite when none is known.
std::pair<double, double> default_support(const std::string& column);

/// Marginal and copula fit on a parameter table. Declared supports are widened
/// to contain the observed data.
JointModel fit_joint_table(const ParameterTable& t, const PipelineConfig& cfg);

struct HierarchicalCatalog {
    ParameterTable parameters;
    std::vector<AccelRecord> records;
};

/// Draws n parameter vectors from the joint model and simulates one record for each.
HierarchicalCatalog hierarchical_sim(const JointModel& joint, int config_id, std::size_t n, std::uint64_t seed,
                                     const PipelineConfig& cfg);

std::vector<AccelRecord> load_records(const std::filesystem::path& dir);
void save_records(const std::vector<AccelRecord>& recs, const std::filesystem::path& dir);

}  // namespace gmsynth
