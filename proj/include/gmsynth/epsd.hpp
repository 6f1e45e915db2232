#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gmsynth/envelope.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/spectral.hpp"

namespace gmsynth {

/// Time x frequency spectral density, row n holds the slice at times[n].
struct EpsdGrid {
    std::vector<double> times;
    FreqGrid freq;
    double dt_grid = 0.0;
    std::vector<double> values;      ///< row-major, times.size() x freq.n
    std::vector<std::uint8_t> flagged;  ///< slices with zero mass
    std::vector<double> taper_acf;  ///< mean taper autocorrelation by lag; empty unless produced by sttmw
    double sample_dt = 0.0;         ///< record time step behind taper_acf

    std::size_t n_times() const { return times.size(); }
    double& at(std::size_t n, std::size_t k) { return values[n * freq.n + k]; }
    double at(std::size_t n, std::size_t k) const { return values[n * freq.n + k]; }
    const double* row(std::size_t n) const { return values.data() + n * freq.n; }
    double slice_mass(std::size_t n) const;
};

struct SttmwOptions {
    double window_s = 2.0;
    double nw = 2.5;
    int n_tapers = 4;
    double hop_s = 0.0;  ///< 0 means one sample
    double f_max_hz = 25.0;
};

/// Discrete prolate spheroidal sequences (columns, unit energy), largest
/// concentration first.
Eigen::MatrixXd dpss(int length, double nw, int n_tapers);

/// Window length in samples (always odd) for a window duration.
int sttmw_window_length(double window_s, double dt);

/// Short-time multitaper estimate, one-sided in rad/s, so that
/// sum_k S(t_n, w_k) * dw approximates the local mean square acceleration.
EpsdGrid sttmw(const AccelRecord& rec, const SttmwOptions& opt = {});

EpsdGrid normalize_epsd(const EpsdGrid& e);

/// Hann smoothing along time. Weights are truncated and renormalized at the edges.
EpsdGrid smooth_time(const EpsdGrid& e, double window_s = 3.0, bool renormalize = true);

struct FilterSnapshot {
    double t = 0.0;
    FilterParams params;
    double residual = 0.0;
    bool converged = true;
};

struct FilterSnapshotSeries {
    FilterSpec spec;
    std::vector<FilterSnapshot> slices;
};

struct SnapshotOptions {
    int max_iter = 500;
    std::vector<double> omega_multipliers = {0.5, 0.75, 1.0, 1.5, 2.0};
    double zeta_init = 0.3;
    /// Compare slices with the expected multitaper estimate of the filter rather than the bare filter.
    bool window_correction = true;
};

/// Maps a filter shape sampled on an oversampled grid to the expected multitaper estimate on the EPSD bins.
/// The multitaper average has expectation (shape convolved with the mean taper spectral window); fitting
/// that expectation removes the bias the window bandwidth would otherwise put on omega and zeta.
struct SpectralWindowMap {
    FreqGrid fine;
    FreqGrid bins;
    std::vector<std::size_t> first;            ///< first fine index used by each bin
    std::vector<std::vector<double>> weights;  ///< contiguous weights per bin

    bool empty() const { return first.empty(); }
    void apply(const double* fine_values, double* out) const;
};

/// Empty map when the grid carries no taper information.
SpectralWindowMap spectral_window_map(const EpsdGrid& e, int oversample = 4, double tail = 1e-3);

/// Residual of the best scaled fit c*phi(theta) to one slice, scale profiled out.
double snapshot_residual(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid, const double* g);
/// Same, with phi(theta) passed through the multitaper window map.
double snapshot_residual(const FilterSpec& spec, const FilterParams& p, const SpectralWindowMap& window,
                         const double* g);

FilterSnapshot fit_filter_slice(const double* g, const FreqGrid& grid, const FilterSpec& spec,
                                const SnapshotOptions& opt = {}, const SpectralWindowMap* window = nullptr);

FilterSnapshotSeries fit_filter_snapshots(const EpsdGrid& phi_hat, const FilterSpec& spec,
                                          const SnapshotOptions& opt = {});

/// How a Constant trend is estimated from the slices.
/// WeightedMean: weighted least-squares constant over [t5, t95], the same weights as the Linear fit.
/// AtMid: the slice value interpolated at t_mid.
enum class ConstantTrendRule { WeightedMean, AtMid };

std::string to_string(ConstantTrendRule r);
ConstantTrendRule constant_trend_rule_from_string(const std::string& s);

/// Trend parameters theta_F for the model's trend kinds.
std::vector<double> fit_trends(const FilterSnapshotSeries& series, const TrendSpec& trends,
                               const EnvelopeParams& env,
                               ConstantTrendRule constant_rule = ConstantTrendRule::WeightedMean);

/// Weighted least-squares line y = a + b (t - t_mid); returns {a, b}.
std::array<double, 2> weighted_line_fit(const std::vector<double>& t, const std::vector<double>& y,
                                        const std::vector<double>& w, double t_mid);

}  // namespace gmsynth
