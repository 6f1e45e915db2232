#pragma once

#include <array>
#include <string>
#include <vector>

namespace gmsynth {

enum class FilterKind { SecondOrder, KanaiTajimi, Convex, Cascade };

std::string to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);

struct FilterSpec {
    FilterKind kind = FilterKind::SecondOrder;
    int J = 1;
    /// Mode shape for Convex (SecondOrder or KanaiTajimi). Cascade always uses SecondOrder.
    FilterKind base = FilterKind::SecondOrder;

    int modes() const;
    FilterKind mode_kind() const;
    bool has_weights() const { return kind == FilterKind::Convex && J > 1; }
    /// Number of scalar filter parameters: (omega, zeta) per mode plus J-1 free weights.
    int n_scalars() const;
    std::vector<std::string> scalar_names() const;
    void validate() const;
};

/// Instantaneous filter parameters. weights has J entries summing to one (Convex only).
struct FilterParams {
    std::vector<double> omega;  ///< rad/s
    std::vector<double> zeta;
    std::vector<double> weights;
};

/// Scalar layout: omega_1, zeta_1, ..., omega_J, zeta_J, pi_1, ..., pi_{J-1}.
FilterParams params_from_scalars(const FilterSpec& spec, const double* s);
void params_to_scalars(const FilterSpec& spec, const FilterParams& p, double* out);

/// Uniform frequency grid starting at zero: omega_k = k * d_omega, k = 0..n-1.
struct FreqGrid {
    double d_omega = 0.0;
    std::size_t n = 0;
    double omega(std::size_t k) const { return static_cast<double>(k) * d_omega; }
};

inline constexpr double kOmegaMin = 0.1;
inline constexpr double kOmegaUpperHz = 25.0;
inline constexpr double kZetaMin = 0.02;
inline constexpr double kZetaMax = 1.0;
inline constexpr double kWeightMin = 0.01;
inline constexpr double kWeightMax = 0.99;

/// Unnormalized single-mode shapes.
double second_order_shape(double omega, double omega_g, double zeta_g);
double kanai_tajimi_shape(double omega, double omega_g, double zeta_g);

/// Unnormalized filter shape on the grid.
void eval_filter_shape(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid, double* out);
/// Filter with unit discrete mass: sum(phi) * d_omega = 1.
void eval_filter_into(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid, double* out);
std::vector<double> eval_filter(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid);

/// Throws ValidationError for omega <= 0, zeta <= 0, bad weights or size mismatch.
void check_params(const FilterSpec& spec, const FilterParams& p);

/// Clamps to the feasible box and renormalizes weights onto the simplex.
FilterParams project_params(const FilterSpec& spec, FilterParams p);

enum class TrendKind { Constant, Linear, Polyline };

std::string to_string(TrendKind k);
TrendKind trend_kind_from_string(const std::string& s);
int trend_param_count(TrendKind k);

/// Window of the moving average applied to polyline trends (s).
inline constexpr double kPolylineWindow = 2.0;

struct TrendSpec {
    std::vector<TrendKind> kinds;  ///< one per scalar filter parameter
    int n_params() const;
};

/// Filter family, trends, trend parameters and corner frequency of one record model.
struct SpectralModel {
    int config_id = 0;
    FilterSpec filter;
    TrendSpec trends;
    std::vector<double> theta_f;
    double fc = 0.0;  ///< Hz

    std::vector<std::string> theta_names() const;
    void validate() const;
};

/// The eight standard configurations (ids 1..8) with empty trend parameters.
SpectralModel model_config(int id);
inline constexpr int kNumConfigs = 8;
/// Total parameter count: 7 envelope parameters + theta_F + fc.
int total_param_count(const SpectralModel& m);

/// Evaluates the trend functions at time t (clamped by the trend rules) and
/// returns projected filter parameters. knots are the envelope percentile times.
class TrendEvaluator {
public:
    TrendEvaluator(const SpectralModel& m, const std::array<double, 7>& knots);
    FilterParams at(double t) const;
    /// Raw (unprojected) scalar values.
    void scalars_at(double t, double* out) const;

private:
    double polyline_primitive(std::size_t scalar, double x) const;
    SpectralModel model_;
    std::array<double, 7> knots_;
    std::vector<std::size_t> offset_;
};

FilterParams eval_trend(const SpectralModel& m, double t, const std::array<double, 7>& knots);

}  // namespace gmsynth
