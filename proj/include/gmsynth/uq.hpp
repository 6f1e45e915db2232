#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gmsynth {

// ---------------------------------------------------------------------------
// marginals

/// Parameter conventions (params[0], params[1]):
///   Gaussian (mean, sd), Lognormal (mu_log, sigma_log), Gumbel (location, scale) of maxima,
///   Weibull (scale, shape), Gamma (rate, shape), Exponential (rate), Beta (a, b) on the
///   declared support, Logistic (location, scale), Laplace (location, scale), Rayleigh (sigma).
enum class Family { Gaussian, Lognormal, Gumbel, Weibull, Gamma, Exponential, Beta, Logistic, Laplace, Rayleigh };

inline constexpr int kNumFamilies = 10;
std::string to_string(Family f);
Family family_from_string(const std::string& s);
std::vector<Family> all_families();
int family_param_count(Family f);
/// Names of params[0], params[1] used in serialized models.
std::vector<std::string> family_param_names(Family f);

struct MarginalModel {
    Family family = Family::Gaussian;
    std::vector<double> params;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    void validate() const;
    double pdf(double x) const;
    double log_pdf(double x) const;
    double cdf(double x) const;
    double quantile(double p) const;
    double mean() const;
    double sd() const;
    bool in_support(double x) const { return x >= lo && x <= hi; }
};

struct CandidateFit {
    Family family = Family::Gaussian;
    std::vector<double> params;
    double log_lik = 0.0;
    double bic = std::numeric_limits<double>::infinity();
    bool ok = false;
    std::string message;
};

struct MarginalFit {
    MarginalModel model;
    std::vector<CandidateFit> candidates;
};

/// Maximum likelihood estimate of one family (support is used only by Beta).
CandidateFit fit_family(const std::vector<double>& x, Family f, double lo, double hi);

/// Minimum-BIC family among the candidates with its MLE.
MarginalFit fit_marginal(const std::vector<double>& x, const std::vector<Family>& candidates, double lo, double hi);

/// Standard errors from the numerically differentiated observed information.
std::vector<double> marginal_standard_errors(const MarginalModel& m, const std::vector<double>& x);

double marginal_log_lik(const MarginalModel& m, const std::vector<double>& x);

// ---------------------------------------------------------------------------
// dependence

/// Kendall's tau-b in O(n log n).
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

struct GaussianCopulaModel {
    Eigen::MatrixXd R;
    double log_density(const double* u) const;
};

/// Eigenvalues clipped at floor, then rescaled to a unit diagonal.
Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& A, double floor = 1e-10);

/// u: n x M pseudo-observations in (0, 1).
GaussianCopulaModel gaussian_copula_fit(const Eigen::MatrixXd& u);

enum class PairFamily { Independence, Gaussian, Gumbel, Clayton, Frank, StudentT };
std::string to_string(PairFamily f);
PairFamily pair_family_from_string(const std::string& s);
std::vector<PairFamily> all_pair_families();

inline const std::vector<double> kStudentNuGrid = {2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 30.0};

/// Exchangeable bivariate copula. theta is rho for Gaussian/StudentT.
struct PairCopula {
    PairFamily family = PairFamily::Independence;
    double theta = 0.0;
    double nu = 0.0;  ///< StudentT only
    double log_lik = 0.0;
    double bic = 0.0;

    int n_params() const;
    double log_density(double u, double v) const;
    /// h(u | v) = dC(u, v) / dv.
    double h(double u, double v) const;
    /// Inverse of h in its first argument.
    double hinv(double w, double v) const;
    /// Kendall's tau implied by the parameters (closed form where available).
    double tau() const;
};

PairCopula fit_pair_family(const std::vector<double>& u, const std::vector<double>& v, PairFamily f);
PairCopula fit_pair(const std::vector<double>& u, const std::vector<double>& v,
                    const std::vector<PairFamily>& candidates = all_pair_families());

enum class VineKind { CVine, DVine };
std::string to_string(VineKind k);
VineKind vine_kind_from_string(const std::string& s);

/// Tree t, edge e joins
///   C-vine: order[t] and order[t + e + 1] given order[0..t-1];
///   D-vine: order[e] and order[e + t + 1] given order[e+1..e+t].
/// The first copula argument is always the variable with the smaller position in order.
struct VineCopulaModel {
    VineKind kind = VineKind::CVine;
    std::vector<int> order;
    std::vector<std::vector<PairCopula>> trees;
    double log_lik = 0.0;
    double bic = 0.0;

    int dim() const { return static_cast<int>(order.size()); }
    double log_density(const double* u) const;
    /// Rosenblatt transform: independent uniforms indexed by position in order.
    std::vector<double> rosenblatt(const double* u) const;
    /// Inverse Rosenblatt; w indexed by position in order, returns u by variable index.
    std::vector<double> inverse_rosenblatt(const double* w) const;
};

VineCopulaModel vine_fit(const Eigen::MatrixXd& u, VineKind kind,
                         const std::vector<PairFamily>& candidates = all_pair_families());

// ---------------------------------------------------------------------------
// joint model

enum class CopulaKind { Independence, Gaussian, CVine, DVine };
std::string to_string(CopulaKind k);
CopulaKind copula_kind_from_string(const std::string& s);

struct JointModel {
    std::vector<std::string> names;
    std::vector<MarginalModel> marginals;
    CopulaKind copula = CopulaKind::Independence;
    GaussianCopulaModel gaussian;
    VineCopulaModel vine;

    std::size_t dim() const { return marginals.size(); }
    void validate() const;
    double copula_log_density(const double* u) const;
    /// Dependent uniforms for one draw.
    std::vector<double> sample_uniforms(std::uint64_t key) const;
};

/// Probability integral transform through the fitted marginal CDFs, clipped to (eps, 1 - eps).
Eigen::MatrixXd pseudo_observations(const JointModel& m, const Eigen::MatrixXd& x, double eps = 1e-10);

struct JointFitOptions {
    std::vector<Family> candidates = all_families();
    std::vector<PairFamily> pair_candidates = all_pair_families();
    CopulaKind copula = CopulaKind::CVine;
};

/// Fits marginals column by column then the copula on the parametric pseudo-observations.
/// supports: per column [lo, hi].
JointModel fit_joint(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                     const std::vector<std::pair<double, double>>& supports, const JointFitOptions& opt = {});

/// n x M draws; rows outside any marginal support are redrawn. Throws DataError
/// when more than half of the attempts are rejected.
Eigen::MatrixXd sample_joint(const JointModel& m, std::size_t n, std::uint64_t seed);

/// Reference marginals of the eleven Model 1 parameters with independent dependence.
JointModel reference_joint_model();

}  // namespace gmsynth
