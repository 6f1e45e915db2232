#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gmsynth/envelope.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/spectral.hpp"

namespace gmsynth {

/// Simulation grid: time samples t_i = i*dt for i = 0..K, frequencies
/// omega_k = k*d_omega for k = 0..K-1 with (K-1)*d_omega = 2*pi*omega_upper_hz.
struct SimGrid {
    double dt = 0.02;
    double t_f = 0.0;
    std::size_t K = 0;
    double omega_upper_hz = 25.0;
    double d_omega = 0.0;

    static SimGrid make(double t_f, double dt = 0.02, double omega_upper_hz = 25.0);
    std::size_t n_time() const { return K + 1; }
    FreqGrid freq() const { return {d_omega, K}; }
};

struct NoiseVector {
    std::vector<double> z;  ///< 2K standard normals
    std::uint64_t seed = 0;
};

NoiseVector make_noise(const SimGrid& grid, std::uint64_t key);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Evaluates the spectral representation for one fitted (envelope, spectral) model.
/// The modulating function is sampled on the time grid and rescaled so the
/// discrete expected Arias intensity equals ia_total exactly.
class Simulator {
public:
    Simulator(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid);

    const SimGrid& grid() const { return grid_; }
    /// Sampled modulating amplitude q_i (after discrete rescaling).
    const std::vector<double>& q() const { return q_; }

    /// sigma_A(t_i, omega_k) for one time index.
    void sigma_row(std::size_t i, double* out) const;

    /// Unfiltered process A(t_i) for one noise vector.
    std::vector<double> core(const std::vector<double>& z) const;
    /// Unfiltered process for S noise vectors (z: 2K x S); result is time-major n_time x S.
    RowMatrix core_batch(const Eigen::MatrixXd& z) const;

    /// Energy correction factors for a list of corner frequencies (one time sweep).
    std::vector<double> energy_factors(const std::vector<double>& fcs) const;
    /// Cached factor for the model's own fc.
    double kappa() const;

    /// a_g = kappa * highpass(core(z)).
    std::vector<double> simulate(const std::vector<double>& z) const;

private:
    void angle_row(std::size_t i, double* s, double* c) const;
    /// Rows i0..i1 of [sigma*sin | sigma*cos], row-major with stride 2K.
    void fill_rows(std::size_t i0, std::size_t i1, double* X) const;

    EnvelopeParams env_;
    SpectralModel model_;
    SimGrid grid_;
    std::vector<double> q_;
    std::vector<FilterParams> params_;  ///< per time index, or one entry for constant trends
    std::vector<double> const_phi_;
    std::vector<double> sin_table_, cos_table_;
    std::size_t period_ = 0;  ///< table period when the angle grid is commensurate
    mutable std::once_flag kappa_once_;
    mutable double kappa_ = 1.0;
};

std::vector<double> simulate_core(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid,
                                  const NoiseVector& noise);

/// High-pass through the critically damped displacement kernel h(t) = t exp(-2 pi fc t),
/// applied as an exact recursion of the discrete convolution, then a second difference.
std::vector<double> highpass(const std::vector<double>& a, double fc, double dt);
/// In-place version for S series stored time-major (a[i * S + s]).
void highpass_batch(double* a, std::size_t n, std::size_t S, double fc, double dt);

double energy_factor(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid);

AccelRecord simulate_gm(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid,
                        const NoiseVector& noise, const std::string& id = "sim");

struct FcOptions {
    double fc_lo = 0.0;
    double fc_hi = 2.0;
    double fc_step = 0.01;
    int n_sims = 100;
    std::size_t n_periods = 30;
    double period_lo = 1.0;
    double period_hi = 10.0;
    double zeta = 0.05;
    std::uint64_t seed = 0;
    std::string stream_label = "fc";
};

struct FcResult {
    double fc = 0.0;
    std::vector<double> fc_grid;
    std::vector<double> eps;
    std::vector<double> kappa;  ///< energy factor at each grid point
};

std::vector<double> fc_periods(const FcOptions& opt);
std::vector<double> fc_grid(const FcOptions& opt);

/// Corner frequency minimizing the standardized log-spectrum bias at the
/// periods of fc_periods(opt). Ties resolve to the smallest fc.
FcResult optimize_fc(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid,
                     const std::vector<double>& target_sa, const FcOptions& opt = {});

/// Common random numbers of the corner frequency search (2K x n_sims).
Eigen::MatrixXd fc_noise(const SimGrid& grid, const FcOptions& opt);

/// Bias objective for every fc of the grid given the target spectrum.
std::vector<double> fc_objective(const Simulator& sim, const std::vector<double>& target_sa,
                                 const std::vector<double>& fcs, const FcOptions& opt);
/// Same with the energy factors of fcs supplied by the caller.
std::vector<double> fc_objective(const Simulator& sim, const std::vector<double>& target_sa,
                                 const std::vector<double>& fcs, const std::vector<double>& kappa,
                                 const FcOptions& opt);

}  // namespace gmsynth
