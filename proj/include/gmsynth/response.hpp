#pragma once

#include <vector>

#include "gmsynth/records.hpp"

namespace gmsynth {

struct SpectrumResult {
    std::vector<double> periods;  ///< s
    std::vector<double> values;   ///< g
    double zeta = 0.05;
    double mu = 1.0;  ///< 1 means elastic
};

/// n log-spaced points on [lo, hi].
std::vector<double> log_spaced(double lo, double hi, std::size_t n);

/// Peak relative displacement of a linear SDOF (unit mass) under base
/// acceleration a, Newmark average acceleration with step min(dt, T/20).
double sdof_peak_displacement(const double* a, std::size_t n, double dt, double period, double zeta);

/// Same for S independent excitations stored time-major (a[i * S + s]).
void sdof_peak_displacement_batch(const double* a, std::size_t n, std::size_t S, double dt, double period,
                                  double zeta, double* peak);

SpectrumResult linear_spectrum(const AccelRecord& rec, const std::vector<double>& periods, double zeta);

/// Peak ductility max|u|/u_y of an elastic-perfectly-plastic SDOF with yield
/// force fy (per unit mass, in g).
double ductility_demand(const AccelRecord& rec, double period, double zeta, double fy);

struct InelasticPoint {
    double fy = 0.0;       ///< yield force per unit mass (g)
    double mu = 1.0;       ///< achieved ductility
    bool fallback = false;  ///< bracket search failed; largest fy with mu >= target returned
};

/// Yield strength giving the target ductility (1% tolerance, bisection).
InelasticPoint constant_ductility_point(const AccelRecord& rec, double period, double zeta, double mu_target);

/// Sa_NL = (2 pi / T)^2 * u_y * mu_target.
SpectrumResult inelastic_spectrum(const AccelRecord& rec, const std::vector<double>& periods, double zeta,
                                  double mu_target);

}  // namespace gmsynth
