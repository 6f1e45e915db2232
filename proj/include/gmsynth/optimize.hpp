#pragma once

#include <functional>
#include <vector>

namespace gmsynth {

struct NelderMeadOptions {
    int max_iter = 500;
    double ftol_rel = 1e-10;
    double ftol_abs = 0.0;
    double xtol = 1e-8;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Unconstrained Nelder-Mead minimization starting from x0 with initial
/// simplex offsets `step` along each coordinate.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const std::vector<double>& step,
                             const NelderMeadOptions& opt = {});

}  // namespace gmsynth
