#include "gmsynth/uq.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/laplace.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "gmsynth/error.hpp"
#include "gmsynth/optimize.hpp"
#include "gmsynth/rng.hpp"

namespace gmsynth {

namespace bm = boost::math;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kInf = std::numeric_limits<double>::infinity();

const std::array<const char*, kNumFamilies> kFamilyNames = {"Gaussian", "Lognormal", "Gumbel",  "Weibull",
                                                            "Gamma",    "Exponential", "Beta", "Logistic",
                                                            "Laplace",  "Rayleigh"};

bool positive_family(Family f) {
    return f == Family::Lognormal || f == Family::Weibull || f == Family::Gamma || f == Family::Exponential ||
           f == Family::Rayleigh;
}

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

double clamp01(double u) { return std::clamp(u, 1e-12, 1.0 - 1e-12); }

double std_normal_quantile(double p) { return bm::quantile(bm::normal(), clamp01(p)); }
double std_normal_cdf(double x) { return bm::cdf(bm::normal(), x); }

template <class F>
double solve_increasing(F f, double lo, double hi) {
    // expand until the bracket changes sign, then TOMS 748
    for (int i = 0; i < 60 && f(lo) > 0.0; ++i) lo -= (hi - lo);
    for (int i = 0; i < 60 && f(hi) < 0.0; ++i) hi += (hi - lo);
    std::uintmax_t iters = 200;
    auto r = bm::tools::toms748_solve(f, lo, hi, bm::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace

std::string to_string(Family f) { return kFamilyNames[static_cast<int>(f)]; }

Family family_from_string(const std::string& s) {
    for (int i = 0; i < kNumFamilies; ++i)
        if (s == kFamilyNames[i]) return static_cast<Family>(i);
    throw ValidationError("unknown distribution family: " + s);
}

std::vector<Family> all_families() {
    std::vector<Family> out;
    for (int i = 0; i < kNumFamilies; ++i) out.push_back(static_cast<Family>(i));
    return out;
}

int family_param_count(Family f) { return (f == Family::Exponential || f == Family::Rayleigh) ? 1 : 2; }

std::vector<std::string> family_param_names(Family f) {
    switch (f) {
        case Family::Gaussian: return {"mean", "sd"};
        case Family::Lognormal: return {"mu_log", "sigma_log"};
        case Family::Gumbel:
        case Family::Logistic:
        case Family::Laplace: return {"location", "scale"};
        case Family::Weibull: return {"scale", "shape"};
        case Family::Gamma: return {"rate", "shape"};
        case Family::Exponential: return {"rate"};
        case Family::Beta: return {"a", "b"};
        case Family::Rayleigh: return {"sigma"};
    }
    return {};
}

// ---------------------------------------------------------------------------
// marginal model

void MarginalModel::validate() const {
    if (static_cast<int>(params.size()) != family_param_count(family))
        throw ValidationError(to_string(family) + ": wrong parameter count");
    for (double p : params)
        if (!std::isfinite(p)) throw ValidationError(to_string(family) + ": non-finite parameter");
    const bool two_positive = family != Family::Gaussian && family != Family::Gumbel && family != Family::Logistic &&
                              family != Family::Laplace && family != Family::Lognormal;
    if (family_param_count(family) == 1) {
        if (!(params[0] > 0.0)) throw ValidationError(to_string(family) + ": parameter must be > 0");
    } else if (two_positive) {
        if (!(params[0] > 0.0 && params[1] > 0.0)) throw ValidationError(to_string(family) + ": parameters must be > 0");
    } else if (!(params[1] > 0.0)) {
        throw ValidationError(to_string(family) + ": scale must be > 0");
    }
    if (!(lo < hi)) throw ValidationError("marginal support must be non-empty");
    if (family == Family::Beta && !(std::isfinite(lo) && std::isfinite(hi)))
        throw ValidationError("Beta marginal needs a finite support");
}

double MarginalModel::log_pdf(double x) const {
    const double a = params[0];
    const double b = params.size() > 1 ? params[1] : 0.0;
    switch (family) {
        case Family::Gaussian: {
            const double z = (x - a) / b;
            return -0.5 * z * z - std::log(b) - kLogSqrt2Pi;
        }
        case Family::Lognormal: {
            if (!(x > 0.0)) return -kInf;
            const double z = (std::log(x) - a) / b;
            return -std::log(x) - std::log(b) - kLogSqrt2Pi - 0.5 * z * z;
        }
        case Family::Gumbel: {
            const double z = (x - a) / b;
            return -std::log(b) - z - std::exp(-z);
        }
        case Family::Weibull: {
            if (!(x > 0.0)) return -kInf;
            const double y = x / a;
            return std::log(b / a) + (b - 1.0) * std::log(y) - std::pow(y, b);
        }
        case Family::Gamma:
            if (!(x > 0.0)) return -kInf;
            return b * std::log(a) - std::lgamma(b) + (b - 1.0) * std::log(x) - a * x;
        case Family::Exponential:
            if (!(x >= 0.0)) return -kInf;
            return std::log(a) - a * x;
        case Family::Beta: {
            const double w = hi - lo, y = (x - lo) / w;
            if (!(y > 0.0 && y < 1.0)) return -kInf;
            return (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)) -
                   std::log(w);
        }
        case Family::Logistic: {
            const double z = std::abs((x - a) / b);
            return -z - std::log(b) - 2.0 * std::log1p(std::exp(-z));
        }
        case Family::Laplace: return -std::log(2.0 * b) - std::abs(x - a) / b;
        case Family::Rayleigh:
            if (!(x >= 0.0)) return -kInf;
            return std::log(x) - 2.0 * std::log(a) - x * x / (2.0 * a * a);
    }
    return -kInf;
}

double MarginalModel::pdf(double x) const { return std::exp(log_pdf(x)); }

double MarginalModel::cdf(double x) const {
    const double a = params[0];
    const double b = params.size() > 1 ? params[1] : 0.0;
    switch (family) {
        case Family::Gaussian: return bm::cdf(bm::normal(a, b), x);
        case Family::Lognormal: return x <= 0.0 ? 0.0 : bm::cdf(bm::lognormal(a, b), x);
        case Family::Gumbel: return std::exp(-std::exp(-(x - a) / b));
        case Family::Weibull: return x <= 0.0 ? 0.0 : -std::expm1(-std::pow(x / a, b));
        case Family::Gamma: return x <= 0.0 ? 0.0 : bm::gamma_p(b, a * x);
        case Family::Exponential: return x <= 0.0 ? 0.0 : -std::expm1(-a * x);
        case Family::Beta: {
            const double y = (x - lo) / (hi - lo);
            if (y <= 0.0) return 0.0;
            if (y >= 1.0) return 1.0;
            return bm::ibeta(a, b, y);
        }
        case Family::Logistic: return 1.0 / (1.0 + std::exp(-(x - a) / b));
        case Family::Laplace: return bm::cdf(bm::laplace(a, b), x);
        case Family::Rayleigh: return x <= 0.0 ? 0.0 : -std::expm1(-x * x / (2.0 * a * a));
    }
    return 0.0;
}

double MarginalModel::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
    const double a = params[0];
    const double b = params.size() > 1 ? params[1] : 0.0;
    switch (family) {
        case Family::Gaussian: return bm::quantile(bm::normal(a, b), p);
        case Family::Lognormal: return bm::quantile(bm::lognormal(a, b), p);
        case Family::Gumbel: return a - b * std::log(-std::log(p));
        case Family::Weibull: return a * std::pow(-std::log1p(-p), 1.0 / b);
        case Family::Gamma: return bm::gamma_p_inv(b, p) / a;
        case Family::Exponential: return -std::log1p(-p) / a;
        case Family::Beta: return lo + (hi - lo) * bm::ibeta_inv(a, b, p);
        case Family::Logistic: return a + b * std::log(p / (1.0 - p));
        case Family::Laplace: return bm::quantile(bm::laplace(a, b), p);
        case Family::Rayleigh: return a * std::sqrt(-2.0 * std::log1p(-p));
    }
    return 0.0;
}

double MarginalModel::mean() const {
    const double a = params[0];
    const double b = params.size() > 1 ? params[1] : 0.0;
    switch (family) {
        case Family::Gaussian: return a;
        case Family::Lognormal: return std::exp(a + 0.5 * b * b);
        case Family::Gumbel: return a + b * 0.57721566490153286061;
        case Family::Weibull: return a * std::tgamma(1.0 + 1.0 / b);
        case Family::Gamma: return b / a;
        case Family::Exponential: return 1.0 / a;
        case Family::Beta: return lo + (hi - lo) * a / (a + b);
        case Family::Logistic: return a;
        case Family::Laplace: return a;
        case Family::Rayleigh: return a * std::sqrt(kPi / 2.0);
    }
    return 0.0;
}

double MarginalModel::sd() const {
    const double a = params[0];
    const double b = params.size() > 1 ? params[1] : 0.0;
    switch (family) {
        case Family::Gaussian: return b;
        case Family::Lognormal: return std::sqrt(std::expm1(b * b)) * std::exp(a + 0.5 * b * b);
        case Family::Gumbel: return b * kPi / std::sqrt(6.0);
        case Family::Weibull: {
            const double g1 = std::tgamma(1.0 + 1.0 / b), g2 = std::tgamma(1.0 + 2.0 / b);
            return a * std::sqrt(g2 - g1 * g1);
        }
        case Family::Gamma: return std::sqrt(b) / a;
        case Family::Exponential: return 1.0 / a;
        case Family::Beta: return (hi - lo) * std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
        case Family::Logistic: return b * kPi / std::sqrt(3.0);
        case Family::Laplace: return b * std::sqrt(2.0);
        case Family::Rayleigh: return a * std::sqrt((4.0 - kPi) / 2.0);
    }
    return 0.0;
}

double marginal_log_lik(const MarginalModel& m, const std::vector<double>& x) {
    double ll = 0.0;
    for (double v : x) ll += m.log_pdf(v);
    return ll;
}

// ---------------------------------------------------------------------------
// maximum likelihood

namespace {

std::vector<double> mle_params(const std::vector<double>& x, Family f, double lo, double hi) {
    const double n = static_cast<double>(x.size());
    const double m = mean_of(x);
    double var = 0.0;
    for (double v : x) var += (v - m) * (v - m);
    var /= n;
    const double sd = std::sqrt(var);
    switch (f) {
        case Family::Gaussian: return {m, sd};
        case Family::Lognormal: {
            double ml = 0.0, vl = 0.0;
            for (double v : x) ml += std::log(v);
            ml /= n;
            for (double v : x) vl += (std::log(v) - ml) * (std::log(v) - ml);
            return {ml, std::sqrt(vl / n)};
        }
        case Family::Gumbel: {
            const double xmin = *std::min_element(x.begin(), x.end());
            auto weighted = [&](double beta, double& s0) {
                double s1 = 0.0;
                s0 = 0.0;
                for (double v : x) {
                    const double e = std::exp(-(v - xmin) / beta);
                    s0 += e;
                    s1 += v * e;
                }
                return s1 / s0;
            };
            auto g = [&](double beta) {
                double s0;
                return beta - m + weighted(beta, s0);
            };
            const double b0 = sd * std::sqrt(6.0) / kPi;
            const double beta = solve_increasing(g, 0.2 * b0, 5.0 * b0);
            double s0;
            weighted(beta, s0);
            return {xmin - beta * std::log(s0 / n), beta};
        }
        case Family::Weibull: {
            const double xmax = *std::max_element(x.begin(), x.end());
            double mlog = 0.0;
            for (double v : x) mlog += std::log(v / xmax);
            mlog /= n;
            auto g = [&](double k) {
                double s0 = 0.0, s1 = 0.0;
                for (double v : x) {
                    const double y = v / xmax, p = std::pow(y, k);
                    s0 += p;
                    s1 += p * std::log(y);
                }
                return s1 / s0 - 1.0 / k - mlog;
            };
            const double k = solve_increasing(g, 0.05, 20.0);
            double s0 = 0.0;
            for (double v : x) s0 += std::pow(v / xmax, k);
            return {xmax * std::pow(s0 / n, 1.0 / k), k};
        }
        case Family::Gamma: {
            double mlog = 0.0;
            for (double v : x) mlog += std::log(v);
            mlog /= n;
            const double s = std::log(m) - mlog;
            if (!(s > 0.0)) throw ConvergenceError("degenerate sample");
            // log(a) - digamma(a) = s is decreasing in a; solve in log a
            auto g = [&](double la) {
                const double a = std::exp(la);
                return s - (la - bm::digamma(a));
            };
            const double a0 = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
            const double shape = std::exp(solve_increasing(g, std::log(a0) - 1.0, std::log(a0) + 1.0));
            return {shape / m, shape};
        }
        case Family::Exponential: return {1.0 / m};
        case Family::Rayleigh: {
            double s2 = 0.0;
            for (double v : x) s2 += v * v;
            return {std::sqrt(s2 / (2.0 * n))};
        }
        case Family::Laplace: {
            std::vector<double> y = x;
            std::sort(y.begin(), y.end());
            const std::size_t k = y.size();
            const double med = (k % 2 == 1) ? y[k / 2] : 0.5 * (y[k / 2 - 1] + y[k / 2]);
            double b = 0.0;
            for (double v : x) b += std::abs(v - med);
            return {med, b / n};
        }
        case Family::Logistic: {
            auto nll = [&](const std::vector<double>& p) {
                const double s = std::exp(p[1]);
                double ll = 0.0;
                for (double v : x) {
                    const double z = std::abs((v - p[0]) / s);
                    ll += -z - 2.0 * std::log1p(std::exp(-z));
                }
                return -(ll - n * p[1]);
            };
            NelderMeadOptions o;
            o.max_iter = 2000;
            o.ftol_rel = 1e-14;
            o.xtol = 1e-10;
            const double s0 = sd * std::sqrt(3.0) / kPi;
            auto r = nelder_mead(nll, {m, std::log(s0)}, {0.1 * s0, 0.1}, o);
            r = nelder_mead(nll, r.x, {0.01 * s0, 0.01}, o);
            return {r.x[0], std::exp(r.x[1])};
        }
        case Family::Beta: {
            const double w = hi - lo;
            std::vector<double> y(x.size());
            double sl = 0.0, sl1 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                y[i] = (x[i] - lo) / w;
                sl += std::log(y[i]);
                sl1 += std::log1p(-y[i]);
            }
            const double my = (m - lo) / w, vy = var / (w * w);
            const double c = std::max(my * (1.0 - my) / vy - 1.0, 1e-3);
            auto nll = [&](const std::vector<double>& p) {
                const double a = std::exp(p[0]), b = std::exp(p[1]);
                return -((a - 1.0) * sl + (b - 1.0) * sl1 - n * (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)));
            };
            NelderMeadOptions o;
            o.max_iter = 2000;
            o.ftol_rel = 1e-14;
            o.xtol = 1e-10;
            auto r = nelder_mead(nll, {std::log(my * c), std::log((1.0 - my) * c)}, {0.1, 0.1}, o);
            r = nelder_mead(nll, r.x, {0.01, 0.01}, o);
            return {std::exp(r.x[0]), std::exp(r.x[1])};
        }
    }
    return {};
}

}  // namespace

CandidateFit fit_family(const std::vector<double>& x, Family f, double lo, double hi) {
    CandidateFit c;
    c.family = f;
    if (x.size() < 2) {
        c.message = "too few samples";
        return c;
    }
    const double xmin = *std::min_element(x.begin(), x.end());
    const double xmax = *std::max_element(x.begin(), x.end());
    if (positive_family(f) && !(xmin > 0.0)) {
        c.message = "data outside the family support (needs x > 0)";
        return c;
    }
    if (f == Family::Beta && !(std::isfinite(lo) && std::isfinite(hi) && xmin > lo && xmax < hi)) {
        c.message = "Beta needs a finite support strictly containing the data";
        return c;
    }
    if (!(xmax > xmin)) {
        c.message = "constant sample";
        return c;
    }
    try {
        c.params = mle_params(x, f, lo, hi);
        MarginalModel m{f, c.params, f == Family::Beta ? lo : -kInf, f == Family::Beta ? hi : kInf};
        m.validate();
        c.log_lik = marginal_log_lik(m, x);
        if (!std::isfinite(c.log_lik)) throw ConvergenceError("non-finite likelihood");
        c.bic = family_param_count(f) * std::log(static_cast<double>(x.size())) - 2.0 * c.log_lik;
        c.ok = true;
    } catch (const std::exception& e) {
        c.ok = false;
        c.message = std::string("MLE failed: ") + e.what();
        c.bic = kInf;
    }
    return c;
}

MarginalFit fit_marginal(const std::vector<double>& x, const std::vector<Family>& candidates, double lo, double hi) {
    if (x.size() < 30) throw DataError("marginal fit needs at least 30 samples");
    if (!(lo < hi)) throw ValidationError("marginal support must be non-empty");
    for (double v : x) {
        if (!std::isfinite(v)) throw DataError("marginal fit: non-finite sample");
        if (v < lo || v > hi) throw DataError("marginal fit: sample outside the declared support");
    }
    MarginalFit out;
    int best = -1;
    for (Family f : candidates) {
        out.candidates.push_back(fit_family(x, f, lo, hi));
        const auto& c = out.candidates.back();
        if (c.ok && (best < 0 || c.bic < out.candidates[static_cast<std::size_t>(best)].bic))
            best = static_cast<int>(out.candidates.size()) - 1;
    }
    if (best < 0) throw ConvergenceError("no candidate distribution could be fitted");
    const auto& c = out.candidates[static_cast<std::size_t>(best)];
    out.model = MarginalModel{c.family, c.params, lo, hi};
    return out;
}

std::vector<double> marginal_standard_errors(const MarginalModel& m, const std::vector<double>& x) {
    const std::size_t k = m.params.size();
    const double n = static_cast<double>(x.size());
    if (m.family == Family::Laplace) {
        // the likelihood is not differentiable in the location
        return {m.params[1] / std::sqrt(n), m.params[1] / std::sqrt(n)};
    }
    auto ll = [&](const std::vector<double>& p) {
        MarginalModel q = m;
        q.params = p;
        return marginal_log_lik(q, x);
    };
    std::vector<double> h(k);
    for (std::size_t i = 0; i < k; ++i) h[i] = 1e-4 * std::max(std::abs(m.params[i]), 1e-3);
    Eigen::MatrixXd H(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i; j < k; ++j) {
            auto p = m.params;
            double v;
            if (i == j) {
                const double f0 = ll(p);
                p[i] += h[i];
                const double fp = ll(p);
                p[i] -= 2.0 * h[i];
                const double fm = ll(p);
                v = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            } else {
                auto e = [&](double si, double sj) {
                    auto q = m.params;
                    q[i] += si * h[i];
                    q[j] += sj * h[j];
                    return ll(q);
                };
                v = (e(1, 1) - e(1, -1) - e(-1, 1) + e(-1, -1)) / (4.0 * h[i] * h[j]);
            }
            H(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -v;
            H(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = -v;
        }
    }
    const Eigen::MatrixXd cov = H.inverse();
    std::vector<double> se(k);
    for (std::size_t i = 0; i < k; ++i) se[i] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))));
    return se;
}

// ---------------------------------------------------------------------------
// Kendall's tau

namespace {

std::int64_t tie_pairs_sorted(const std::vector<double>& v) {
    std::int64_t total = 0, run = 1;
    for (std::size_t i = 1; i <= v.size(); ++i) {
        if (i < v.size() && v[i] == v[i - 1]) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

std::int64_t merge_count(std::vector<double>& a, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    std::int64_t swaps = merge_count(a, buf, lo, mid) + merge_count(a, buf, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (a[j] < a[i]) {
            swaps += static_cast<std::int64_t>(mid - i);
            buf[k++] = a[j++];
        } else {
            buf[k++] = a[i++];
        }
    }
    while (i < mid) buf[k++] = a[i++];
    while (j < hi) buf[k++] = a[j++];
    std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
              a.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("kendall_tau: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw DataError("kendall_tau: needs at least two observations");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]); });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[idx[i]];
        ys[i] = y[idx[i]];
    }
    const std::int64_t n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
    const std::int64_t n1 = tie_pairs_sorted(xs);
    std::int64_t n3 = 0, run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
            ++run;
        } else {
            n3 += run * (run - 1) / 2;
            run = 1;
        }
    }
    std::vector<double> buf(n);
    const std::int64_t swaps = merge_count(ys, buf, 0, n);
    const std::int64_t n2 = tie_pairs_sorted(ys);
    const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
    if (!(denom > 0.0)) throw DataError("kendall_tau: constant sample");
    return static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps) / denom;
}

// ---------------------------------------------------------------------------
// Gaussian copula

Eigen::MatrixXd nearest_correlation(const Eigen::MatrixXd& A, double floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd B = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::VectorXd d = B.diagonal().cwiseSqrt().cwiseInverse();
    B = d.asDiagonal() * B * d.asDiagonal();
    B.diagonal().setOnes();
    return 0.5 * (B + B.transpose());
}

GaussianCopulaModel gaussian_copula_fit(const Eigen::MatrixXd& u) {
    const auto n = u.rows(), M = u.cols();
    if (n < 2 || M < 1) throw DataError("gaussian copula fit needs data");
    Eigen::MatrixXd z(n, M);
    for (Eigen::Index j = 0; j < M; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = u(i, j);
            if (!(v > 0.0 && v < 1.0)) throw DataError("pseudo-observations must lie in (0, 1)");
            z(i, j) = std_normal_quantile(v);
        }
    const Eigen::RowVectorXd mu = z.colwise().mean();
    const Eigen::MatrixXd c = z.rowwise() - mu;
    Eigen::MatrixXd S = (c.transpose() * c) / static_cast<double>(n - 1);
    Eigen::VectorXd sd = S.diagonal().cwiseSqrt();
    for (Eigen::Index j = 0; j < M; ++j)
        if (!(sd(j) > 1e-12)) throw DataError("gaussian copula fit: rank-deficient data");
    Eigen::MatrixXd R = sd.cwiseInverse().asDiagonal() * S * sd.cwiseInverse().asDiagonal();
    R.diagonal().setOnes();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    if (es.eigenvalues().minCoeff() < 1e-10) R = nearest_correlation(R);
    return {R};
}

double GaussianCopulaModel::log_density(const double* u) const {
    const auto M = R.rows();
    Eigen::VectorXd z(M);
    for (Eigen::Index j = 0; j < M; ++j) {
        if (!(u[j] > 0.0 && u[j] < 1.0)) throw ValidationError("copula density needs u in (0, 1)");
        z(j) = std_normal_quantile(u[j]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) throw ValidationError("correlation matrix is not positive definite");
    const Eigen::VectorXd y = llt.matrixL().solve(z);
    double logdet = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) logdet += 2.0 * std::log(llt.matrixL()(j, j));
    return -0.5 * logdet - 0.5 * (y.squaredNorm() - z.squaredNorm());
}

// ---------------------------------------------------------------------------
// pair copulas

namespace {

const std::array<const char*, 6> kPairNames = {"Independence", "Gaussian", "Gumbel", "Clayton", "Frank", "StudentT"};

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(std::min(a, b) - m));
}

double t_quantile(double nu, double p) { return bm::quantile(bm::students_t(nu), clamp01(p)); }
double t_cdf(double nu, double x) { return bm::cdf(bm::students_t(nu), x); }

double t_log_density_xy(double rho, double nu, double x, double y) {
    const double r2 = 1.0 - rho * rho;
    const double c = std::lgamma(0.5 * (nu + 2.0)) + std::lgamma(0.5 * nu) - 2.0 * std::lgamma(0.5 * (nu + 1.0));
    const double q = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2);
    return c - 0.5 * std::log(r2) - 0.5 * (nu + 2.0) * std::log1p(q) +
           0.5 * (nu + 1.0) * (std::log1p(x * x / nu) + std::log1p(y * y / nu));
}

double gauss_log_density_xy(double rho, double x, double y) {
    const double r2 = 1.0 - rho * rho;
    return -0.5 * std::log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2);
}

double debye1(double theta) {
    if (std::abs(theta) < 1e-10) return 1.0;
    auto f = [](double t) { return std::abs(t) < 1e-12 ? 1.0 : t / std::expm1(t); };
    const double integral = bm::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, theta, 10, 1e-13);
    return integral / theta;
}

}  // namespace

std::string to_string(PairFamily f) { return kPairNames[static_cast<int>(f)]; }

PairFamily pair_family_from_string(const std::string& s) {
    for (int i = 0; i < 6; ++i)
        if (s == kPairNames[i]) return static_cast<PairFamily>(i);
    throw ValidationError("unknown pair copula family: " + s);
}

std::vector<PairFamily> all_pair_families() {
    return {PairFamily::Independence, PairFamily::Gaussian, PairFamily::Gumbel,
            PairFamily::Clayton,      PairFamily::Frank,    PairFamily::StudentT};
}

int PairCopula::n_params() const {
    switch (family) {
        case PairFamily::Independence: return 0;
        case PairFamily::StudentT: return 2;
        default: return 1;
    }
}

double PairCopula::log_density(double u, double v) const {
    u = clamp01(u);
    v = clamp01(v);
    const double th = theta;
    switch (family) {
        case PairFamily::Independence: return 0.0;
        case PairFamily::Gaussian: return gauss_log_density_xy(th, std_normal_quantile(u), std_normal_quantile(v));
        case PairFamily::StudentT: return t_log_density_xy(th, nu, t_quantile(nu, u), t_quantile(nu, v));
        case PairFamily::Clayton: {
            const double lu = std::log(u), lv = std::log(v);
            const double a = -th * lu, b = -th * lv;
            // log(u^-th + v^-th - 1)
            const double m = std::max(a, b);
            const double ls = m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
            return std::log1p(th) - (th + 1.0) * (lu + lv) - (2.0 + 1.0 / th) * ls;
        }
        case PairFamily::Gumbel: {
            const double x = -std::log(u), y = -std::log(v);
            const double lx = std::log(x), ly = std::log(y);
            const double lA = log_sum_exp(th * lx, th * ly);
            const double A1 = std::exp(lA / th);
            return -A1 + x + y + (th - 1.0) * (lx + ly) + (-2.0 + 1.0 / th) * lA + std::log(A1 + th - 1.0);
        }
        case PairFamily::Frank: {
            if (std::abs(th) < 1e-10) return 0.0;
            const double em = std::expm1(-th);
            const double D = -em - std::expm1(-th * u) * std::expm1(-th * v);
            return std::log(th * -em) - th * (u + v) - 2.0 * std::log(std::abs(D));
        }
    }
    return 0.0;
}

double PairCopula::h(double u, double v) const {
    u = clamp01(u);
    v = clamp01(v);
    const double th = theta;
    switch (family) {
        case PairFamily::Independence: return u;
        case PairFamily::Gaussian: {
            const double x = std_normal_quantile(u), y = std_normal_quantile(v);
            return std_normal_cdf((x - th * y) / std::sqrt(1.0 - th * th));
        }
        case PairFamily::StudentT: {
            const double x = t_quantile(nu, u), y = t_quantile(nu, v);
            const double s = std::sqrt((nu + y * y) * (1.0 - th * th) / (nu + 1.0));
            return t_cdf(nu + 1.0, (x - th * y) / s);
        }
        case PairFamily::Clayton: {
            const double a = -th * std::log(u), b = -th * std::log(v);
            const double m = std::max(a, b);
            const double ls = m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
            return std::exp((th + 1.0) / th * b - (1.0 + 1.0 / th) * ls);
        }
        case PairFamily::Gumbel: {
            const double x = -std::log(u), y = -std::log(v);
            const double lA = log_sum_exp(th * std::log(x), th * std::log(y));
            const double A1 = std::exp(lA / th);
            return std::exp(-A1 + (1.0 / th - 1.0) * lA + (th - 1.0) * std::log(y) + y);
        }
        case PairFamily::Frank: {
            if (std::abs(th) < 1e-10) return u;
            const double eu = std::expm1(-th * u), ev = std::expm1(-th * v);
            return std::exp(-th * v) * eu / (std::expm1(-th) + eu * ev);
        }
    }
    return u;
}

double PairCopula::hinv(double w, double v) const {
    w = clamp01(w);
    v = clamp01(v);
    const double th = theta;
    switch (family) {
        case PairFamily::Independence: return w;
        case PairFamily::Gaussian: {
            const double y = std_normal_quantile(v);
            return clamp01(std_normal_cdf(std_normal_quantile(w) * std::sqrt(1.0 - th * th) + th * y));
        }
        case PairFamily::StudentT: {
            const double y = t_quantile(nu, v);
            const double s = std::sqrt((nu + y * y) * (1.0 - th * th) / (nu + 1.0));
            return clamp01(t_cdf(nu, t_quantile(nu + 1.0, w) * s + th * y));
        }
        case PairFamily::Clayton: {
            const double c = -th / (th + 1.0) * std::log(w);
            const double B = -th * std::log(v) + std::log(std::expm1(c));
            const double lt = B > 0.0 ? B + std::log1p(std::exp(-B)) : std::log1p(std::exp(B));
            return clamp01(std::exp(-lt / th));
        }
        case PairFamily::Frank: {
            if (std::abs(th) < 1e-10) return w;
            const double r = w * std::expm1(-th) / (w + (1.0 - w) * std::exp(-th * v));
            return clamp01(-std::log1p(r) / th);
        }
        case PairFamily::Gumbel: {
            // h is decreasing in s = log(-log u); solve on a wide bracket
            auto g = [&](double s) { return w - h(std::exp(-std::exp(s)), v); };
            std::uintmax_t iters = 200;
            auto r = bm::tools::toms748_solve(g, -40.0, 6.0, bm::tools::eps_tolerance<double>(50), iters);
            return clamp01(std::exp(-std::exp(0.5 * (r.first + r.second))));
        }
    }
    return w;
}

double PairCopula::tau() const {
    switch (family) {
        case PairFamily::Independence: return 0.0;
        case PairFamily::Gaussian:
        case PairFamily::StudentT: return 2.0 / kPi * std::asin(theta);
        case PairFamily::Clayton: return theta / (theta + 2.0);
        case PairFamily::Gumbel: return 1.0 - 1.0 / theta;
        case PairFamily::Frank:
            if (std::abs(theta) < 1e-10) return 0.0;
            return 1.0 - 4.0 / theta * (1.0 - debye1(theta));
    }
    return 0.0;
}

PairCopula fit_pair_family(const std::vector<double>& u, const std::vector<double>& v, PairFamily f) {
    if (u.size() != v.size() || u.empty()) throw ValidationError("pair copula fit: size mismatch");
    const double n = static_cast<double>(u.size());
    PairCopula c;
    c.family = f;
    auto loglik = [&](const PairCopula& p) {
        double ll = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) ll += p.log_density(u[i], v[i]);
        return std::isfinite(ll) ? ll : -1e300;
    };
    const int bits = 40;
    switch (f) {
        case PairFamily::Independence: c.log_lik = 0.0; break;
        case PairFamily::Gaussian: {
            std::vector<double> x(u.size()), y(u.size());
            for (std::size_t i = 0; i < u.size(); ++i) {
                x[i] = std_normal_quantile(u[i]);
                y[i] = std_normal_quantile(v[i]);
            }
            auto nll = [&](double rho) {
                double ll = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) ll += gauss_log_density_xy(rho, x[i], y[i]);
                return -ll;
            };
            auto r = bm::tools::brent_find_minima(nll, -0.999, 0.999, bits);
            c.theta = r.first;
            c.log_lik = -r.second;
            break;
        }
        case PairFamily::StudentT: {
            c.log_lik = -kInf;
            std::vector<double> x(u.size()), y(u.size());
            for (double nu : kStudentNuGrid) {
                for (std::size_t i = 0; i < u.size(); ++i) {
                    x[i] = t_quantile(nu, u[i]);
                    y[i] = t_quantile(nu, v[i]);
                }
                auto nll = [&](double rho) {
                    double ll = 0.0;
                    for (std::size_t i = 0; i < x.size(); ++i) ll += t_log_density_xy(rho, nu, x[i], y[i]);
                    return -ll;
                };
                auto r = bm::tools::brent_find_minima(nll, -0.999, 0.999, bits);
                if (-r.second > c.log_lik) {
                    c.log_lik = -r.second;
                    c.theta = r.first;
                    c.nu = nu;
                }
            }
            break;
        }
        case PairFamily::Clayton: {
            auto nll = [&](double lt) {
                PairCopula p{f, std::exp(lt)};
                return -loglik(p);
            };
            auto r = bm::tools::brent_find_minima(nll, std::log(1e-4), std::log(50.0), bits);
            c.theta = std::exp(r.first);
            c.log_lik = -r.second;
            break;
        }
        case PairFamily::Gumbel: {
            auto nll = [&](double lt) {
                PairCopula p{f, std::exp(lt)};
                return -loglik(p);
            };
            auto r = bm::tools::brent_find_minima(nll, 0.0, std::log(50.0), bits);
            c.theta = std::exp(r.first);
            c.log_lik = -r.second;
            break;
        }
        case PairFamily::Frank: {
            auto nll = [&](double th) {
                PairCopula p{f, th};
                return -loglik(p);
            };
            auto r = bm::tools::brent_find_minima(nll, -50.0, 50.0, bits);
            c.theta = r.first;
            c.log_lik = -r.second;
            break;
        }
    }
    c.bic = c.n_params() * std::log(n) - 2.0 * c.log_lik;
    return c;
}

PairCopula fit_pair(const std::vector<double>& u, const std::vector<double>& v, const std::vector<PairFamily>& candidates) {
    if (candidates.empty()) throw ValidationError("no pair copula candidates");
    PairCopula best;
    bool have = false;
    for (PairFamily f : candidates) {
        PairCopula c = fit_pair_family(u, v, f);
        if (!have || c.bic < best.bic) {
            best = c;
            have = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// vines

std::string to_string(VineKind k) { return k == VineKind::CVine ? "CVine" : "DVine"; }

VineKind vine_kind_from_string(const std::string& s) {
    if (s == "CVine" || s == "cvine") return VineKind::CVine;
    if (s == "DVine" || s == "dvine") return VineKind::DVine;
    throw ValidationError("unknown vine structure: " + s);
}

namespace {

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
    return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

/// Path through all nodes maximizing the summed weight of consecutive pairs.
std::vector<int> best_path(const Eigen::MatrixXd& w) {
    const int M = static_cast<int>(w.rows());
    if (M <= 2) {
        std::vector<int> p(M);
        std::iota(p.begin(), p.end(), 0);
        return p;
    }
    if (M <= 16) {
        const std::size_t S = std::size_t{1} << M;
        std::vector<double> dp(S * M, -kInf);
        std::vector<int> parent(S * M, -1);
        for (int i = 0; i < M; ++i) dp[(std::size_t{1} << i) * M + i] = 0.0;
        for (std::size_t s = 1; s < S; ++s)
            for (int last = 0; last < M; ++last) {
                const double cur = dp[s * M + last];
                if (cur == -kInf) continue;
                for (int nx = 0; nx < M; ++nx) {
                    if (s & (std::size_t{1} << nx)) continue;
                    const std::size_t t = s | (std::size_t{1} << nx);
                    const double val = cur + w(last, nx);
                    if (val > dp[t * M + nx]) {
                        dp[t * M + nx] = val;
                        parent[t * M + nx] = last;
                    }
                }
            }
        int last = 0;
        for (int i = 1; i < M; ++i)
            if (dp[(S - 1) * M + i] > dp[(S - 1) * M + last]) last = i;
        std::vector<int> path;
        std::size_t s = S - 1;
        while (last >= 0) {
            path.push_back(last);
            const int p = parent[s * M + last];
            s &= ~(std::size_t{1} << last);
            last = p;
        }
        std::reverse(path.begin(), path.end());
        if (path.front() > path.back()) std::reverse(path.begin(), path.end());
        return path;
    }
    // greedy nearest neighbour from every start
    std::vector<int> best;
    double best_w = -kInf;
    for (int s0 = 0; s0 < M; ++s0) {
        std::vector<int> p = {s0};
        std::vector<bool> used(M, false);
        used[s0] = true;
        double tot = 0.0;
        for (int k = 1; k < M; ++k) {
            int nx = -1;
            for (int j = 0; j < M; ++j)
                if (!used[j] && (nx < 0 || w(p.back(), j) > w(p.back(), nx))) nx = j;
            tot += w(p.back(), nx);
            used[nx] = true;
            p.push_back(nx);
        }
        if (tot > best_w) {
            best_w = tot;
            best = p;
        }
    }
    return best;
}

}  // namespace

VineCopulaModel vine_fit(const Eigen::MatrixXd& u, VineKind kind, const std::vector<PairFamily>& candidates) {
    const auto n = u.rows();
    const int M = static_cast<int>(u.cols());
    if (M < 2) throw ValidationError("vine fit needs at least two variables");
    if (n < 2) throw DataError("vine fit needs data");
    for (Eigen::Index i = 0; i < u.size(); ++i)
        if (!(u.data()[i] > 0.0 && u.data()[i] < 1.0)) throw DataError("pseudo-observations must lie in (0, 1)");
    VineCopulaModel vm;
    vm.kind = kind;
    vm.trees.resize(static_cast<std::size_t>(M - 1));

    if (kind == VineKind::CVine) {
        // cur column j holds F(u_j | roots chosen so far)
        Eigen::MatrixXd cur = u;
        std::vector<int> remaining(M);
        std::iota(remaining.begin(), remaining.end(), 0);
        std::vector<std::vector<std::pair<int, PairCopula>>> fitted(static_cast<std::size_t>(M - 1));
        for (int t = 0; t + 1 < M; ++t) {
            int root = remaining[0];
            double best = -1.0;
            std::vector<std::vector<double>> cols(M);
            for (int j : remaining) cols[j] = column(cur, j);
            if (remaining.size() > 2) {
                Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(M, M);
                for (std::size_t a = 0; a < remaining.size(); ++a)
                    for (std::size_t b = a + 1; b < remaining.size(); ++b) {
                        const int i = remaining[a], j = remaining[b];
                        tau(i, j) = tau(j, i) = std::abs(kendall_tau(cols[i], cols[j]));
                    }
                for (int j : remaining) {
                    double s = 0.0;
                    for (int i : remaining) s += tau(i, j);
                    if (s > best + 1e-12) {
                        best = s;
                        root = j;
                    }
                }
            }
            vm.order.push_back(root);
            remaining.erase(std::find(remaining.begin(), remaining.end(), root));
            for (int j : remaining) {
                PairCopula c = fit_pair(cols[root], cols[j], candidates);
                for (Eigen::Index i = 0; i < n; ++i) cur(i, j) = c.h(cols[j][static_cast<std::size_t>(i)], cols[root][static_cast<std::size_t>(i)]);
                fitted[static_cast<std::size_t>(t)].push_back({j, c});
            }
        }
        vm.order.push_back(remaining[0]);
        for (int t = 0; t + 1 < M; ++t) {
            auto& tree = vm.trees[static_cast<std::size_t>(t)];
            for (int e = 0; t + e + 1 < M; ++e) {
                const int var = vm.order[static_cast<std::size_t>(t + e + 1)];
                for (auto& [j, c] : fitted[static_cast<std::size_t>(t)])
                    if (j == var) tree.push_back(c);
            }
        }
    } else {
        Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(M, M);
        for (int i = 0; i < M; ++i)
            for (int j = i + 1; j < M; ++j) tau(i, j) = tau(j, i) = std::abs(kendall_tau(column(u, i), column(u, j)));
        vm.order = best_path(tau);
        // L[e] = F(x_e | x_{e+1..e+t}), R[e] = F(x_{e+t+1} | x_{e+1..e+t}) for tree t
        std::vector<std::vector<double>> L(static_cast<std::size_t>(M - 1)), R(static_cast<std::size_t>(M - 1));
        for (int e = 0; e + 1 < M; ++e) {
            L[static_cast<std::size_t>(e)] = column(u, vm.order[static_cast<std::size_t>(e)]);
            R[static_cast<std::size_t>(e)] = column(u, vm.order[static_cast<std::size_t>(e + 1)]);
        }
        for (int t = 0; t + 1 < M; ++t) {
            const int ne = M - 1 - t;
            std::vector<std::vector<double>> hl(static_cast<std::size_t>(ne)), hr(static_cast<std::size_t>(ne));
            for (int e = 0; e < ne; ++e) {
                const auto& a = L[static_cast<std::size_t>(e)];
                const auto& b = R[static_cast<std::size_t>(e)];
                PairCopula c = fit_pair(a, b, candidates);
                hl[static_cast<std::size_t>(e)].resize(a.size());
                hr[static_cast<std::size_t>(e)].resize(a.size());
                for (std::size_t i = 0; i < a.size(); ++i) {
                    hl[static_cast<std::size_t>(e)][i] = c.h(a[i], b[i]);
                    hr[static_cast<std::size_t>(e)][i] = c.h(b[i], a[i]);
                }
                vm.trees[static_cast<std::size_t>(t)].push_back(c);
            }
            for (int e = 0; e + 1 < ne; ++e) {
                L[static_cast<std::size_t>(e)] = std::move(hl[static_cast<std::size_t>(e)]);
                R[static_cast<std::size_t>(e)] = std::move(hr[static_cast<std::size_t>(e + 1)]);
            }
        }
    }
    int k = 0;
    vm.log_lik = 0.0;
    for (const auto& tree : vm.trees)
        for (const auto& c : tree) {
            vm.log_lik += c.log_lik;
            k += c.n_params();
        }
    vm.bic = k * std::log(static_cast<double>(n)) - 2.0 * vm.log_lik;
    return vm;
}

namespace {

/// Walks the vine for one observation (u by variable), calling visit(t, e, L, R)
/// for every edge with its conditional arguments; returns the Rosenblatt values.
template <class Visit>
std::vector<double> walk_vine(const VineCopulaModel& vm, const double* u, Visit visit) {
    const int M = vm.dim();
    std::vector<double> w(static_cast<std::size_t>(M));
    if (M == 0) return w;
    w[0] = u[vm.order[0]];
    if (vm.kind == VineKind::CVine) {
        std::vector<double> cur(static_cast<std::size_t>(M));
        for (int p = 0; p < M; ++p) cur[static_cast<std::size_t>(p)] = u[vm.order[static_cast<std::size_t>(p)]];
        for (int t = 0; t + 1 < M; ++t) {
            const double root = cur[static_cast<std::size_t>(t)];
            for (int e = 0; t + e + 1 < M; ++e) {
                const auto p = static_cast<std::size_t>(t + e + 1);
                const PairCopula& c = vm.trees[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
                visit(t, e, root, cur[p]);
                cur[p] = c.h(cur[p], root);
            }
            w[static_cast<std::size_t>(t + 1)] = cur[static_cast<std::size_t>(t + 1)];
        }
    } else {
        std::vector<double> L(static_cast<std::size_t>(M - 1)), R(static_cast<std::size_t>(M - 1));
        for (int e = 0; e + 1 < M; ++e) {
            L[static_cast<std::size_t>(e)] = u[vm.order[static_cast<std::size_t>(e)]];
            R[static_cast<std::size_t>(e)] = u[vm.order[static_cast<std::size_t>(e + 1)]];
        }
        for (int t = 0; t + 1 < M; ++t) {
            const int ne = M - 1 - t;
            std::vector<double> hl(static_cast<std::size_t>(ne)), hr(static_cast<std::size_t>(ne));
            for (int e = 0; e < ne; ++e) {
                const PairCopula& c = vm.trees[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)];
                const double a = L[static_cast<std::size_t>(e)], b = R[static_cast<std::size_t>(e)];
                visit(t, e, a, b);
                hl[static_cast<std::size_t>(e)] = c.h(a, b);
                hr[static_cast<std::size_t>(e)] = c.h(b, a);
            }
            // F(x_{t+1} | x_0..x_t) comes from the first edge of tree t
            w[static_cast<std::size_t>(t + 1)] = hr[0];
            for (int e = 0; e + 1 < ne; ++e) {
                L[static_cast<std::size_t>(e)] = hl[static_cast<std::size_t>(e)];
                R[static_cast<std::size_t>(e)] = hr[static_cast<std::size_t>(e + 1)];
            }
        }
    }
    return w;
}

}  // namespace

double VineCopulaModel::log_density(const double* u) const {
    for (int j = 0; j < dim(); ++j)
        if (!(u[j] > 0.0 && u[j] < 1.0)) throw ValidationError("copula density needs u in (0, 1)");
    double ll = 0.0;
    walk_vine(*this, u, [&](int t, int e, double a, double b) {
        ll += trees[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)].log_density(a, b);
    });
    return ll;
}

std::vector<double> VineCopulaModel::rosenblatt(const double* u) const {
    return walk_vine(*this, u, [](int, int, double, double) {});
}

std::vector<double> VineCopulaModel::inverse_rosenblatt(const double* w) const {
    const int M = dim();
    std::vector<double> u(static_cast<std::size_t>(M));
    if (M == 0) return u;
    auto cop = [&](int t, int e) -> const PairCopula& { return trees[static_cast<std::size_t>(t)][static_cast<std::size_t>(e)]; };
    if (kind == VineKind::CVine) {
        // lev[k][j] = F(x_k | x_0..x_{j-1}) for positions k and levels j <= k
        std::vector<std::vector<double>> lev(static_cast<std::size_t>(M));
        for (int k = 0; k < M; ++k) {
            auto& lk = lev[static_cast<std::size_t>(k)];
            lk.assign(static_cast<std::size_t>(k + 1), 0.0);
            double t = w[k];
            lk[static_cast<std::size_t>(k)] = t;
            for (int j = k - 1; j >= 0; --j) {
                t = cop(j, k - j - 1).hinv(t, lev[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)]);
                lk[static_cast<std::size_t>(j)] = t;
            }
            u[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = lk[0];
        }
    } else {
        // bwd[j] = F(x_j | x_{j+1..k-1}) while sampling position k
        std::vector<double> bwd;
        for (int k = 0; k < M; ++k) {
            std::vector<double> fwd(static_cast<std::size_t>(k + 1));
            fwd[0] = w[k];
            for (int j = 0; j < k; ++j)
                fwd[static_cast<std::size_t>(j + 1)] = cop(k - 1 - j, j).hinv(fwd[static_cast<std::size_t>(j)], bwd[static_cast<std::size_t>(j)]);
            const double xk = fwd[static_cast<std::size_t>(k)];
            for (int j = 0; j < k; ++j)
                bwd[static_cast<std::size_t>(j)] = cop(k - 1 - j, j).h(bwd[static_cast<std::size_t>(j)], fwd[static_cast<std::size_t>(j + 1)]);
            bwd.push_back(xk);
            u[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = xk;
        }
    }
    return u;
}

// ---------------------------------------------------------------------------
// joint model

std::string to_string(CopulaKind k) {
    switch (k) {
        case CopulaKind::Independence: return "Independence";
        case CopulaKind::Gaussian: return "Gaussian";
        case CopulaKind::CVine: return "CVine";
        case CopulaKind::DVine: return "DVine";
    }
    return "";
}

CopulaKind copula_kind_from_string(const std::string& s) {
    for (auto k : {CopulaKind::Independence, CopulaKind::Gaussian, CopulaKind::CVine, CopulaKind::DVine})
        if (s == to_string(k)) return k;
    throw ValidationError("unknown copula kind: " + s);
}

void JointModel::validate() const {
    if (names.size() != marginals.size()) throw ValidationError("joint model: names and marginals differ in size");
    for (const auto& m : marginals) m.validate();
    const auto M = static_cast<Eigen::Index>(dim());
    if (copula == CopulaKind::Gaussian) {
        if (gaussian.R.rows() != M || gaussian.R.cols() != M) throw ValidationError("joint model: correlation size mismatch");
        if ((gaussian.R - gaussian.R.transpose()).cwiseAbs().maxCoeff() > 1e-9) throw ValidationError("correlation matrix not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(gaussian.R);
        if (llt.info() != Eigen::Success) throw ValidationError("correlation matrix not positive definite");
    } else if (copula == CopulaKind::CVine || copula == CopulaKind::DVine) {
        if (vine.dim() != M) throw ValidationError("joint model: vine dimension mismatch");
        std::vector<int> o = vine.order;
        std::sort(o.begin(), o.end());
        for (int i = 0; i < M; ++i)
            if (o[static_cast<std::size_t>(i)] != i) throw ValidationError("vine order is not a permutation");
        if (static_cast<Eigen::Index>(vine.trees.size()) != M - 1) throw ValidationError("vine tree count mismatch");
        for (std::size_t t = 0; t < vine.trees.size(); ++t) {
            if (static_cast<Eigen::Index>(vine.trees[t].size()) != M - 1 - static_cast<Eigen::Index>(t))
                throw ValidationError("vine edge count mismatch");
            for (const auto& c : vine.trees[t]) {
                if (c.family == PairFamily::Clayton && !(c.theta > 0.0)) throw ValidationError("Clayton theta must be > 0");
                if (c.family == PairFamily::Gumbel && !(c.theta >= 1.0)) throw ValidationError("Gumbel theta must be >= 1");
                if ((c.family == PairFamily::Gaussian || c.family == PairFamily::StudentT) && !(std::abs(c.theta) < 1.0))
                    throw ValidationError("correlation parameter must lie in (-1, 1)");
                if (c.family == PairFamily::StudentT && !(c.nu > 2.0)) throw ValidationError("t copula needs nu > 2");
            }
        }
    }
}

double JointModel::copula_log_density(const double* u) const {
    switch (copula) {
        case CopulaKind::Independence: return 0.0;
        case CopulaKind::Gaussian: return gaussian.log_density(u);
        default: return vine.log_density(u);
    }
}

std::vector<double> JointModel::sample_uniforms(std::uint64_t key) const {
    const std::size_t M = dim();
    RandomStream rs(key);
    std::vector<double> w(M);
    for (auto& v : w) v = rs.uniform();
    switch (copula) {
        case CopulaKind::Independence: return w;
        case CopulaKind::Gaussian: {
            Eigen::LLT<Eigen::MatrixXd> llt(gaussian.R);
            Eigen::VectorXd z(static_cast<Eigen::Index>(M));
            for (std::size_t j = 0; j < M; ++j) z(static_cast<Eigen::Index>(j)) = std_normal_quantile(w[j]);
            const Eigen::VectorXd y = llt.matrixL() * z;
            for (std::size_t j = 0; j < M; ++j) w[j] = clamp01(std_normal_cdf(y(static_cast<Eigen::Index>(j))));
            return w;
        }
        default: return vine.inverse_rosenblatt(w.data());
    }
}

Eigen::MatrixXd pseudo_observations(const JointModel& m, const Eigen::MatrixXd& x, double eps) {
    if (static_cast<std::size_t>(x.cols()) != m.dim()) throw ValidationError("pseudo_observations: column count mismatch");
    Eigen::MatrixXd u(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            u(i, j) = std::clamp(m.marginals[static_cast<std::size_t>(j)].cdf(x(i, j)), eps, 1.0 - eps);
    return u;
}

JointModel fit_joint(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                     const std::vector<std::pair<double, double>>& supports, const JointFitOptions& opt) {
    const auto M = static_cast<std::size_t>(x.cols());
    if (names.size() != M || supports.size() != M) throw ValidationError("fit_joint: names/supports do not match columns");
    JointModel jm;
    jm.names = names;
    for (std::size_t j = 0; j < M; ++j) {
        const auto col = column(x, static_cast<Eigen::Index>(j));
        jm.marginals.push_back(fit_marginal(col, opt.candidates, supports[j].first, supports[j].second).model);
    }
    jm.copula = opt.copula;
    if (opt.copula != CopulaKind::Independence) {
        const Eigen::MatrixXd u = pseudo_observations(jm, x);
        if (opt.copula == CopulaKind::Gaussian) jm.gaussian = gaussian_copula_fit(u);
        else jm.vine = vine_fit(u, opt.copula == CopulaKind::CVine ? VineKind::CVine : VineKind::DVine, opt.pair_candidates);
    }
    return jm;
}

Eigen::MatrixXd sample_joint(const JointModel& m, std::size_t n, std::uint64_t seed) {
    m.validate();
    const std::size_t M = m.dim();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(M));
    std::size_t attempts = 0, rejected = 0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::uint64_t a = 0;; ++a) {
            ++attempts;
            const auto u = m.sample_uniforms(stream_key(seed, r, a));
            bool ok = true;
            for (std::size_t j = 0; j < M && ok; ++j) {
                const double v = m.marginals[j].quantile(u[j]);
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
                ok = std::isfinite(v) && m.marginals[j].in_support(v);
            }
            if (ok) break;
            ++rejected;
            if ((attempts >= 100 && 2 * rejected > attempts) || a >= 1000)
                throw DataError("sample_joint: more than half of the draws fall outside the supports");
        }
    }
    if (attempts >= 20 && 2 * rejected > attempts)
        throw DataError("sample_joint: more than half of the draws fall outside the supports");
    return out;
}

JointModel reference_joint_model() {
    JointModel jm;
    struct Row {
        const char* name;
        Family f;
        double p1, p2, lo, hi;
    };
    const Row rows[] = {
        {"log_Ia", Family::Gaussian, -5.557, 1.896, -kInf, kInf},
        {"omega_mid", Family::Lognormal, 3.162, 0.610, 0.0, kInf},
        {"omega_slope", Family::Laplace, -0.227, 0.709, -kInf, kInf},
        {"zeta_mid", Family::Weibull, 0.505, 2.524, 0.02, 1.0},
        {"D_0_5", Family::Gamma, 0.595, 4.357, 0.1, 20.0},
        {"D_5_30", Family::Weibull, 5.398, 1.729, 0.1, 15.0},
        {"D_30_45", Family::Gamma, 1.167, 1.965, 0.1, 10.0},
        {"D_45_75", Family::Gamma, 0.637, 2.899, 0.1, 20.0},
        {"D_75_95", Family::Gumbel, 8.172, 3.637, 0.1, 40.0},
        {"D_95_100", Family::Lognormal, 3.196, 0.960, 0.1, 40.0},
        {"fc", Family::Gamma, 3.572, 0.853, 0.0, 2.0},
    };
    for (const auto& r : rows) {
        jm.names.push_back(r.name);
        jm.marginals.push_back(MarginalModel{r.f, {r.p1, r.p2}, r.lo, r.hi});
    }
    jm.copula = CopulaKind::Independence;
    return jm;
}

}  // namespace gmsynth
