#include "gmsynth/response.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "gmsynth/error.hpp"

namespace gmsynth {

std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    if (n == 0) return {};
    if (n == 1) return {lo};
    std::vector<double> out(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

namespace {

int substeps(double dt, double period) {
    const double hmax = period / 20.0;
    return std::max(1, static_cast<int>(std::ceil(dt / hmax - 1e-12)));
}

struct LinearStep {
    double h, c, k, mhat_inv;
    LinearStep(double h_, double period, double zeta) : h(h_) {
        const double w = 2.0 * std::numbers::pi / period;
        c = 2.0 * zeta * w;
        k = w * w;
        mhat_inv = 1.0 / (1.0 + 0.5 * c * h + 0.25 * k * h * h);
    }
};

}  // namespace

double sdof_peak_displacement(const double* a, std::size_t n, double dt, double period, double zeta) {
    if (!(period > 0.0)) throw ValidationError("period must be > 0");
    const int ns = substeps(dt, period);
    const LinearStep st(dt / ns, period, zeta);
    const double h = st.h, h2 = 0.25 * h * h, hh = 0.5 * h;
    double u = 0.0, v = 0.0, acc = -a[0], peak = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a0 = a[i], da = (a[i + 1] - a[i]) / ns;
        for (int j = 1; j <= ns; ++j) {
            const double p = -(a0 + da * j);
            const double uh = u + h * v + h2 * acc;
            const double vh = v + hh * acc;
            acc = (p - st.c * vh - st.k * uh) * st.mhat_inv;
            u = uh + h2 * acc;
            v = vh + hh * acc;
            peak = std::max(peak, std::abs(u));
        }
    }
    return peak;
}

void sdof_peak_displacement_batch(const double* __restrict a, std::size_t n, std::size_t S, double dt,
                                  double period, double zeta, double* __restrict peak) {
    const int ns = substeps(dt, period);
    const LinearStep st(dt / ns, period, zeta);
    const double h = st.h, h2 = 0.25 * h * h, hh = 0.5 * h;
    // One Newmark step is linear in (u, v, p0, p1) once the start acceleration
    // is replaced by equilibrium, so each substep reduces to a 2x2 transition
    // plus load coefficients on the bracketing samples a0, a1.
    auto step = [&](double u, double v, double p0, double p1, double& un, double& vn) {
        const double acc = p0 - st.c * v - st.k * u;
        const double uh = u + h * v + h2 * acc, vh = v + hh * acc;
        const double an = (p1 - st.c * vh - st.k * uh) * st.mhat_inv;
        un = uh + h2 * an;
        vn = vh + hh * an;
    };
    double Tuu, Tvu, Tuv, Tvv, Lu0, Lv0, Lu1, Lv1;
    step(1, 0, 0, 0, Tuu, Tvu);
    step(0, 1, 0, 0, Tuv, Tvv);
    step(0, 0, 1, 0, Lu0, Lv0);
    step(0, 0, 0, 1, Lu1, Lv1);
    // substep j loads p0 = -(a0 + (a1 - a0) f0), p1 = -(a0 + (a1 - a0) f1)
    std::vector<std::array<double, 4>> g(static_cast<std::size_t>(ns));
    for (int j = 0; j < ns; ++j) {
        const double f0 = static_cast<double>(j) / ns, f1 = static_cast<double>(j + 1) / ns;
        g[static_cast<std::size_t>(j)] = {-(Lu0 * (1 - f0) + Lu1 * (1 - f1)), -(Lu0 * f0 + Lu1 * f1),
                                          -(Lv0 * (1 - f0) + Lv1 * (1 - f1)), -(Lv0 * f0 + Lv1 * f1)};
    }
    std::vector<double> U(S, 0.0), V(S, 0.0), P(S, 0.0);
    double* __restrict u = U.data();
    double* __restrict v = V.data();
    double* __restrict pk = P.data();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double* __restrict a0 = a + i * S;
        const double* __restrict a1 = a0 + S;
        for (const auto& c : g) {
            for (std::size_t s = 0; s < S; ++s) {
                const double un = Tuu * u[s] + Tuv * v[s] + c[0] * a0[s] + c[1] * a1[s];
                const double vn = Tvu * u[s] + Tvv * v[s] + c[2] * a0[s] + c[3] * a1[s];
                u[s] = un;
                v[s] = vn;
                pk[s] = std::max(pk[s], std::abs(un));
            }
        }
    }
    std::copy(P.begin(), P.end(), peak);
}

SpectrumResult linear_spectrum(const AccelRecord& rec, const std::vector<double>& periods, double zeta) {
    rec.validate();
    if (!(zeta > 0.0 && zeta < 1.0)) throw ValidationError("damping ratio must lie in (0, 1)");
    SpectrumResult r;
    r.periods = periods;
    r.zeta = zeta;
    r.mu = 1.0;
    r.values.resize(periods.size());
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (!(periods[i] > 0.0)) throw ValidationError("periods must be > 0");
        if (i > 0 && !(periods[i] > periods[i - 1])) throw ValidationError("periods must be strictly increasing");
        const double w = 2.0 * std::numbers::pi / periods[i];
        r.values[i] = w * w * sdof_peak_displacement(rec.samples.data(), rec.size(), rec.dt, periods[i], zeta);
    }
    return r;
}

double ductility_demand(const AccelRecord& rec, double period, double zeta, double fy) {
    if (!(fy > 0.0)) throw ValidationError("yield force must be > 0");
    const int ns = substeps(rec.dt, period);
    const double h = rec.dt / ns, h2 = 0.25 * h * h, hh = 0.5 * h;
    const double w = 2.0 * std::numbers::pi / period, k = w * w, c = 2.0 * zeta * w;
    const double m_el = 1.0 / (1.0 + 0.5 * c * h + k * h2), m_pl = 1.0 / (1.0 + 0.5 * c * h);
    const double* a = rec.samples.data();
    const std::size_t n = rec.size();
    double u = 0.0, v = 0.0, fs = 0.0, acc = -a[0], peak = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double a0 = a[i], da = (a[i + 1] - a[i]) / ns;
        for (int j = 1; j <= ns; ++j) {
            const double p = -(a0 + da * j);
            const double uh = u + h * v + h2 * acc;
            const double vh = v + hh * acc;
            double an = (p - c * vh - fs - k * (uh - u)) * m_el;
            double un = uh + h2 * an;
            double ft = fs + k * (un - u);
            if (std::abs(ft) > fy) {
                ft = std::copysign(fy, ft);
                an = (p - c * vh - ft) * m_pl;
                un = uh + h2 * an;
            }
            fs = ft;
            acc = an;
            u = un;
            v = vh + hh * an;
            peak = std::max(peak, std::abs(u));
        }
    }
    return peak / (fy / k);
}

InelasticPoint constant_ductility_point(const AccelRecord& rec, double period, double zeta, double mu_target) {
    if (!(mu_target >= 1.0)) throw ValidationError("target ductility must be >= 1");
    const double w = 2.0 * std::numbers::pi / period;
    const double f_el = w * w * sdof_peak_displacement(rec.samples.data(), rec.size(), rec.dt, period, zeta);
    InelasticPoint out;
    if (!(f_el > 0.0)) return out;
    if (mu_target <= 1.0 + 1e-12) {
        out.fy = f_el;
        out.mu = 1.0;
        return out;
    }
    const double tol = 0.01 * mu_target;
    auto mu_at = [&](double eta) { return ductility_demand(rec, period, zeta, eta * f_el); };

    double hi = 1.0, lo = 0.0, mu_lo = 0.0;
    bool bracketed = false;
    double eta = 1.0;
    for (int i = 0; i < 60; ++i) {
        eta *= 0.8;
        const double m = mu_at(eta);
        if (std::abs(m - mu_target) <= tol) return {eta * f_el, m, false};
        if (m >= mu_target) {
            lo = eta;
            mu_lo = m;
            bracketed = true;
            break;
        }
        hi = eta;
    }
    if (!bracketed) throw ConvergenceError("constant ductility search failed to reach the target");
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double m = mu_at(mid);
        if (std::abs(m - mu_target) <= tol) return {mid * f_el, m, false};
        if (m >= mu_target) {
            lo = mid;
            mu_lo = m;
        } else {
            hi = mid;
        }
    }
    return {lo * f_el, mu_lo, true};
}

SpectrumResult inelastic_spectrum(const AccelRecord& rec, const std::vector<double>& periods, double zeta,
                                  double mu_target) {
    rec.validate();
    if (!(zeta > 0.0 && zeta < 1.0)) throw ValidationError("damping ratio must lie in (0, 1)");
    SpectrumResult r;
    r.periods = periods;
    r.zeta = zeta;
    r.mu = mu_target;
    r.values.resize(periods.size());
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (!(periods[i] > 0.0)) throw ValidationError("periods must be > 0");
        const InelasticPoint p = constant_ductility_point(rec, periods[i], zeta, mu_target);
        r.values[i] = mu_target * p.fy;
    }
    return r;
}

}  // namespace gmsynth
