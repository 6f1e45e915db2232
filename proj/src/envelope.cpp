#include "gmsynth/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gmsynth/error.hpp"

namespace gmsynth {

std::array<double, 7> EnvelopeParams::knot_times() const {
    std::array<double, 7> t{};
    t[0] = 0.0;
    for (int i = 0; i < 6; ++i) t[i + 1] = t[i] + d[i];
    return t;
}

double EnvelopeParams::t_final() const { return knot_times()[6]; }

void EnvelopeParams::validate() const {
    for (double v : d)
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("envelope durations must be finite and > 0");
    if (!(ia_total > 0.0) || !std::isfinite(ia_total)) throw ValidationError("envelope ia_total must be > 0");
}

EnvelopeParams fit_envelope(const HusidCurve& h) {
    if (!(h.ia_total > 0.0)) throw DataError("fit_envelope: zero Arias intensity");
    std::array<double, 7> t{};
    t[0] = 0.0;
    for (int i = 1; i < 7; ++i) t[i] = h.time_at_fraction(kKnotFractions[i]);
    EnvelopeParams p;
    for (int i = 0; i < 6; ++i) p.d[i] = t[i + 1] - t[i];
    p.ia_total = h.ia_total;
    for (double v : p.d)
        if (!(v > 0.0)) throw DataError("fit_envelope: degenerate Husid curve (zero-length phase)");
    return p;
}

EnvelopeSpline::EnvelopeSpline(const EnvelopeParams& p) {
    p.validate();
    t_ = p.knot_times();
    for (int i = 0; i < 7; ++i) y_[i] = kKnotFractions[i] * p.ia_total;
    std::array<double, 6> delta{};
    for (int i = 0; i < 6; ++i) delta[i] = (y_[i + 1] - y_[i]) / (t_[i + 1] - t_[i]);
    m_[0] = std::max(0.0, delta[0]);
    m_[6] = std::max(0.0, delta[5]);
    for (int i = 1; i < 6; ++i) m_[i] = delta[i - 1] * delta[i] <= 0.0 ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
    // Fritsch-Carlson limiter
    for (int i = 0; i < 6; ++i) {
        if (delta[i] == 0.0) {
            m_[i] = m_[i + 1] = 0.0;
            continue;
        }
        const double a = m_[i] / delta[i], b = m_[i + 1] / delta[i];
        const double s = a * a + b * b;
        if (s > 9.0) {
            const double tau = 3.0 / std::sqrt(s);
            m_[i] = tau * a * delta[i];
            m_[i + 1] = tau * b * delta[i];
        }
    }
}

void EnvelopeSpline::check(double t) const {
    const double tol = 1e-12 * std::max(1.0, t_.back());
    if (!(t >= -tol && t <= t_.back() + tol)) throw ValidationError("envelope evaluated outside [0, t_f]");
}

std::size_t EnvelopeSpline::segment(double t) const {
    std::size_t i = 0;
    while (i < 5 && t >= t_[i + 1]) ++i;
    return i;
}

double EnvelopeSpline::husid(double t) const {
    check(t);
    const std::size_t i = segment(t);
    const double h = t_[i + 1] - t_[i];
    const double s = std::clamp((t - t_[i]) / h, 0.0, 1.0);
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s, h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
    return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
}

double EnvelopeSpline::rate(double t) const {
    check(t);
    const std::size_t i = segment(t);
    const double h = t_[i + 1] - t_[i];
    const double s = std::clamp((t - t_[i]) / h, 0.0, 1.0);
    const double s2 = s * s;
    const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1, d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
    return (d00 * y_[i] + d01 * y_[i + 1]) / h + d10 * m_[i] + d11 * m_[i + 1];
}

double EnvelopeSpline::q(double t) const {
    return std::sqrt(2.0 / std::numbers::pi * std::max(0.0, rate(t)));
}

double expected_husid(const EnvelopeParams& p, double t) { return EnvelopeSpline(p).husid(t); }
double eval_q(const EnvelopeParams& p, double t) { return EnvelopeSpline(p).q(t); }

}  // namespace gmsynth
