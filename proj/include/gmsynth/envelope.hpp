#pragma once

#include <array>

#include "gmsynth/records.hpp"

namespace gmsynth {

/// Knot levels of the modulating function as fractions of the total Arias intensity.
inline constexpr std::array<double, 7> kKnotFractions = {0.0, 0.05, 0.30, 0.45, 0.75, 0.95, 1.0};

/// Six phase durations D_0-5 ... D_95-100 (s) plus the total Arias intensity (g*s).
struct EnvelopeParams {
    std::array<double, 6> d{};
    double ia_total = 0.0;

    /// t_0 = 0, t_5, t_30, t_45, t_75, t_95, t_100.
    std::array<double, 7> knot_times() const;
    double t_final() const;
    double t_mid() const { return knot_times()[3]; }
    void validate() const;
};

inline constexpr std::array<const char*, 6> kDurationNames = {"D_0_5",   "D_5_30",  "D_30_45",
                                                              "D_45_75", "D_75_95", "D_95_100"};

EnvelopeParams fit_envelope(const HusidCurve& h);

/// Monotone cubic Hermite interpolant of the expected Husid curve.
class EnvelopeSpline {
public:
    explicit EnvelopeSpline(const EnvelopeParams& p);

    double husid(double t) const;
    /// Analytic derivative dIa/dt.
    double rate(double t) const;
    /// Modulating amplitude q = sqrt((2/pi) * max(0, dIa/dt)).
    double q(double t) const;

    double t_final() const { return t_.back(); }
    const std::array<double, 7>& knots() const { return t_; }
    const std::array<double, 7>& slopes() const { return m_; }

private:
    std::size_t segment(double t) const;
    void check(double t) const;
    std::array<double, 7> t_{}, y_{}, m_{};
};

double expected_husid(const EnvelopeParams& p, double t);
double eval_q(const EnvelopeParams& p, double t);

}  // namespace gmsynth
