#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "gmsynth/envelope.hpp"
#include "gmsynth/records.hpp"
#include "gmsynth/rng.hpp"
#include "gmsynth/spectral.hpp"

namespace gmtest {

inline constexpr double kPi = std::numbers::pi;

/// Trapezoidal Arias intensity, written independently of the library.
inline double arias_oracle(const std::vector<double>& a, double dt) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) s += 0.5 * (a[i] * a[i] + a[i + 1] * a[i + 1]) * dt;
    return 0.5 * kPi * s;
}

/// Constant-amplitude record: its trapezoidal Husid curve is an exact ramp.
inline gmsynth::AccelRecord ramp_record(double T, double dt, double amp = 0.1) {
    const auto n = static_cast<std::size_t>(std::llround(T / dt)) + 1;
    return gmsynth::make_record("ramp", dt, std::vector<double>(n, amp));
}

inline gmsynth::AccelRecord noise_record(std::uint64_t key, std::size_t n, double dt, double sd = 0.05) {
    auto z = gmsynth::standard_normals(key, n);
    for (auto& v : z) v *= sd;
    return gmsynth::make_record("noise", dt, z);
}

inline gmsynth::EnvelopeParams short_env(double ia = 0.05) {
    gmsynth::EnvelopeParams p;
    p.d = {0.5, 1.5, 1.0, 2.0, 2.0, 1.5};
    p.ia_total = ia;
    return p;
}

/// Model 1: linear omega trend, constant zeta.
inline gmsynth::SpectralModel model1(double omega_mid = 25.0, double slope = -0.5, double zeta = 0.3,
                                     double fc = 0.2) {
    auto m = gmsynth::model_config(1);
    m.theta_f = {omega_mid, slope, zeta};
    m.fc = fc;
    return m;
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("gmsynth_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace gmtest
