#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace gmsynth {

/// Standard gravity in cm/s^2, used to express PGV of records given in g.
inline constexpr double kGravityCmS2 = 980.665;

/// Uniformly sampled acceleration time series, samples in units of g.
struct AccelRecord {
    double dt = 0.0;
    std::vector<double> samples;
    std::string id;
    std::map<std::string, std::string> meta;

    std::size_t size() const { return samples.size(); }
    /// Time of the last sample.
    double duration() const { return dt * static_cast<double>(samples.size() - 1); }
    /// Throws ValidationError when dt <= 0, fewer than 2 samples, or a non-finite sample.
    void validate() const;
};

AccelRecord make_record(std::string id, double dt, std::vector<double> samples);

/// Cumulative Arias intensity. With samples in g the convention is
/// Ia(t) = (pi/2) * integral of a^2, i.e. the pi/(2g) factor applied to a in g
/// so that Ia carries units of g*s.
struct HusidCurve {
    std::vector<double> times;
    std::vector<double> ia_cum;
    double ia_total = 0.0;

    /// Time at which the curve reaches fraction f of the total: first sample at
    /// or above the level, linearly interpolated against its predecessor.
    double time_at_fraction(double f) const;
};

struct IntensityMeasures {
    double pga = 0.0;    ///< g
    double pgv = 0.0;    ///< cm/s
    double ia = 0.0;     ///< g*s
    double d5_95 = 0.0;  ///< s
};

HusidCurve husid(const AccelRecord& rec);
double arias_intensity(const AccelRecord& rec);
IntensityMeasures intensity_measures(const AccelRecord& rec);

/// Velocity (same units as acceleration times seconds) by cumulative trapezoid, v(0) = 0.
std::vector<double> integrate_trapezoid(const std::vector<double>& a, double dt);

struct RotationResult {
    AccelRecord record;
    double angle = 0.0;  ///< radians in [0, pi/2)
};

/// Rotates a horizontal pair to zero cross-covariance and keeps the component
/// with the larger Arias intensity.
RotationResult rotate_and_select(const AccelRecord& comp1, const AccelRecord& comp2);

/// Sample covariance terms of mean-removed series; exposed for testing.
struct PairCovariance {
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
};
PairCovariance pair_covariance(const std::vector<double>& x, const std::vector<double>& y);

/// Decimation factor used for a given sampling interval.
int decimation_factor(double dt);
AccelRecord decimate_to_50hz(const AccelRecord& rec);

AccelRecord truncate_energy(const AccelRecord& rec, double lo = 1e-4, double hi = 0.9999);

enum class RecordFormat { Auto, Csv, Json };

AccelRecord load_record(const std::filesystem::path& path, RecordFormat fmt = RecordFormat::Auto);
void save_record(const AccelRecord& rec, const std::filesystem::path& path,
                 RecordFormat fmt = RecordFormat::Auto);
std::string record_to_csv(const AccelRecord& rec);
AccelRecord record_from_csv(const std::string& text, const std::string& fallback_id = "");

/// Sorted list of record files (.csv / .json) inside a directory.
std::vector<std::filesystem::path> list_record_files(const std::filesystem::path& dir);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Writes text to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace gmsynth
