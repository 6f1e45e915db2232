#include "gmsynth/records.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gmsynth/error.hpp"

namespace gmsynth {

void AccelRecord::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("record '" + id + "': dt must be > 0");
    if (samples.size() < 2) throw ValidationError("record '" + id + "': needs at least 2 samples");
    for (double v : samples)
        if (!std::isfinite(v)) throw ValidationError("record '" + id + "': non-finite sample");
}

AccelRecord make_record(std::string id, double dt, std::vector<double> samples) {
    AccelRecord r;
    r.id = std::move(id);
    r.dt = dt;
    r.samples = std::move(samples);
    r.validate();
    return r;
}

double HusidCurve::time_at_fraction(double f) const {
    if (times.empty()) throw ValidationError("empty Husid curve");
    const double target = f * ia_total;
    auto it = std::lower_bound(ia_cum.begin(), ia_cum.end(), target);
    if (it == ia_cum.end()) return times.back();
    const std::size_t i = static_cast<std::size_t>(it - ia_cum.begin());
    if (i == 0) return times.front();
    const double c0 = ia_cum[i - 1], c1 = ia_cum[i];
    if (c1 <= c0) return times[i];
    return times[i - 1] + (target - c0) / (c1 - c0) * (times[i] - times[i - 1]);
}

HusidCurve husid(const AccelRecord& rec) {
    rec.validate();
    const std::size_t n = rec.size();
    HusidCurve h;
    h.times.resize(n);
    h.ia_cum.resize(n);
    const double c = 0.5 * std::numbers::pi * 0.5 * rec.dt;
    double acc = 0.0;
    h.times[0] = 0.0;
    h.ia_cum[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double a0 = rec.samples[i - 1], a1 = rec.samples[i];
        acc += c * (a0 * a0 + a1 * a1);
        h.times[i] = rec.dt * static_cast<double>(i);
        h.ia_cum[i] = acc;
    }
    h.ia_total = acc;
    return h;
}

double arias_intensity(const AccelRecord& rec) { return husid(rec).ia_total; }

std::vector<double> integrate_trapezoid(const std::vector<double>& a, double dt) {
    std::vector<double> v(a.size(), 0.0);
    for (std::size_t i = 1; i < a.size(); ++i) v[i] = v[i - 1] + 0.5 * dt * (a[i - 1] + a[i]);
    return v;
}

IntensityMeasures intensity_measures(const AccelRecord& rec) {
    const HusidCurve h = husid(rec);
    IntensityMeasures im;
    for (double a : rec.samples) im.pga = std::max(im.pga, std::abs(a));
    const auto v = integrate_trapezoid(rec.samples, rec.dt);
    for (double x : v) im.pgv = std::max(im.pgv, std::abs(x));
    im.pgv *= kGravityCmS2;
    im.ia = h.ia_total;
    if (h.ia_total > 0.0) im.d5_95 = h.time_at_fraction(0.95) - h.time_at_fraction(0.05);
    return im;
}

PairCovariance pair_covariance(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    PairCovariance c;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        c.sxx += dx * dx;
        c.syy += dy * dy;
        c.sxy += dx * dy;
    }
    return c;
}

RotationResult rotate_and_select(const AccelRecord& comp1, const AccelRecord& comp2) {
    comp1.validate();
    comp2.validate();
    if (comp1.size() != comp2.size()) throw ValidationError("rotate_and_select: mismatched lengths");
    if (std::abs(comp1.dt - comp2.dt) > 1e-12 * comp1.dt)
        throw ValidationError("rotate_and_select: mismatched dt");

    const PairCovariance c = pair_covariance(comp1.samples, comp2.samples);
    double theta = 0.5 * std::atan2(2.0 * c.sxy, c.sxx - c.syy);
    if (theta < 0.0) theta += 0.5 * std::numbers::pi;
    if (theta >= 0.5 * std::numbers::pi) theta -= 0.5 * std::numbers::pi;
    const double cs = std::cos(theta), sn = std::sin(theta);

    const std::size_t n = comp1.size();
    std::vector<double> xr(n), yr(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = comp1.samples[i], y = comp2.samples[i];
        xr[i] = x * cs + y * sn;
        yr[i] = -x * sn + y * cs;
    }
    double ex = 0.0, ey = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ex += xr[i] * xr[i];
        ey += yr[i] * yr[i];
    }
    RotationResult out;
    out.angle = theta;
    out.record.dt = comp1.dt;
    out.record.id = comp1.id;
    out.record.meta = comp1.meta;
    out.record.samples = ex >= ey ? std::move(xr) : std::move(yr);
    out.record.meta["rotation_deg"] = format_double(theta * 180.0 / std::numbers::pi);
    return out;
}

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

// Butterworth low-pass as cascaded bilinear-transform biquads.
std::vector<Biquad> butterworth_lowpass(int order, double cutoff_hz, double dt) {
    const double k = std::tan(std::numbers::pi * cutoff_hz * dt);
    std::vector<Biquad> sections;
    for (int j = 0; j < order / 2; ++j) {
        const double q = 1.0 / (2.0 * std::sin(std::numbers::pi * (2.0 * j + 1.0) / (2.0 * order)));
        const double norm = 1.0 / (1.0 + k / q + k * k);
        Biquad s;
        s.b0 = k * k * norm;
        s.b1 = 2.0 * s.b0;
        s.b2 = s.b0;
        s.a1 = 2.0 * (k * k - 1.0) * norm;
        s.a2 = (1.0 - k / q + k * k) * norm;
        sections.push_back(s);
    }
    return sections;
}

void apply_sections(const std::vector<Biquad>& sos, std::vector<double>& x) {
    for (const Biquad& s : sos) {
        // steady-state start for a constant input equal to the first sample
        double z1 = (1.0 - s.b0) * x.front();
        double z2 = (s.b2 - s.a2) * x.front();
        for (double& v : x) {
            const double in = v;
            const double y = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * y + z2;
            z2 = s.b2 * in - s.a2 * y;
            v = y;
        }
    }
}

std::vector<double> filtfilt(const std::vector<Biquad>& sos, const std::vector<double>& x) {
    const std::size_t n = x.size();
    const std::size_t pad = std::min<std::size_t>(n - 1, 27);
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);
    apply_sections(sos, ext);
    std::reverse(ext.begin(), ext.end());
    apply_sections(sos, ext);
    std::reverse(ext.begin(), ext.end());
    return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                               ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

}  // namespace

int decimation_factor(double dt) {
    const long k = std::lround((1.0 / dt) / 50.0);
    return static_cast<int>(std::max(1L, k));
}

AccelRecord decimate_to_50hz(const AccelRecord& rec) {
    rec.validate();
    const int k = decimation_factor(rec.dt);
    if (k == 1) return rec;
    const double new_dt = rec.dt * k;
    const double cutoff = 0.8 * 0.5 / new_dt;
    const auto filtered = filtfilt(butterworth_lowpass(8, cutoff, rec.dt), rec.samples);
    AccelRecord out;
    out.id = rec.id;
    out.meta = rec.meta;
    out.dt = new_dt;
    for (std::size_t i = 0; i < filtered.size(); i += static_cast<std::size_t>(k)) out.samples.push_back(filtered[i]);
    if (out.samples.size() < 2) throw DataError("record '" + rec.id + "' too short to decimate");
    return out;
}

AccelRecord truncate_energy(const AccelRecord& rec, double lo, double hi) {
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw ValidationError("truncate_energy: need 0 <= lo < hi <= 1");
    const HusidCurve h = husid(rec);
    if (!(h.ia_total > 0.0)) throw DataError("record '" + rec.id + "' has zero energy");
    const std::size_t n = rec.size();
    std::size_t i0 = 0, i1 = n - 1;
    if (lo > 0.0) {
        const double level = lo * h.ia_total;
        auto it = std::upper_bound(h.ia_cum.begin(), h.ia_cum.end(), level);
        i0 = static_cast<std::size_t>(it - h.ia_cum.begin());
        i0 = i0 == 0 ? 0 : i0 - 1;
    }
    if (hi < 1.0) {
        const double level = hi * h.ia_total;
        auto it = std::lower_bound(h.ia_cum.begin(), h.ia_cum.end(), level);
        i1 = std::min(n - 1, static_cast<std::size_t>(it - h.ia_cum.begin()));
    }
    if (i1 <= i0) i1 = std::min(n - 1, i0 + 1);
    AccelRecord out;
    out.id = rec.id;
    out.meta = rec.meta;
    out.dt = rec.dt;
    out.samples.assign(rec.samples.begin() + static_cast<std::ptrdiff_t>(i0),
                       rec.samples.begin() + static_cast<std::ptrdiff_t>(i1 + 1));
    return out;
}

// ---------------------------------------------------------------------------
// I/O

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

double parse_number(const std::string& s, std::size_t line) {
    const std::string t = trim(s);
    double v = 0.0;
    const char* first = t.data();
    if (!t.empty() && t[0] == '+') ++first;
    auto res = std::from_chars(first, t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw DataError("line " + std::to_string(line) + ": cannot parse number '" + t + "'");
    return v;
}

AccelRecord finish_with_times(AccelRecord r, const std::vector<double>& times, bool have_dt) {
    if (times.empty()) return r;
    if (times.size() != r.samples.size()) throw DataError("time and sample columns differ in length");
    if (times.size() < 2) throw DataError("record needs at least 2 samples");
    const double step = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double expect = times.front() + step * static_cast<double>(i);
        if (std::abs(times[i] - expect) > 1e-9) throw DataError("non-uniform time step in record '" + r.id + "'");
    }
    if (have_dt) {
        if (std::abs(step - r.dt) > 1e-9) throw DataError("dt header disagrees with the time column");
    } else {
        r.dt = step;
    }
    return r;
}

}  // namespace

AccelRecord record_from_csv(const std::string& text, const std::string& fallback_id) {
    AccelRecord r;
    r.id = fallback_id;
    bool have_dt = false;
    std::vector<double> times;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            std::string body = t.substr(1);
            std::stringstream parts(body);
            std::string kv;
            while (std::getline(parts, kv, ';')) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = trim(kv.substr(0, eq));
                const std::string val = trim(kv.substr(eq + 1));
                if (key == "id") {
                    r.id = val;
                } else if (key == "dt") {
                    r.dt = parse_number(val, lineno);
                    have_dt = true;
                } else if (!key.empty()) {
                    r.meta[key] = val;
                }
            }
            continue;
        }
        const auto comma = t.find(',');
        if (comma == std::string::npos) {
            if (!times.empty()) throw DataError("line " + std::to_string(lineno) + ": mixed column layout");
            r.samples.push_back(parse_number(t, lineno));
        } else {
            if (!r.samples.empty() && times.empty())
                throw DataError("line " + std::to_string(lineno) + ": mixed column layout");
            if (t.find(',', comma + 1) != std::string::npos)
                throw DataError("line " + std::to_string(lineno) + ": expected 't,a' or a single value");
            times.push_back(parse_number(t.substr(0, comma), lineno));
            r.samples.push_back(parse_number(t.substr(comma + 1), lineno));
        }
    }
    r = finish_with_times(std::move(r), times, have_dt);
    if (!have_dt && times.empty()) throw DataError("record '" + r.id + "': missing dt header");
    try {
        r.validate();
    } catch (const ValidationError& e) {
        throw DataError(e.what());
    }
    return r;
}

std::string record_to_csv(const AccelRecord& rec) {
    std::string out;
    out.reserve(rec.samples.size() * 24 + 64);
    out += "# id=" + rec.id + "\n";
    out += "# dt=" + format_double(rec.dt) + "\n";
    for (const auto& [k, v] : rec.meta) out += "# " + k + "=" + v + "\n";
    for (double v : rec.samples) {
        out += format_double(v);
        out += '\n';
    }
    return out;
}

}  // namespace gmsynth
