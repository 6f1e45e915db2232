#include "gmsynth/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gmsynth/error.hpp"

namespace gmsynth {

std::string to_string(FilterKind k) {
    switch (k) {
        case FilterKind::SecondOrder: return "SecondOrder";
        case FilterKind::KanaiTajimi: return "KanaiTajimi";
        case FilterKind::Convex: return "Convex";
        case FilterKind::Cascade: return "Cascade";
    }
    return "?";
}

FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "SecondOrder") return FilterKind::SecondOrder;
    if (s == "KanaiTajimi") return FilterKind::KanaiTajimi;
    if (s == "Convex") return FilterKind::Convex;
    if (s == "Cascade") return FilterKind::Cascade;
    throw DataError("unknown filter kind '" + s + "'");
}

int FilterSpec::modes() const {
    return (kind == FilterKind::Convex || kind == FilterKind::Cascade) ? J : 1;
}

FilterKind FilterSpec::mode_kind() const {
    switch (kind) {
        case FilterKind::Convex: return base;
        case FilterKind::Cascade: return FilterKind::SecondOrder;
        default: return kind;
    }
}

int FilterSpec::n_scalars() const { return 2 * modes() + (has_weights() ? J - 1 : 0); }

std::vector<std::string> FilterSpec::scalar_names() const {
    std::vector<std::string> names;
    const int m = modes();
    for (int j = 0; j < m; ++j) {
        const std::string suffix = m == 1 ? "" : std::to_string(j + 1);
        names.push_back("omega" + suffix);
        names.push_back("zeta" + suffix);
    }
    if (has_weights()) {
        for (int j = 0; j + 1 < J; ++j) names.push_back(J == 2 ? "pi" : "pi" + std::to_string(j + 1));
    }
    return names;
}

void FilterSpec::validate() const {
    if (J < 1) throw ValidationError("filter needs J >= 1");
    if (kind == FilterKind::Convex && base != FilterKind::SecondOrder && base != FilterKind::KanaiTajimi)
        throw ValidationError("convex filter base must be SecondOrder or KanaiTajimi");
}

FilterParams params_from_scalars(const FilterSpec& spec, const double* s) {
    FilterParams p;
    const int m = spec.modes();
    for (int j = 0; j < m; ++j) {
        p.omega.push_back(s[2 * j]);
        p.zeta.push_back(s[2 * j + 1]);
    }
    if (spec.has_weights()) {
        double rest = 1.0;
        for (int j = 0; j + 1 < spec.J; ++j) {
            p.weights.push_back(s[2 * m + j]);
            rest -= s[2 * m + j];
        }
        p.weights.push_back(rest);
    }
    return p;
}

void params_to_scalars(const FilterSpec& spec, const FilterParams& p, double* out) {
    const int m = spec.modes();
    for (int j = 0; j < m; ++j) {
        out[2 * j] = p.omega[j];
        out[2 * j + 1] = p.zeta[j];
    }
    if (spec.has_weights())
        for (int j = 0; j + 1 < spec.J; ++j) out[2 * m + j] = p.weights[j];
}

double second_order_shape(double omega, double omega_g, double zeta_g) {
    const double w2 = omega_g * omega_g, x2 = omega * omega;
    const double d = w2 - x2;
    return w2 * w2 / (d * d + 4.0 * zeta_g * zeta_g * w2 * x2);
}

double kanai_tajimi_shape(double omega, double omega_g, double zeta_g) {
    const double w2 = omega_g * omega_g, x2 = omega * omega;
    const double d = w2 - x2;
    const double c = 4.0 * zeta_g * zeta_g * w2 * x2;
    return (w2 * w2 + c) / (d * d + c);
}

void check_params(const FilterSpec& spec, const FilterParams& p) {
    const auto m = static_cast<std::size_t>(spec.modes());
    if (p.omega.size() != m || p.zeta.size() != m) throw ValidationError("filter parameter count mismatch");
    for (std::size_t j = 0; j < m; ++j) {
        if (!(p.omega[j] > 0.0) || !std::isfinite(p.omega[j])) throw ValidationError("omega_g must be > 0");
        if (!(p.zeta[j] > 0.0) || !std::isfinite(p.zeta[j])) throw ValidationError("zeta_g must be > 0");
    }
    if (spec.has_weights()) {
        if (p.weights.size() != static_cast<std::size_t>(spec.J)) throw ValidationError("weight count mismatch");
        double s = 0.0;
        for (double w : p.weights) {
            if (!(w >= 0.0)) throw ValidationError("filter weights must be >= 0");
            s += w;
        }
        if (!(s > 0.0)) throw ValidationError("filter weights sum to zero");
    }
}

namespace {

void mode_shape(FilterKind kind, double omega_g, double zeta_g, const FreqGrid& grid, double* out) {
    const double w2 = omega_g * omega_g, w4 = w2 * w2, c = 4.0 * zeta_g * zeta_g * w2;
    if (kind == FilterKind::KanaiTajimi) {
        for (std::size_t k = 0; k < grid.n; ++k) {
            const double x = grid.omega(k), x2 = x * x, d = w2 - x2;
            out[k] = (w4 + c * x2) / (d * d + c * x2);
        }
    } else {
        for (std::size_t k = 0; k < grid.n; ++k) {
            const double x = grid.omega(k), x2 = x * x, d = w2 - x2;
            out[k] = w4 / (d * d + c * x2);
        }
    }
}

void normalize(double* out, const FreqGrid& grid) {
    double s = 0.0;
    for (std::size_t k = 0; k < grid.n; ++k) s += out[k];
    s *= grid.d_omega;
    const double inv = 1.0 / s;
    for (std::size_t k = 0; k < grid.n; ++k) out[k] *= inv;
}

}  // namespace

void eval_filter_shape(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid, double* out) {
    const int m = spec.modes();
    if (spec.kind == FilterKind::Convex && m > 1) {
        std::vector<double> tmp(grid.n);
        std::fill(out, out + grid.n, 0.0);
        for (int j = 0; j < m; ++j) {
            if (p.weights[j] == 0.0) continue;
            mode_shape(spec.base, p.omega[j], p.zeta[j], grid, tmp.data());
            normalize(tmp.data(), grid);
            for (std::size_t k = 0; k < grid.n; ++k) out[k] += p.weights[j] * tmp[k];
        }
    } else if (spec.kind == FilterKind::Cascade && m > 1) {
        std::vector<double> tmp(grid.n);
        mode_shape(FilterKind::SecondOrder, p.omega[0], p.zeta[0], grid, out);
        for (int j = 1; j < m; ++j) {
            mode_shape(FilterKind::SecondOrder, p.omega[j], p.zeta[j], grid, tmp.data());
            for (std::size_t k = 0; k < grid.n; ++k) out[k] *= tmp[k];
        }
    } else {
        mode_shape(spec.mode_kind(), p.omega[0], p.zeta[0], grid, out);
    }
}

void eval_filter_into(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid, double* out) {
    check_params(spec, p);
    if (grid.n == 0 || !(grid.d_omega > 0.0)) throw ValidationError("empty frequency grid");
    eval_filter_shape(spec, p, grid, out);
    normalize(out, grid);
}

std::vector<double> eval_filter(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid) {
    std::vector<double> out(grid.n);
    eval_filter_into(spec, p, grid, out.data());
    return out;
}

FilterParams project_params(const FilterSpec& spec, FilterParams p) {
    const double omega_max = 2.0 * std::numbers::pi * kOmegaUpperHz;
    for (auto& w : p.omega) w = std::isfinite(w) ? std::clamp(w, kOmegaMin, omega_max) : kOmegaMin;
    for (auto& z : p.zeta) z = std::isfinite(z) ? std::clamp(z, kZetaMin, kZetaMax) : kZetaMax;
    if (spec.has_weights()) {
        double s = 0.0;
        for (auto& w : p.weights) {
            w = std::isfinite(w) ? std::clamp(w, kWeightMin, kWeightMax) : 0.5;
            s += w;
        }
        for (auto& w : p.weights) w /= s;
    }
    return p;
}

// ---------------------------------------------------------------------------
// trends

std::string to_string(TrendKind k) {
    switch (k) {
        case TrendKind::Constant: return "Constant";
        case TrendKind::Linear: return "Linear";
        case TrendKind::Polyline: return "Polyline";
    }
    return "?";
}

TrendKind trend_kind_from_string(const std::string& s) {
    if (s == "Constant") return TrendKind::Constant;
    if (s == "Linear") return TrendKind::Linear;
    if (s == "Polyline") return TrendKind::Polyline;
    throw DataError("unknown trend kind '" + s + "'");
}

int trend_param_count(TrendKind k) {
    switch (k) {
        case TrendKind::Constant: return 1;
        case TrendKind::Linear: return 2;
        case TrendKind::Polyline: return 5;
    }
    return 0;
}

int TrendSpec::n_params() const {
    int n = 0;
    for (auto k : kinds) n += trend_param_count(k);
    return n;
}

std::vector<std::string> SpectralModel::theta_names() const {
    std::vector<std::string> out;
    const auto scalars = filter.scalar_names();
    for (std::size_t s = 0; s < scalars.size() && s < trends.kinds.size(); ++s) {
        switch (trends.kinds[s]) {
            case TrendKind::Constant: out.push_back(scalars[s] + "_mid"); break;
            case TrendKind::Linear:
                out.push_back(scalars[s] + "_mid");
                out.push_back(scalars[s] + "_slope");
                break;
            case TrendKind::Polyline:
                for (const char* p : {"_t5", "_t30", "_t45", "_t75", "_t95"}) out.push_back(scalars[s] + p);
                break;
        }
    }
    return out;
}

void SpectralModel::validate() const {
    filter.validate();
    if (static_cast<int>(trends.kinds.size()) != filter.n_scalars())
        throw ValidationError("trend count does not match the filter's scalar parameters");
    if (static_cast<int>(theta_f.size()) != trends.n_params())
        throw ValidationError("theta_f size does not match the trend kinds");
    for (double v : theta_f)
        if (!std::isfinite(v)) throw ValidationError("non-finite trend parameter");
    if (!(fc >= 0.0) || !std::isfinite(fc)) throw ValidationError("fc must be >= 0");
}

SpectralModel model_config(int id) {
    using TK = TrendKind;
    SpectralModel m;
    m.config_id = id;
    switch (id) {
        case 1:
            m.trends.kinds = {TK::Linear, TK::Constant};
            break;
        case 2:
            m.trends.kinds = {TK::Linear, TK::Linear};
            break;
        case 3:
            m.trends.kinds = {TK::Polyline, TK::Polyline};
            break;
        case 4:
            m.filter.kind = FilterKind::KanaiTajimi;
            m.trends.kinds = {TK::Linear, TK::Constant};
            break;
        case 5:
            m.filter = {FilterKind::Convex, 2, FilterKind::SecondOrder};
            m.trends.kinds.assign(5, TK::Linear);
            break;
        case 6:
            m.filter = {FilterKind::Convex, 2, FilterKind::SecondOrder};
            m.trends.kinds.assign(5, TK::Polyline);
            break;
        case 7:
            m.filter = {FilterKind::Cascade, 2, FilterKind::SecondOrder};
            m.trends.kinds.assign(4, TK::Linear);
            break;
        case 8:
            m.filter = {FilterKind::Cascade, 2, FilterKind::SecondOrder};
            m.trends.kinds.assign(4, TK::Polyline);
            break;
        default: throw ValidationError("model configuration id must be 1..8");
    }
    return m;
}

int total_param_count(const SpectralModel& m) { return 7 + m.trends.n_params() + 1; }

TrendEvaluator::TrendEvaluator(const SpectralModel& m, const std::array<double, 7>& knots)
    : model_(m), knots_(knots) {
    model_.validate();
    for (int i = 0; i < 6; ++i)
        if (!(knots_[i + 1] > knots_[i])) throw ValidationError("trend knot times must be strictly increasing");
    std::size_t off = 0;
    for (auto k : model_.trends.kinds) {
        offset_.push_back(off);
        off += static_cast<std::size_t>(trend_param_count(k));
    }
}

double TrendEvaluator::polyline_primitive(std::size_t scalar, double x) const {
    const double* v = model_.theta_f.data() + offset_[scalar];
    const double* T = knots_.data() + 1;  // t5 .. t95
    if (x <= T[0]) return v[0] * (x - T[0]);
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        if (x <= T[i + 1]) {
            const double h = T[i + 1] - T[i];
            const double vx = v[i] + (v[i + 1] - v[i]) * (x - T[i]) / h;
            return acc + 0.5 * (x - T[i]) * (v[i] + vx);
        }
        acc += 0.5 * (T[i + 1] - T[i]) * (v[i] + v[i + 1]);
    }
    return acc + v[4] * (x - T[4]);
}

void TrendEvaluator::scalars_at(double t, double* out) const {
    const double tf = knots_[6];
    const double tol = 1e-9 * std::max(1.0, tf);
    if (!(t >= -tol && t <= tf + tol)) throw ValidationError("trend evaluated outside [0, t_f]");
    const double t5 = knots_[1], tmid = knots_[3], t95 = knots_[5];
    for (std::size_t s = 0; s < offset_.size(); ++s) {
        const double* v = model_.theta_f.data() + offset_[s];
        switch (model_.trends.kinds[s]) {
            case TrendKind::Constant: out[s] = v[0]; break;
            case TrendKind::Linear: out[s] = v[0] + v[1] * (std::clamp(t, t5, t95) - tmid); break;
            case TrendKind::Polyline: {
                const double a = std::max(0.0, t - 0.5 * kPolylineWindow);
                const double b = std::min(tf, t + 0.5 * kPolylineWindow);
                out[s] = (polyline_primitive(s, b) - polyline_primitive(s, a)) / (b - a);
                break;
            }
        }
    }
}

FilterParams TrendEvaluator::at(double t) const {
    std::vector<double> s(offset_.size());
    scalars_at(t, s.data());
    return project_params(model_.filter, params_from_scalars(model_.filter, s.data()));
}

FilterParams eval_trend(const SpectralModel& m, double t, const std::array<double, 7>& knots) {
    return TrendEvaluator(m, knots).at(t);
}

}  // namespace gmsynth
