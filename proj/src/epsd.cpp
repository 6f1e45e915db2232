#include "gmsynth/epsd.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "gmsynth/error.hpp"
#include "gmsynth/optimize.hpp"
#include "gmsynth/parallel.hpp"

namespace gmsynth {

double EpsdGrid::slice_mass(std::size_t n) const {
    double s = 0.0;
    const double* r = row(n);
    for (std::size_t k = 0; k < freq.n; ++k) s += r[k];
    return s * freq.d_omega;
}

Eigen::MatrixXd dpss(int length, double nw, int n_tapers) {
    if (length < 2 || n_tapers < 1 || n_tapers > length) throw ValidationError("dpss: bad length or taper count");
    const double w = nw / static_cast<double>(length);
    const double c = std::cos(2.0 * std::numbers::pi * w);
    Eigen::VectorXd diag(length), sub(length - 1);
    for (int i = 0; i < length; ++i) {
        const double h = 0.5 * (length - 1 - 2.0 * i);
        diag(i) = h * h * c;
    }
    for (int i = 1; i < length; ++i) sub(i - 1) = 0.5 * i * (length - i);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    Eigen::MatrixXd out(length, n_tapers);
    for (int k = 0; k < n_tapers; ++k) {
        Eigen::VectorXd v = es.eigenvectors().col(length - 1 - k);
        v /= v.norm();
        // even tapers: positive mean; odd tapers: positive first lobe
        const double s = (k % 2 == 0) ? v.sum() : v.head(length / 2).sum();
        if (s < 0) v = -v;
        out.col(k) = v;
    }
    return out;
}

int sttmw_window_length(double window_s, double dt) {
    return 2 * static_cast<int>(std::lround(window_s / (2.0 * dt))) + 1;
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

EpsdGrid sttmw(const AccelRecord& rec, const SttmwOptions& opt) {
    rec.validate();
    const double dt = rec.dt;
    const int L = sttmw_window_length(opt.window_s, dt);
    const std::size_t N = rec.size();
    if (static_cast<std::size_t>(L) > N) throw ValidationError("sttmw: record shorter than the window");
    const Eigen::MatrixXd tapers = dpss(L, opt.nw, opt.n_tapers);
    const std::size_t nfft = next_pow2(static_cast<std::size_t>(L));
    const std::size_t half = nfft / 2;
    const double df = 1.0 / (static_cast<double>(nfft) * dt);
    const std::size_t kmax = std::min(half, static_cast<std::size_t>(std::floor(opt.f_max_hz / df + 1e-9)));
    const std::size_t nk = kmax + 1;
    const std::size_t hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(opt.hop_s / dt)));
    const int M = (L - 1) / 2;

    EpsdGrid e;
    e.freq = {2.0 * std::numbers::pi * df, nk};
    e.dt_grid = dt * static_cast<double>(hop);
    e.sample_dt = dt;
    e.taper_acf.assign(static_cast<std::size_t>(L), 0.0);
    for (int m = 0; m < opt.n_tapers; ++m)
        for (int lag = 0; lag < L; ++lag)
            for (int j = 0; j + lag < L; ++j) e.taper_acf[lag] += tapers(j, m) * tapers(j + lag, m);
    for (double& c : e.taper_acf) c /= opt.n_tapers;
    for (std::size_t c = 0; c < N; c += hop) e.times.push_back(dt * static_cast<double>(c));
    const std::size_t nt = e.times.size();
    e.values.assign(nt * nk, 0.0);
    e.flagged.assign(nt, 0);

    double* in = fftw_alloc_real(nfft);
    fftw_complex* out = fftw_alloc_complex(half + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);
    }
    const double scale = dt / std::numbers::pi / static_cast<double>(opt.n_tapers);
    for (std::size_t n = 0; n < nt; ++n) {
        const long c = static_cast<long>(n * hop);
        double* row = e.values.data() + n * nk;
        for (int m = 0; m < opt.n_tapers; ++m) {
            std::fill(in, in + nfft, 0.0);
            for (int j = 0; j < L; ++j) {
                const long i = c - M + j;
                if (i >= 0 && i < static_cast<long>(N)) in[j] = rec.samples[static_cast<std::size_t>(i)] * tapers(j, m);
            }
            fftw_execute_dft_r2c(plan, in, out);
            for (std::size_t k = 0; k < nk; ++k) row[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
        }
        for (std::size_t k = 0; k < nk; ++k) row[k] *= scale;
        row[0] *= 0.5;
        if (kmax == half) row[kmax] *= 0.5;
    }
    {
        std::lock_guard<std::mutex> lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return e;
}

EpsdGrid normalize_epsd(const EpsdGrid& e) {
    EpsdGrid out = e;
    out.flagged.assign(e.n_times(), 0);
    for (std::size_t n = 0; n < e.n_times(); ++n) {
        const double m = e.slice_mass(n);
        double* r = out.values.data() + n * e.freq.n;
        if (!(m > 0.0) || !std::isfinite(m)) {
            out.flagged[n] = 1;
            std::fill(r, r + e.freq.n, 0.0);
            continue;
        }
        const double inv = 1.0 / m;
        for (std::size_t k = 0; k < e.freq.n; ++k) r[k] *= inv;
    }
    return out;
}

EpsdGrid smooth_time(const EpsdGrid& e, double window_s, bool renormalize) {
    const std::size_t nt = e.n_times(), nk = e.freq.n;
    if (nt == 0) return e;
    const double step = e.dt_grid > 0.0 ? e.dt_grid : (nt > 1 ? e.times[1] - e.times[0] : 1.0);
    const int half = static_cast<int>(std::lround(window_s / (2.0 * step)));
    const int M = 2 * half + 1;
    std::vector<double> w(M);
    for (int m = 0; m < M; ++m) {
        const double s = std::sin(std::numbers::pi * (m + 1) / (M + 1));
        w[m] = s * s;
    }
    EpsdGrid out = e;
    for (std::size_t n = 0; n < nt; ++n) {
        double* r = out.values.data() + n * nk;
        std::fill(r, r + nk, 0.0);
        double wsum = 0.0;
        for (int m = 0; m < M; ++m) {
            const long src = static_cast<long>(n) + m - half;
            if (src < 0 || src >= static_cast<long>(nt)) continue;
            wsum += w[m];
            const double* s = e.row(static_cast<std::size_t>(src));
            for (std::size_t k = 0; k < nk; ++k) r[k] += w[m] * s[k];
        }
        const double inv = 1.0 / wsum;
        for (std::size_t k = 0; k < nk; ++k) r[k] *= inv;
    }
    if (renormalize) return normalize_epsd(out);
    return out;
}

// ---------------------------------------------------------------------------
// snapshot fitting

void SpectralWindowMap::apply(const double* fine_values, double* out) const {
    for (std::size_t k = 0; k < first.size(); ++k) {
        const double* v = fine_values + first[k];
        const auto& w = weights[k];
        double s = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * v[i];
        out[k] = s;
    }
}

SpectralWindowMap spectral_window_map(const EpsdGrid& e, int oversample, double tail) {
    SpectralWindowMap map;
    if (e.taper_acf.empty() || !(e.sample_dt > 0.0) || e.freq.n < 2) return map;
    if (oversample < 1) throw ValidationError("spectral_window_map: oversample must be >= 1");
    const auto os = static_cast<std::size_t>(oversample);
    const double dt = e.sample_dt;
    map.bins = e.freq;
    map.fine = {e.freq.d_omega / static_cast<double>(os), os * (e.freq.n - 1) + 1};

    // mean spectral window W(w) = sum over lags of acf(|lag|) cos(w lag dt), tabulated at fine spacing
    const std::size_t nw = 2 * map.fine.n;
    std::vector<double> W(nw, 0.0);
    for (std::size_t m = 0; m < nw; ++m) {
        const double w = static_cast<double>(m) * map.fine.d_omega * dt;
        double s = e.taper_acf[0];
        for (std::size_t lag = 1; lag < e.taper_acf.size(); ++lag)
            s += 2.0 * e.taper_acf[lag] * std::cos(w * static_cast<double>(lag));
        W[m] = std::max(0.0, s);
    }
    // the one-sided shape enters at +w and -w; trapezoid weights on the fine grid
    const std::size_t nf = map.fine.n;
    std::vector<double> row(nf);
    map.first.resize(e.freq.n);
    map.weights.resize(e.freq.n);
    for (std::size_t k = 0; k < e.freq.n; ++k) {
        const std::size_t c = os * k;
        double total = 0.0;
        for (std::size_t j = 0; j < nf; ++j) {
            const std::size_t dm = c > j ? c - j : j - c;
            const double q = (j == 0 || j + 1 == nf) ? 0.5 : 1.0;
            row[j] = 0.5 * (W[dm] + W[c + j]) * q;
            total += row[j];
        }
        // sttmw halves the zero and Nyquist bins
        const bool nyquist = std::abs(e.freq.omega(k) * dt - std::numbers::pi) < 1e-9;
        const double scale = (k == 0 || nyquist) ? 0.5 : 1.0;
        // drop the far sidelobes; each side may shed at most `tail` of the window mass
        const double tol = tail * total;
        std::size_t lo = 0, hi = nf;
        for (double cut = 0.0; lo + 1 < hi && cut + row[lo] <= tol; ++lo) cut += row[lo];
        for (double cut = 0.0; hi - 1 > lo && cut + row[hi - 1] <= tol; --hi) cut += row[hi - 1];
        map.first[k] = lo;
        map.weights[k].assign(row.begin() + static_cast<long>(lo), row.begin() + static_cast<long>(hi));
        for (double& w : map.weights[k]) w *= scale;
    }
    return map;
}

namespace {

double projected_residual(const double* f, const double* g, std::size_t n) {
    double sff = 0.0, sfg = 0.0, sgg = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sff += f[k] * f[k];
        sfg += f[k] * g[k];
        sgg += g[k] * g[k];
    }
    if (!(sff > 0.0) || !std::isfinite(sff)) return sgg;
    return std::max(0.0, sgg - sfg * sfg / sff);
}

}  // namespace

double snapshot_residual(const FilterSpec& spec, const FilterParams& p, const FreqGrid& grid, const double* g) {
    thread_local std::vector<double> f;
    f.resize(grid.n);
    eval_filter_shape(spec, p, grid, f.data());
    return projected_residual(f.data(), g, grid.n);
}

double snapshot_residual(const FilterSpec& spec, const FilterParams& p, const SpectralWindowMap& window,
                         const double* g) {
    thread_local std::vector<double> fine, f;
    fine.resize(window.fine.n);
    f.resize(window.bins.n);
    eval_filter_shape(spec, p, window.fine, fine.data());
    window.apply(fine.data(), f.data());
    return projected_residual(f.data(), g, window.bins.n);
}

namespace {

struct SliceProblem {
    const FilterSpec& spec;
    const FreqGrid& grid;
    const double* g;
    const SpectralWindowMap* window;

    // variables: (ln omega, zeta) per mode, then free weights
    FilterParams decode(const std::vector<double>& x) const {
        std::vector<double> s(x.size());
        const int m = spec.modes();
        for (int j = 0; j < m; ++j) {
            s[2 * j] = std::exp(std::clamp(x[2 * j], -10.0, 10.0));
            s[2 * j + 1] = x[2 * j + 1];
        }
        for (std::size_t i = 2 * m; i < x.size(); ++i) s[i] = x[i];
        return project_params(spec, params_from_scalars(spec, s.data()));
    }
    double operator()(const std::vector<double>& x) const {
        return window ? snapshot_residual(spec, decode(x), *window, g) : snapshot_residual(spec, decode(x), grid, g);
    }
};

std::vector<double> local_maxima_omegas(const double* g, const FreqGrid& grid) {
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t k = 1; k + 1 < grid.n; ++k)
        if (g[k] > g[k - 1] && g[k] >= g[k + 1]) peaks.emplace_back(g[k], k);
    std::stable_sort(peaks.begin(), peaks.end(), [](auto& a, auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<double> out;
    for (std::size_t i = 0; i < peaks.size() && i < 2; ++i) out.push_back(grid.omega(peaks[i].second));
    return out;
}

}  // namespace

FilterSnapshot fit_filter_slice(const double* g, const FreqGrid& grid, const FilterSpec& spec,
                                const SnapshotOptions& opt, const SpectralWindowMap* window) {
    if (window && window->empty()) window = nullptr;
    if (window && window->bins.n != grid.n) throw ValidationError("fit_filter_slice: window map does not match grid");
    SliceProblem prob{spec, grid, g, nullptr};
    const int m = spec.modes();
    double sg = 0.0, sgw = 0.0, sgg = 0.0;
    for (std::size_t k = 0; k < grid.n; ++k) {
        sg += g[k];
        sgw += g[k] * grid.omega(k);
        sgg += g[k] * g[k];
    }
    const double centroid = sg > 0.0 ? std::max(kOmegaMin, sgw / sg) : 2.0 * std::numbers::pi * 5.0;

    std::vector<double> base_omegas;
    if (m == 1) {
        base_omegas = {centroid};
    } else {
        base_omegas = local_maxima_omegas(g, grid);
        if (base_omegas.empty()) base_omegas.push_back(centroid);
        while (static_cast<int>(base_omegas.size()) < m) base_omegas.push_back(2.0 * base_omegas.back());
        std::sort(base_omegas.begin(), base_omegas.end());
    }

    NelderMeadOptions nmo;
    nmo.max_iter = opt.max_iter;
    nmo.ftol_rel = 1e-10;
    nmo.ftol_abs = 1e-14 * sgg;
    nmo.xtol = 1e-7;

    NelderMeadResult best;
    best.fx = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (double mult : opt.omega_multipliers) {
        std::vector<double> x0, step;
        for (int j = 0; j < m; ++j) {
            x0.push_back(std::log(std::max(kOmegaMin, mult * base_omegas[j])));
            x0.push_back(opt.zeta_init);
            step.push_back(0.2);
            step.push_back(0.1);
        }
        if (spec.has_weights())
            for (int j = 0; j + 1 < spec.J; ++j) {
                x0.push_back(1.0 / spec.J);
                step.push_back(0.1);
            }
        NelderMeadResult r = nelder_mead(prob, x0, step, nmo);
        any_converged = any_converged || r.converged;
        if (r.fx < best.fx) best = r;
    }
    if (window) {
        // the bare-shape optimum is close; one refinement against the expected estimate suffices
        prob.window = window;
        std::vector<double> step;
        for (int j = 0; j < m; ++j) {
            step.push_back(0.05);
            step.push_back(0.03);
        }
        while (step.size() < best.x.size()) step.push_back(0.03);
        best = nelder_mead(prob, best.x, step, nmo);
        any_converged = any_converged || best.converged;
    }
    FilterSnapshot snap;
    snap.params = prob.decode(best.x);
    snap.residual = best.fx;
    snap.converged = any_converged;
    if (m > 1) {
        std::vector<int> idx(m);
        for (int j = 0; j < m; ++j) idx[j] = j;
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return snap.params.omega[a] < snap.params.omega[b]; });
        FilterParams sorted = snap.params;
        for (int j = 0; j < m; ++j) {
            sorted.omega[j] = snap.params.omega[idx[j]];
            sorted.zeta[j] = snap.params.zeta[idx[j]];
            if (!snap.params.weights.empty()) sorted.weights[j] = snap.params.weights[idx[j]];
        }
        snap.params = sorted;
    }
    return snap;
}

FilterSnapshotSeries fit_filter_snapshots(const EpsdGrid& phi_hat, const FilterSpec& spec, const SnapshotOptions& opt) {
    spec.validate();
    FilterSnapshotSeries series;
    series.spec = spec;
    const std::size_t nt = phi_hat.n_times();
    series.slices.resize(nt);
    const SpectralWindowMap window = opt.window_correction ? spectral_window_map(phi_hat) : SpectralWindowMap{};
    parallel_for(nt, [&](std::size_t n) {
        const bool flagged = !phi_hat.flagged.empty() && phi_hat.flagged[n];
        if (flagged) {
            series.slices[n].converged = false;
            series.slices[n].residual = std::numeric_limits<double>::quiet_NaN();
        } else {
            series.slices[n] = fit_filter_slice(phi_hat.row(n), phi_hat.freq, spec, opt, &window);
        }
        series.slices[n].t = phi_hat.times[n];
    });
    // carry the previous usable solution into flagged or failed slices
    const FilterSnapshot* prev = nullptr;
    for (auto& s : series.slices) {
        if (s.params.omega.empty() || !s.converged) {
            if (prev) s.params = prev->params;
        }
        if (!s.params.omega.empty() && s.converged) prev = &s;
    }
    // leading slices without a predecessor take the first usable one
    const FilterSnapshot* first = nullptr;
    for (auto& s : series.slices)
        if (!s.params.omega.empty() && s.converged) {
            first = &s;
            break;
        }
    if (!first) throw ConvergenceError("fit_filter_snapshots: no slice could be fitted");
    for (auto& s : series.slices) {
        if (&s == first) break;
        if (!s.converged) s.params = first->params;
    }
    return series;
}

// ---------------------------------------------------------------------------
// trends

std::array<double, 2> weighted_line_fit(const std::vector<double>& t, const std::vector<double>& y,
                                        const std::vector<double>& w, double t_mid) {
    double s0 = 0, s1 = 0, s2 = 0, b0 = 0, b1 = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double x = t[i] - t_mid;
        s0 += w[i];
        s1 += w[i] * x;
        s2 += w[i] * x * x;
        b0 += w[i] * y[i];
        b1 += w[i] * x * y[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (!(std::abs(det) > 0.0)) throw DataError("weighted line fit is singular");
    return {(s2 * b0 - s1 * b1) / det, (s0 * b1 - s1 * b0) / det};
}

namespace {

double interp_at(const std::vector<double>& t, const std::vector<double>& y, double x) {
    if (x <= t.front()) return y.front();
    if (x >= t.back()) return y.back();
    const auto it = std::upper_bound(t.begin(), t.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - t.begin());
    const double f = (x - t[i - 1]) / (t[i] - t[i - 1]);
    return y[i - 1] + f * (y[i] - y[i - 1]);
}

}  // namespace

std::string to_string(ConstantTrendRule r) { return r == ConstantTrendRule::AtMid ? "t_mid" : "weighted_mean"; }

ConstantTrendRule constant_trend_rule_from_string(const std::string& s) {
    if (s == "weighted_mean") return ConstantTrendRule::WeightedMean;
    if (s == "t_mid") return ConstantTrendRule::AtMid;
    throw ValidationError("unknown constant trend rule '" + s + "'");
}

std::vector<double> fit_trends(const FilterSnapshotSeries& series, const TrendSpec& trends, const EnvelopeParams& env,
                               ConstantTrendRule constant_rule) {
    const FilterSpec& spec = series.spec;
    const int ns = spec.n_scalars();
    if (static_cast<int>(trends.kinds.size()) != ns) throw ValidationError("fit_trends: trend count mismatch");
    const EnvelopeSpline spline(env);
    const auto knots = env.knot_times();
    const double t5 = knots[1], tmid = knots[3], t95 = knots[5];
    const double denom = spline.husid(t95) - spline.husid(t5);

    std::vector<double> times;
    std::vector<std::vector<double>> values(static_cast<std::size_t>(ns));
    std::vector<double> scal(static_cast<std::size_t>(ns));
    for (const auto& s : series.slices) {
        if (s.params.omega.empty()) continue;
        times.push_back(s.t);
        params_to_scalars(spec, s.params, scal.data());
        for (int i = 0; i < ns; ++i) values[i].push_back(scal[i]);
    }
    if (times.empty()) throw DataError("fit_trends: empty snapshot series");

    std::vector<double> tw, ww;
    std::vector<std::size_t> in_idx;
    for (std::size_t n = 0; n < times.size(); ++n) {
        if (times[n] >= t5 && times[n] <= t95 && times[n] <= spline.t_final()) {
            in_idx.push_back(n);
            tw.push_back(times[n]);
            ww.push_back(spline.q(times[n]) / denom);
        }
    }

    std::vector<double> theta;
    for (int i = 0; i < ns; ++i) {
        switch (trends.kinds[i]) {
            case TrendKind::Constant: {
                // a single slice is noisy; the weighted mean is the least-squares constant under the same weights
                if (constant_rule == ConstantTrendRule::AtMid || in_idx.empty()) {
                    theta.push_back(interp_at(times, values[i], tmid));
                    break;
                }
                double sw = 0, sy = 0;
                for (std::size_t k = 0; k < in_idx.size(); ++k) {
                    sw += ww[k];
                    sy += ww[k] * values[i][in_idx[k]];
                }
                theta.push_back(sw > 0 ? sy / sw : interp_at(times, values[i], tmid));
                break;
            }
            case TrendKind::Linear: {
                if (in_idx.size() < 2) throw DataError("fit_trends: fewer than 2 slices inside [t5, t95]");
                std::vector<double> y;
                for (auto n : in_idx) y.push_back(values[i][n]);
                const auto ab = weighted_line_fit(tw, y, ww, tmid);
                theta.push_back(ab[0]);
                theta.push_back(ab[1]);
                break;
            }
            case TrendKind::Polyline:
                for (int k = 1; k <= 5; ++k) theta.push_back(interp_at(times, values[i], knots[k]));
                break;
        }
    }
    return theta;
}

}  // namespace gmsynth
