#include "gmsynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gmsynth/error.hpp"
#include "gmsynth/parallel.hpp"
#include "gmsynth/response.hpp"
#include "gmsynth/rng.hpp"

namespace gmsynth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kRowChunk = 64;
constexpr std::size_t kLaneBlock = 256;

double trapz_weight(std::size_t i, std::size_t n, double dt) { return (i == 0 || i + 1 == n) ? 0.5 * dt : dt; }

bool all_constant(const TrendSpec& t) {
    return std::all_of(t.kinds.begin(), t.kinds.end(), [](TrendKind k) { return k == TrendKind::Constant; });
}

}  // namespace

SimGrid SimGrid::make(double t_f, double dt, double omega_upper_hz) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("simulation dt must be > 0");
    if (!(t_f > 0.0) || !std::isfinite(t_f)) throw ValidationError("simulation duration must be > 0");
    if (!(omega_upper_hz > 0.0)) throw ValidationError("upper cutoff frequency must be > 0");
    SimGrid g;
    g.dt = dt;
    g.t_f = t_f;
    g.K = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(t_f / dt - 1e-9)));
    g.omega_upper_hz = omega_upper_hz;
    g.d_omega = 2.0 * kPi * omega_upper_hz / static_cast<double>(g.K - 1);
    return g;
}

NoiseVector make_noise(const SimGrid& grid, std::uint64_t key) { return {standard_normals(key, 2 * grid.K), key}; }

Simulator::Simulator(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid)
    : env_(env), model_(model), grid_(grid) {
    env_.validate();
    model_.validate();
    if (grid_.K < 2) throw ValidationError("simulation grid needs K >= 2");
    if (!(model_.fc >= 0.0)) throw ValidationError("corner frequency must be >= 0");

    const EnvelopeSpline spline(env_);
    const std::size_t n = grid_.n_time();
    const double tf = spline.t_final();
    q_.assign(n, 0.0);
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * grid_.dt;
        if (t <= tf) q_[i] = spline.q(t);
        energy += trapz_weight(i, n, grid_.dt) * q_[i] * q_[i];
    }
    energy *= 0.5 * kPi;
    if (!(energy > 0.0)) throw ValidationError("modulating function vanishes on the simulation grid");
    const double c = std::sqrt(env_.ia_total / energy);
    for (auto& v : q_) v *= c;

    const TrendEvaluator trend(model_, env_.knot_times());
    if (all_constant(model_.trends)) {
        params_.push_back(trend.at(env_.t_mid()));
    } else {
        params_.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            params_.push_back(trend.at(std::min(static_cast<double>(i) * grid_.dt, tf)));
    }
    if (params_.size() == 1) {
        const_phi_.resize(grid_.K);
        eval_filter_into(model_.filter, params_[0], grid_.freq(), const_phi_.data());
    }

    if (std::abs(2.0 * grid_.omega_upper_hz * grid_.dt - 1.0) < 1e-12) {
        period_ = 2 * (grid_.K - 1);
        sin_table_.resize(period_);
        cos_table_.resize(period_);
        for (std::size_t m = 0; m < period_; ++m) {
            const double a = kPi * static_cast<double>(m) / static_cast<double>(grid_.K - 1);
            sin_table_[m] = std::sin(a);
            cos_table_[m] = std::cos(a);
        }
    }
}

void Simulator::sigma_row(std::size_t i, double* out) const {
    const std::size_t K = grid_.K;
    const double qi = q_[i];
    if (qi == 0.0) {
        std::fill(out, out + K, 0.0);
        return;
    }
    if (!const_phi_.empty()) {
        std::copy(const_phi_.begin(), const_phi_.end(), out);
    } else {
        eval_filter_into(model_.filter, params_[i], grid_.freq(), out);
    }
    for (std::size_t k = 0; k < K; ++k) out[k] = qi * std::sqrt(out[k] * grid_.d_omega);
}

void Simulator::angle_row(std::size_t i, double* s, double* c) const {
    const std::size_t K = grid_.K;
    if (period_ > 0) {
        const std::size_t step = i % period_;
        std::size_t m = 0;
        for (std::size_t k = 0; k < K; ++k) {
            s[k] = sin_table_[m];
            c[k] = cos_table_[m];
            m += step;
            if (m >= period_) m -= period_;
        }
    } else {
        const double t = static_cast<double>(i) * grid_.dt;
        for (std::size_t k = 0; k < K; ++k) {
            const double a = static_cast<double>(k) * grid_.d_omega * t;
            s[k] = std::sin(a);
            c[k] = std::cos(a);
        }
    }
}

void Simulator::fill_rows(std::size_t i0, std::size_t i1, double* X) const {
    const std::size_t K = grid_.K;
    std::vector<double> sig(K), s(K), c(K);
    for (std::size_t i = i0; i < i1; ++i) {
        double* row = X + (i - i0) * 2 * K;
        sigma_row(i, sig.data());
        angle_row(i, s.data(), c.data());
        for (std::size_t k = 0; k < K; ++k) {
            row[k] = sig[k] * s[k];
            row[K + k] = sig[k] * c[k];
        }
    }
}

std::vector<double> Simulator::core(const std::vector<double>& z) const {
    const std::size_t K = grid_.K, n = grid_.n_time();
    if (z.size() != 2 * K) throw ValidationError("noise vector length must equal 2K");
    std::vector<double> out(n, 0.0);
    std::vector<double> X(kRowChunk * 2 * K);
    for (std::size_t i0 = 0; i0 < n; i0 += kRowChunk) {
        const std::size_t i1 = std::min(n, i0 + kRowChunk);
        fill_rows(i0, i1, X.data());
        for (std::size_t i = i0; i < i1; ++i) {
            const double* row = X.data() + (i - i0) * 2 * K;
            double acc = 0.0;
            for (std::size_t j = 0; j < 2 * K; ++j) acc += row[j] * z[j];
            out[i] = acc;
        }
    }
    return out;
}

RowMatrix Simulator::core_batch(const Eigen::MatrixXd& z) const {
    const std::size_t K = grid_.K, n = grid_.n_time();
    if (static_cast<std::size_t>(z.rows()) != 2 * K) throw ValidationError("noise matrix must have 2K rows");
    RowMatrix out(static_cast<Eigen::Index>(n), z.cols());
    RowMatrix X(static_cast<Eigen::Index>(kRowChunk), static_cast<Eigen::Index>(2 * K));
    for (std::size_t i0 = 0; i0 < n; i0 += kRowChunk) {
        const std::size_t i1 = std::min(n, i0 + kRowChunk);
        const auto rows = static_cast<Eigen::Index>(i1 - i0);
        fill_rows(i0, i1, X.data());
        out.middleRows(static_cast<Eigen::Index>(i0), rows).noalias() = X.topRows(rows) * z;
    }
    return out;
}

std::vector<double> Simulator::energy_factors(const std::vector<double>& fcs) const {
    // Each sin/cos component is high-passed exactly by the recursion used in
    // highpass(); the expected energy is the sum of their squared outputs.
    // Slot 0 is the unfiltered process (r = 1), summed the same way so that rounding cancels in the ratio.
    const std::size_t K = grid_.K, n = grid_.n_time(), L = 2 * K, F = fcs.size() + 1;
    std::vector<double> r(F, 1.0);
    for (std::size_t f = 1; f < F; ++f) {
        if (!(fcs[f - 1] >= 0.0)) throw ValidationError("corner frequency must be >= 0");
        r[f] = std::exp(-2.0 * kPi * fcs[f - 1] * grid_.dt);
    }
    std::vector<double> e_cur(F * L, 0.0), e_prev(F * L, 0.0), energy(F, 0.0);
    std::vector<double> X(kRowChunk * L);
    std::vector<double> lane(kLaneBlock);
    for (std::size_t i0 = 0; i0 < n; i0 += kRowChunk) {
        const std::size_t i1 = std::min(n, i0 + kRowChunk);
        fill_rows(i0, i1, X.data());
        for (std::size_t f = 0; f < F; ++f) {
            const double rf = r[f], a1 = 2.0 * rf, a2 = rf * rf;
            for (std::size_t j0 = 0; j0 < L; j0 += kLaneBlock) {
                const std::size_t nb = std::min(kLaneBlock, L - j0);
                double* __restrict ec = e_cur.data() + f * L + j0;
                double* __restrict ep = e_prev.data() + f * L + j0;
                double* __restrict acc = lane.data();
                std::fill(acc, acc + nb, 0.0);
                for (std::size_t i = i0; i < i1; ++i) {
                    const double* __restrict x = X.data() + (i - i0) * L + j0;
                    const double w = trapz_weight(i, n, grid_.dt);
                    for (std::size_t j = 0; j < nb; ++j) {
                        const double e1 = a1 * ec[j] - a2 * ep[j] + rf * x[j];
                        const double y = e1 - 2.0 * ec[j] + ep[j];
                        acc[j] += w * y * y;
                        ep[j] = ec[j];
                        ec[j] = e1;
                    }
                }
                double s = 0.0;
                for (std::size_t j = 0; j < nb; ++j) s += acc[j];
                energy[f] += s;
            }
        }
    }
    std::vector<double> kappa(F - 1);
    for (std::size_t f = 1; f < F; ++f) {
        if (!(energy[f] > 0.0)) throw ValidationError("high-pass filter removes all energy");
        kappa[f - 1] = std::sqrt(energy[0] / energy[f]);
    }
    return kappa;
}

double Simulator::kappa() const {
    std::call_once(kappa_once_, [this] { kappa_ = energy_factors({model_.fc})[0]; });
    return kappa_;
}

std::vector<double> Simulator::simulate(const std::vector<double>& z) const {
    std::vector<double> a = core(z);
    highpass_batch(a.data(), a.size(), 1, model_.fc, grid_.dt);
    const double k = kappa();
    for (auto& v : a) v *= k;
    return a;
}

std::vector<double> simulate_core(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid,
                                  const NoiseVector& noise) {
    return Simulator(env, model, grid).core(noise.z);
}

void highpass_batch(double* a, std::size_t n, std::size_t S, double fc, double dt) {
    if (!(fc >= 0.0)) throw ValidationError("corner frequency must be >= 0");
    if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
    if (fc == 0.0) return;  // exact identity of the recursion
    // E = D / dt^2 with D the discrete convolution dt * sum h(t_{n-m}) x_m,
    // h(j dt) = j dt r^j; output is the central second difference of D / dt^2.
    const double r = std::exp(-2.0 * kPi * fc * dt), a1 = 2.0 * r, a2 = r * r;
    std::vector<double> cur(S, 0.0), prev(S, 0.0);
    double* __restrict ec = cur.data();
    double* __restrict ep = prev.data();
    for (std::size_t i = 0; i < n; ++i) {
        double* __restrict x = a + i * S;
        for (std::size_t s = 0; s < S; ++s) {
            const double e1 = a1 * ec[s] - a2 * ep[s] + r * x[s];
            x[s] = e1 - 2.0 * ec[s] + ep[s];
            ep[s] = ec[s];
            ec[s] = e1;
        }
    }
}

std::vector<double> highpass(const std::vector<double>& a, double fc, double dt) {
    std::vector<double> out = a;
    highpass_batch(out.data(), out.size(), 1, fc, dt);
    return out;
}

double energy_factor(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid) {
    return Simulator(env, model, grid).kappa();
}

AccelRecord simulate_gm(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid,
                        const NoiseVector& noise, const std::string& id) {
    const Simulator sim(env, model, grid);
    AccelRecord rec;
    rec.dt = grid.dt;
    rec.id = id;
    rec.samples = sim.simulate(noise.z);
    return rec;
}

std::vector<double> fc_periods(const FcOptions& opt) { return log_spaced(opt.period_lo, opt.period_hi, opt.n_periods); }

std::vector<double> fc_grid(const FcOptions& opt) {
    if (!(opt.fc_step > 0.0) || !(opt.fc_hi >= opt.fc_lo) || !(opt.fc_lo >= 0.0))
        throw ValidationError("invalid corner frequency grid");
    const auto n = static_cast<std::size_t>(std::floor((opt.fc_hi - opt.fc_lo) / opt.fc_step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = std::round((opt.fc_lo + static_cast<double>(i) * opt.fc_step) * 1e9) / 1e9;
    return g;
}

Eigen::MatrixXd fc_noise(const SimGrid& grid, const FcOptions& opt) {
    if (opt.n_sims < 2) throw ValidationError("corner frequency search needs at least 2 simulations");
    const std::size_t L = 2 * grid.K;
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(L), opt.n_sims);
    for (int s = 0; s < opt.n_sims; ++s) {
        const auto z = standard_normals(stream_key(opt.seed, opt.stream_label, static_cast<std::uint64_t>(s)), L);
        std::copy(z.begin(), z.end(), Z.col(s).data());
    }
    return Z;
}

std::vector<double> fc_objective(const Simulator& sim, const std::vector<double>& target_sa,
                                 const std::vector<double>& fcs, const FcOptions& opt) {
    return fc_objective(sim, target_sa, fcs, sim.energy_factors(fcs), opt);
}

std::vector<double> fc_objective(const Simulator& sim, const std::vector<double>& target_sa,
                                 const std::vector<double>& fcs, const std::vector<double>& kappa,
                                 const FcOptions& opt) {
    if (kappa.size() != fcs.size()) throw ValidationError("energy factor count does not match the fc grid");
    const std::vector<double> periods = fc_periods(opt);
    if (target_sa.size() != periods.size()) throw ValidationError("target spectrum size does not match the period grid");
    std::vector<double> log_target(periods.size());
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (!(target_sa[i] > 0.0) || !std::isfinite(target_sa[i])) throw DataError("target spectrum must be > 0");
        log_target[i] = std::log(target_sa[i]);
    }
    const RowMatrix base = sim.core_batch(fc_noise(sim.grid(), opt));
    const std::size_t n = static_cast<std::size_t>(base.rows()), S = static_cast<std::size_t>(base.cols());
    const double dlnT = periods.size() > 1 ? std::log(opt.period_hi / opt.period_lo) / static_cast<double>(periods.size() - 1) : 1.0;

    std::vector<double> eps(fcs.size());
    parallel_for(fcs.size(), [&](std::size_t f) {
        std::vector<double> a(base.data(), base.data() + n * S);
        highpass_batch(a.data(), n, S, fcs[f], sim.grid().dt);
        std::vector<double> peak(S);
        const double lk = std::log(kappa[f]);
        double sum = 0.0;
        for (std::size_t p = 0; p < periods.size(); ++p) {
            sdof_peak_displacement_batch(a.data(), n, S, sim.grid().dt, periods[p], opt.zeta, peak.data());
            const double w = 2.0 * kPi / periods[p];
            double m = 0.0, m2 = 0.0;
            for (std::size_t s = 0; s < S; ++s) {
                if (!(peak[s] > 0.0)) throw DataError("simulated spectral ordinate is zero");
                const double v = std::log(w * w * peak[s]) + lk;
                peak[s] = v;
                m += v;
            }
            m /= static_cast<double>(S);
            for (std::size_t s = 0; s < S; ++s) m2 += (peak[s] - m) * (peak[s] - m);
            const double sd = std::sqrt(m2 / static_cast<double>(S - 1));
            if (!(sd >= 1e-12)) throw DataError("degenerate spread of simulated log spectra");
            sum += (log_target[p] - m) / sd;
        }
        eps[f] = std::abs(sum) * dlnT;
    });
    return eps;
}

FcResult optimize_fc(const EnvelopeParams& env, const SpectralModel& model, const SimGrid& grid,
                     const std::vector<double>& target_sa, const FcOptions& opt) {
    const Simulator sim(env, model, grid);
    FcResult r;
    r.fc_grid = fc_grid(opt);
    r.kappa = sim.energy_factors(r.fc_grid);
    r.eps = fc_objective(sim, target_sa, r.fc_grid, r.kappa, opt);
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.eps.size(); ++i)
        if (r.eps[i] < r.eps[best]) best = i;
    r.fc = r.fc_grid[best];
    return r;
}

}  // namespace gmsynth
