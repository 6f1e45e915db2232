#include "gmsynth/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace gmsynth {

NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x0, const std::vector<double>& step,
                             const NelderMeadOptions& opt) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> pts(n + 1, x0);
    std::vector<double> val(n + 1);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += step[i];
    for (std::size_t i = 0; i <= n; ++i) val[i] = f(pts[i]);

    auto sanitize = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::max(); };
    for (auto& v : val) v = sanitize(v);

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    NelderMeadResult res;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

        double diam = 0.0;
        for (std::size_t i = 0; i <= n; ++i)
            for (std::size_t d = 0; d < n; ++d) diam = std::max(diam, std::abs(pts[i][d] - pts[best][d]));
        const double spread = val[worst] - val[best];
        if (spread <= opt.ftol_abs + opt.ftol_rel * std::abs(val[best]) && diam <= opt.xtol) {
            res.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[i][d];
        }
        for (auto& c : centroid) c /= static_cast<double>(n);

        for (std::size_t d = 0; d < n; ++d) xr[d] = centroid[d] + (centroid[d] - pts[worst][d]);
        const double fr = sanitize(f(xr));
        if (fr < val[best]) {
            for (std::size_t d = 0; d < n; ++d) xe[d] = centroid[d] + 2.0 * (centroid[d] - pts[worst][d]);
            const double fe = sanitize(f(xe));
            if (fe < fr) {
                pts[worst] = xe;
                val[worst] = fe;
            } else {
                pts[worst] = xr;
                val[worst] = fr;
            }
            continue;
        }
        if (fr < val[second]) {
            pts[worst] = xr;
            val[worst] = fr;
            continue;
        }
        const bool outside = fr < val[worst];
        for (std::size_t d = 0; d < n; ++d)
            xc[d] = outside ? centroid[d] + 0.5 * (xr[d] - centroid[d])
                            : centroid[d] + 0.5 * (pts[worst][d] - centroid[d]);
        const double fcv = sanitize(f(xc));
        if (fcv < (outside ? fr : val[worst])) {
            pts[worst] = xc;
            val[worst] = fcv;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t d = 0; d < n; ++d) pts[i][d] = pts[best][d] + 0.5 * (pts[i][d] - pts[best][d]);
            val[i] = sanitize(f(pts[i]));
        }
    }
    const std::size_t best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
    res.x = pts[best];
    res.fx = val[best];
    res.iterations = it;
    return res;
}

}  // namespace gmsynth
