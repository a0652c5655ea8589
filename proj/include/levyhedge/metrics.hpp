#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/rng.hpp"
#include "levyhedge/triplet.hpp"

namespace levyhedge {

struct NormEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

// Empirical L_p norm with a bootstrap standard error (200 resamples).
inline NormEstimate lp_norm(const std::vector<double>& samples, double p,
                            int resamples = 200, std::uint64_t seed = 2024) {
    if (samples.size() < 2) throw InsufficientData("lp_norm needs >= 2 samples");
    if (!(p >= 1.0)) throw PreconditionViolated("p must be >= 1");
    auto root_mean = [p](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += std::pow(std::abs(x), p);
        return std::pow(s / double(v.size()), 1.0 / p);
    };
    NormEstimate out;
    out.value = root_mean(samples);
    PathRng rng(seed);
    std::vector<double> boot(resamples), draw(samples.size());
    for (int b = 0; b < resamples; ++b) {
        for (auto& d : draw) d = samples[rng.index(samples.size())];
        boot[b] = root_mean(draw);
    }
    double m = std::accumulate(boot.begin(), boot.end(), 0.0) / resamples;
    double v = 0.0;
    for (double x : boot) v += (x - m) * (x - m);
    out.std_error = std::sqrt(v / double(resamples - 1));
    return out;
}

// Sample panel: values[path][time index on the shared fine grid].
using Panel = std::vector<std::vector<double>>;

namespace detail {

// Deterministic regression cells of ~k points: sort paths by state1 into
// column buckets, then by state2 within each bucket. The conditional mean of
// a target given the 2-d state is approximated by its cell mean.
inline std::vector<std::vector<std::size_t>> regression_cells(
    const std::vector<double>& s1, const std::vector<double>& s2, std::size_t k) {
    const std::size_t n = s1.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return s1[a] < s1[b]; });
    const std::size_t cells_total = std::max<std::size_t>(n / k, 1);
    const std::size_t cols = std::max<std::size_t>(
        std::size_t(std::sqrt(double(cells_total))), 1);
    const std::size_t per_col = (n + cols - 1) / cols;
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t lo = c * per_col, hi = std::min(n, lo + per_col);
        if (lo >= hi) break;
        std::vector<std::size_t> col(idx.begin() + lo, idx.begin() + hi);
        std::sort(col.begin(), col.end(),
                  [&](std::size_t a, std::size_t b) { return s2[a] < s2[b]; });
        for (std::size_t lo2 = 0; lo2 < col.size(); lo2 += k) {
            const std::size_t hi2 = std::min(col.size(), lo2 + k);
            if (hi2 - lo2 < std::max<std::size_t>(k / 2, 2) && !out.empty()) {
                out.back().insert(out.back().end(), col.begin() + lo2,
                                  col.begin() + hi2);
            } else {
                out.emplace_back(col.begin() + lo2, col.begin() + hi2);
            }
        }
    }
    return out;
}

} // namespace detail

// Grid-restricted weighted-BMO estimator: for each grid time a the
// conditional p-th moment of |E_T - E_{a-}| given the 2-d Markov state is
// approximated cell-wise and normalized by the cell mean of weight^p; the
// result is the p-th root of the max over times and cells. This restricts
// the sup over stopping times to deterministic grid times, so it is a LOWER
// bound of the true norm.
inline double weighted_bmo_estimate(const Panel& err_left, // E_{a-} per time
                                    const std::vector<double>& err_terminal,
                                    const Panel& weight,    // Phi-bar at a
                                    const Panel& state1, const Panel& state2,
                                    const std::vector<std::size_t>& time_idx,
                                    double p, std::size_t k = 50) {
    const std::size_t n = err_terminal.size();
    if (n < 10000) throw InsufficientPaths("weighted BMO estimator needs >= 10^4 paths");
    double worst = 0.0;
    std::vector<double> s1(n), s2(n);
    for (std::size_t a : time_idx) {
        for (std::size_t i = 0; i < n; ++i) {
            s1[i] = state1[i][a];
            s2[i] = state2[i][a];
        }
        for (const auto& cell : detail::regression_cells(s1, s2, k)) {
            double num = 0.0, den = 0.0;
            for (std::size_t i : cell) {
                num += std::pow(std::abs(err_terminal[i] - err_left[i][a]), p);
                den += std::pow(weight[i][a], p);
            }
            if (den > 0.0) worst = std::max(worst, num / den);
        }
    }
    return std::pow(worst, 1.0 / p);
}

// SM_p estimator: same machinery on sup_{t in [a,T]} weight_t^p / weight_a^p.
inline double sm_p_estimate(const Panel& weight, const Panel& state1,
                            const Panel& state2,
                            const std::vector<std::size_t>& time_idx, double p,
                            std::size_t k = 50) {
    const std::size_t n = weight.size();
    if (n < 10000) throw InsufficientPaths("SM_p estimator needs >= 10^4 paths");
    double worst = 0.0;
    std::vector<double> s1(n), s2(n), target(n), wp(n);
    for (std::size_t a : time_idx) {
        for (std::size_t i = 0; i < n; ++i) {
            s1[i] = state1[i][a];
            s2[i] = state2[i][a];
            double sup = 0.0;
            for (std::size_t t = a; t < weight[i].size(); ++t)
                sup = std::max(sup, weight[i][t]);
            target[i] = std::pow(sup, p);
            wp[i] = std::pow(weight[i][a], p);
        }
        for (const auto& cell : detail::regression_cells(s1, s2, k)) {
            double num = 0.0, den = 0.0;
            for (std::size_t i : cell) {
                num += target[i];
                den += wp[i];
            }
            if (den > 0.0) worst = std::max(worst, num / den);
        }
    }
    return std::pow(worst, 1.0 / p);
}

enum class RhDirection { PstarOverP, POverPstar };

// Closed-form reverse-Holder constant of the density process e^V:
// c = exp(T |psi_V(-+ s i)| / s). V == 0 (no measure change) gives exactly 1.
inline double reverse_holder_constant(const LevyTriplet& v, double s, double T,
                                      RhDirection dir,
                                      const QuadratureOptions& qopts = {}) {
    if (!(s > 1.0)) throw PreconditionViolated("reverse Holder needs s > 1");
    if (v.sigma == 0.0 && v.gamma == 0.0 && v.nu->is_zero()) return 1.0;
    if (dir == RhDirection::PstarOverP) {
        if (!v.nu->exp_moment_finite(s))
            throw DivergentExponentialMoment("int e^{sx} nu_V diverges");
        const Cplx psi = characteristic_exponent(v, Cplx(0.0, -s), qopts);
        return std::exp(T * std::abs(psi) / s);
    }
    if (!v.nu->exp_moment_finite(1.0 - s))
        throw DivergentExponentialMoment("int e^{(1-s)x} nu_V diverges");
    const Cplx psi = characteristic_exponent(v, Cplx(0.0, s), qopts);
    return std::exp(T * std::abs(psi) / s);
}

enum class Verdict { Consistent, Inconsistent, Inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Consistent: return "Consistent";
        case Verdict::Inconsistent: return "Inconsistent";
        case Verdict::Inconclusive: return "Inconclusive";
    }
    return "?";
}

struct RatePoint {
    double n = 0.0;
    double error = 0.0;
    double std_error = 0.0;
};

struct RateReport {
    std::vector<RatePoint> points;
    double slope = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    double predicted_slope = 0.0;
    Verdict verdict = Verdict::Inconclusive;
};

namespace detail {

// Weighted least squares of ln(err) on ln(n); weights 1/var(ln err).
inline double loglog_slope(const std::vector<RatePoint>& pts) {
    double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double w = p.std_error > 0.0 && p.error > 0.0
                             ? 1.0 / std::pow(p.std_error / p.error, 2.0)
                             : 1.0;
        const double x = std::log(p.n), y = std::log(p.error);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    const double den = sw * sxx - sx * sx;
    return (sw * sxy - sx * sy) / den;
}

} // namespace detail

enum class ErrorKind { L2, Lp };

// Log-log rate regression against the predicted slope -1/(2r); per-n errors
// are L_p norms of the sample batches, the slope CI comes from a bootstrap
// over paths (percentile, 200 resamples), and the smallest n is dropped as a
// transient when >= 6 points are available.
inline RateReport convergence_rate(const std::map<double, std::vector<double>>& runs,
                                   double predicted_r, ErrorKind kind = ErrorKind::L2,
                                   double p = 2.0, int resamples = 200,
                                   std::uint64_t seed = 7) {
    if (runs.size() < 4) throw InsufficientData("rate regression needs >= 4 n values");
    const double pp = kind == ErrorKind::L2 ? 2.0 : p;

    RateReport rep;
    rep.predicted_slope = -1.0 / (2.0 * predicted_r);
    std::vector<const std::vector<double>*> batches;
    for (const auto& [n, samples] : runs) {
        if (samples.size() < 2)
            throw InsufficientData("rate point needs >= 2 samples");
        const NormEstimate e = lp_norm(samples, pp);
        rep.points.push_back({n, e.value, e.std_error});
        batches.push_back(&samples);
    }

    const std::size_t skip = rep.points.size() >= 6 ? 1 : 0;
    std::vector<RatePoint> used(rep.points.begin() + skip, rep.points.end());
    bool degenerate = false;
    for (const auto& q : used) degenerate = degenerate || !(q.error > 0.0);
    if (degenerate) {
        rep.verdict = Verdict::Inconclusive;
        return rep;
    }
    rep.slope = detail::loglog_slope(used);

    PathRng rng(seed);
    std::vector<double> slopes;
    slopes.reserve(resamples);
    for (int b = 0; b < resamples; ++b) {
        std::vector<RatePoint> pts;
        bool ok = true;
        for (std::size_t j = skip; j < batches.size(); ++j) {
            const auto& s = *batches[j];
            double acc = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i)
                acc += std::pow(std::abs(s[rng.index(s.size())]), pp);
            const double err = std::pow(acc / double(s.size()), 1.0 / pp);
            ok = ok && err > 0.0;
            pts.push_back({rep.points[j].n, err, rep.points[j].std_error});
        }
        if (ok) slopes.push_back(detail::loglog_slope(pts));
    }
    if (slopes.size() < 10) {
        rep.verdict = Verdict::Inconclusive;
        return rep;
    }
    std::sort(slopes.begin(), slopes.end());
    rep.ci_lo = slopes[std::size_t(0.025 * double(slopes.size() - 1))];
    rep.ci_hi = slopes[std::size_t(std::ceil(0.975 * double(slopes.size() - 1)))];
    rep.verdict = (rep.predicted_slope >= rep.ci_lo && rep.predicted_slope <= rep.ci_hi)
                      ? Verdict::Consistent
                      : Verdict::Inconsistent;
    return rep;
}

struct TailDecay {
    double exponent = 0.0;
    double r_squared = 0.0;
};

// Log-log regression of the empirical survival function over thresholds.
inline TailDecay tail_decay(const std::vector<double>& samples,
                            const std::vector<double>& thresholds) {
    if (samples.size() < 100000)
        throw InsufficientData("tail estimation needs >= 10^5 samples");
    std::vector<double> xs, ys;
    for (double u : thresholds) {
        if (!(u > 0.0)) continue;
        std::size_t c = 0;
        for (double s : samples) c += std::abs(s) > u;
        if (c == 0) continue;
        xs.push_back(std::log(u));
        ys.push_back(std::log(double(c) / double(samples.size())));
    }
    if (xs.size() < 3)
        throw InsufficientData("too few thresholds with positive survival mass");
    const std::size_t n = xs.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += xs[i]; my += ys[i]; }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    TailDecay out;
    out.exponent = -sxy / sxx;
    out.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return out;
}

} // namespace levyhedge
