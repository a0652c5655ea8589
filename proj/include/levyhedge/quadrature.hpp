#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "levyhedge/errors.hpp"

namespace levyhedge {

struct QuadratureOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_intervals = 4000;
};

namespace detail {

// Gauss-Kronrod 15(7) nodes and weights on [-1, 1].
inline constexpr double kGk15Nodes[15] = {
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144838258730,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144838258730,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329};

inline constexpr double kGk15Weights[15] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970};

inline constexpr double kGauss7Weights[7] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082};

inline double value_norm(double v) { return std::abs(v); }
inline double value_norm(const std::complex<double>& v) { return std::abs(v); }

template <typename T, typename F>
void gk15(F&& f, double a, double b, T& result, double& err) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    T kronrod{};
    T gauss{};
    for (int i = 0; i < 15; ++i) {
        const T fv = f(mid + half * kGk15Nodes[i]);
        kronrod += kGk15Weights[i] * fv;
        if (i % 2 == 1) gauss += kGauss7Weights[i / 2] * fv;
    }
    kronrod *= half;
    gauss *= half;
    result = kronrod;
    const double diff = value_norm(kronrod - gauss);
    // Standard QUADPACK-style error inflation.
    err = diff;
    if (diff > 0.0) err = std::min(diff, 200.0 * diff * std::sqrt(diff > 1.0 ? 1.0 : diff));
}

template <typename T>
struct Segment {
    double a, b;
    T value;
    double error;
};

} // namespace detail

// Adaptive Gauss-Kronrod on a finite interval. T is double or complex<double>.
template <typename T = double, typename F>
T integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
    if (a == b) return T{};
    std::vector<detail::Segment<T>> segs;
    T v{};
    double e = 0.0;
    detail::gk15<T>(f, a, b, v, e);
    if (std::isnan(e) || std::isnan(detail::value_norm(v)))
        throw QuadratureFailure("integrand produced NaN");
    segs.push_back({a, b, v, e});
    T total = v;
    double total_err = e;
    while (true) {
        const double target =
            std::max(opts.abs_tol, opts.rel_tol * detail::value_norm(total));
        if (total_err <= target) return total;
        if (static_cast<int>(segs.size()) >= opts.max_intervals)
            throw QuadratureFailure("tolerance unreachable after " +
                                    std::to_string(segs.size()) + " intervals");
        std::size_t worst = 0;
        for (std::size_t i = 1; i < segs.size(); ++i)
            if (segs[i].error > segs[worst].error) worst = i;
        const detail::Segment<T> s = segs[worst];
        const double m = 0.5 * (s.a + s.b);
        if (m <= s.a || m >= s.b)
            // Interval at floating-point resolution; accept the remaining error.
            return total;
        detail::Segment<T> left{s.a, m, T{}, 0.0}, right{m, s.b, T{}, 0.0};
        detail::gk15<T>(f, left.a, left.b, left.value, left.error);
        detail::gk15<T>(f, right.a, right.b, right.value, right.error);
        if (std::isnan(left.error) || std::isnan(right.error) ||
            std::isnan(detail::value_norm(left.value)) ||
            std::isnan(detail::value_norm(right.value)))
            throw QuadratureFailure("integrand produced NaN");
        total += left.value + right.value - s.value;
        total_err += left.error + right.error - s.error;
        segs[worst] = left;
        segs.push_back(right);
    }
}

// [a, +inf) via x = a + t/(1-t).
template <typename T = double, typename F>
T integrate_upper(F&& f, double a, const QuadratureOptions& opts = {}) {
    auto g = [&f, a](double t) -> T {
        const double om = 1.0 - t;
        const double x = a + t / om;
        return f(x) / (om * om);
    };
    return integrate<T>(g, 0.0, 1.0 - 1e-14, opts);
}

// (-inf, b] via x = b - t/(1-t).
template <typename T = double, typename F>
T integrate_lower(F&& f, double b, const QuadratureOptions& opts = {}) {
    auto g = [&f, b](double t) -> T {
        const double om = 1.0 - t;
        const double x = b - t / om;
        return f(x) / (om * om);
    };
    return integrate<T>(g, 0.0, 1.0 - 1e-14, opts);
}

// (0, b] with an integrable endpoint singularity at 0: substitute x = e^s.
// Below x ~ 1e-100 a |x|^{-1-alpha} density can overflow while the remaining
// mass of any nu-integrable integrand is negligible, so that tail is dropped.
template <typename T = double, typename F>
T integrate_down_to_zero(F&& f, double b, const QuadratureOptions& opts = {}) {
    auto g = [&f](double s) -> T {
        if (s < -230.0) return T{};
        const double x = std::exp(s);
        return f(x) * x;
    };
    return integrate_lower<T>(g, std::log(b), opts);
}

// [a, 0) with a < 0, singularity at 0: substitute x = -e^s.
template <typename T = double, typename F>
T integrate_up_to_zero(F&& f, double a, const QuadratureOptions& opts = {}) {
    auto g = [&f](double s) -> T {
        if (s < -230.0) return T{};
        const double x = std::exp(s);
        return f(-x) * x;
    };
    return integrate_lower<T>(g, std::log(-a), opts);
}

} // namespace levyhedge
