#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "levyhedge/errors.hpp"
#include "levyhedge/measure.hpp"

namespace levyhedge {

enum class MeasureTag { Original, Minimal, Other };

// Characteristics (gamma, sigma, nu) with the truncation function x 1_{|x|<=1}.
struct LevyTriplet {
    double gamma = 0.0;
    double sigma = 0.0;
    MeasurePtr nu = zero_measure();
    MeasureTag tag = MeasureTag::Original;
    std::string tag_name;
};

inline LevyTriplet make_triplet(double gamma, double sigma, MeasurePtr nu,
                                MeasureTag tag = MeasureTag::Original,
                                std::string tag_name = {}) {
    if (sigma < 0.0) throw PreconditionViolated("sigma must be >= 0");
    if (!nu) nu = zero_measure();
    return {gamma, sigma, std::move(nu), tag, std::move(tag_name)};
}

// psi(u) with E e^{iuX_t} = e^{-t psi(u)}; analytic continuation off the real
// axis requires the matching exponential moment of nu.
inline Cplx characteristic_exponent(const LevyTriplet& t, Cplx u,
                                    const QuadratureOptions& opts = {}) {
    const Cplx iu(-u.imag(), u.real()); // i*u
    if (u.imag() != 0.0 && !t.nu->exp_moment_finite(-u.imag()))
        throw DivergentExponentialMoment("characteristic exponent at Im u = " +
                                         std::to_string(u.imag()));
    return -iu * t.gamma + 0.5 * t.sigma * t.sigma * u * u - compensated_exp(*t.nu, iu, opts);
}

inline double log1p_minus(double x) { // ln(1+x) - x
    if (std::abs(x) < 1e-3)
        return -0.5 * x * x * (1.0 - 2.0 * x / 3.0 + 0.5 * x * x);
    return std::log1p(x) - x;
}

namespace detail {

// e^{py} moment rule for nu o (e^x - 1)^{-1}; e^{p(e^x-1)} tails are
// super-exponential, so p > 0 needs a bounded jump support upward.
inline std::function<bool(double)> expm1_image_moment_rule(MeasurePtr base) {
    return [base](double p) {
        if (p > 0.0) return base->support_right() < kInf;
        return true; // image lives in (-1, inf): e^{py} bounded for p <= 0
    };
}

// e^{py} moment rule for nu o (ln(1+x))^{-1}: e^{p ln(1+x)} = (1+x)^p.
inline std::function<bool(double)> log1p_image_moment_rule(MeasurePtr base) {
    return [base](double p) {
        if (p >= 0.0) return base->exp_moment_finite(p); // (1+x)^p <= e^{px}, x > 0
        // Negative p blows up toward the -1 edge of the base support.
        return base->support_left() > -1.0;
    };
}

} // namespace detail

// Triplet of Z with e^X = stochastic exponential of Z.
inline LevyTriplet exp_to_stochastic_exp(const LevyTriplet& x,
                                         const QuadratureOptions& opts = {}) {
    const double half_var = 0.5 * x.sigma * x.sigma;
    if (x.nu->is_zero())
        return {x.gamma + half_var, x.sigma, x.nu, x.tag, x.tag_name};

    const double ln2 = std::log(2.0);
    // (e^u - 1) 1_{|e^u-1|<=1} - u 1_{|u|<=1}; |e^u - 1| <= 1 iff u <= ln 2.
    auto comp = [ln2](double u) {
        const bool in_unit = std::abs(u) <= 1.0;
        if (u <= ln2) return in_unit ? expm1_minus(u) : std::expm1(u);
        return in_unit ? -u : 0.0;
    };
    const double drift = x.nu->integrate(comp, opts, {ln2});

    TransformedMeasure::Spec spec;
    spec.base = x.nu;
    spec.forward = [](double u) { return std::expm1(u); };
    spec.inverse = [](double y) { return std::log1p(y); };
    spec.inverse_deriv = [](double y) { return 1.0 / (1.0 + y); };
    spec.increasing = true;
    spec.support_left = std::expm1(x.nu->support_left());
    spec.support_right = std::expm1(x.nu->support_right());
    spec.exp_moment_rule = detail::expm1_image_moment_rule(x.nu);
    spec.label = x.nu->name() + "~expm1";
    return {x.gamma + half_var + drift, x.sigma, transformed_measure(std::move(spec)),
            x.tag, x.tag_name};
}

// Triplet of Y with stochastic exponential of Z = e^Y; requires jumps > -1.
inline LevyTriplet stochastic_to_exp(const LevyTriplet& z,
                                     const QuadratureOptions& opts = {}) {
    const double half_var = 0.5 * z.sigma * z.sigma;
    if (z.nu->is_zero())
        return {z.gamma - half_var, z.sigma, z.nu, z.tag, z.tag_name};
    if (z.nu->support_left() < -1.0)
        throw NonPositiveExponential("jump support reaches below -1");
    for (const auto& a : z.nu->atoms())
        if (a.x <= -1.0) throw NonPositiveExponential("atom at " + std::to_string(a.x));

    const double hi = std::exp(1.0) - 1.0;      // ln(1+x) = 1
    const double lo = std::expm1(-1.0);         // ln(1+x) = -1
    // ln(1+x) 1_{|ln(1+x)|<=1} - x 1_{|x|<=1}.
    auto comp = [hi, lo](double v) {
        const bool log_unit = v <= hi && v >= lo;
        const bool in_unit = std::abs(v) <= 1.0;
        if (log_unit && in_unit) return log1p_minus(v);
        double s = 0.0;
        if (log_unit) s += std::log1p(v);
        if (in_unit) s -= v;
        return s;
    };
    const double drift = z.nu->integrate(comp, opts, {lo, hi});

    TransformedMeasure::Spec spec;
    spec.base = z.nu;
    spec.forward = [](double v) { return std::log1p(v); };
    spec.inverse = [](double y) { return std::expm1(y); };
    spec.inverse_deriv = [](double y) { return std::exp(y); };
    spec.increasing = true;
    spec.support_left = std::log1p(std::max(z.nu->support_left(), -1.0));
    spec.support_right = std::log1p(z.nu->support_right());
    spec.exp_moment_rule = detail::log1p_image_moment_rule(z.nu);
    spec.label = z.nu->name() + "~log1p";
    return {z.gamma - half_var + drift, z.sigma, transformed_measure(std::move(spec)),
            z.tag, z.tag_name};
}

} // namespace levyhedge
