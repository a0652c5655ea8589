#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/measure.hpp"
#include "levyhedge/triplet.hpp"

namespace levyhedge {

// Drift/variance functionals of the price S = S_0 e^X.
struct MarketCoefficients {
    double gamma_s = 0.0;       // gamma + sigma^2/2 + int (e^x-1-x 1_{|x|<=1}) nu
    double norm_sigma_nu = 0.0; // sigma^2 + int (e^x-1)^2 nu
    double tradeoff_slope = 0.0; // gamma_s^2 / norm_sigma_nu
    std::map<double, bool> exp_moment_flags; // p -> int_{|x|>1} e^{px} nu < inf
    MeasurePtr nu;

    bool exp_moment(double p) const { return nu->exp_moment_finite(p); }
};

inline MarketCoefficients market_coefficients(const LevyTriplet& t,
                                              const QuadratureOptions& opts = {}) {
    if (!t.nu->exp_moment_finite(2.0))
        throw NotSquareIntegrable("int e^{2x} nu diverges");
    MarketCoefficients mc;
    mc.nu = t.nu;
    mc.gamma_s = t.gamma + 0.5 * t.sigma * t.sigma +
                 compensated_exp_real(*t.nu, 1.0, opts);
    mc.norm_sigma_nu = t.sigma * t.sigma + squared_exp_jump(*t.nu, opts);
    if (mc.norm_sigma_nu <= 0.0)
        throw PreconditionViolated("degenerate model: sigma = 0 and nu = 0");
    mc.tradeoff_slope = mc.gamma_s * mc.gamma_s / mc.norm_sigma_nu;
    for (double p : {-3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0})
        mc.exp_moment_flags[p] = t.nu->exp_moment_finite(p);
    return mc;
}

struct MmmCheck {
    bool holds = false;
    double margin = 0.0;   // norm - sup over support of gamma_s (e^x - 1)
    bool via_sufficient = false; // 0 >= gamma_s >= -norm
};

// Admissibility of the martingale measure change: gamma_s (e^x - 1) < norm
// for all x in supp nu. The binding edge is evaluated from declared support
// endpoints (sampling can miss it); an infinite edge gives an unattained
// limit, where equality is still admissible.
inline MmmCheck check_mmm_assumption(const LevyTriplet& t,
                                     const QuadratureOptions& opts = {}) {
    const MarketCoefficients mc = market_coefficients(t, opts);
    MmmCheck out;
    out.via_sufficient = mc.gamma_s <= 0.0 && mc.gamma_s >= -mc.norm_sigma_nu;

    double sup = 0.0;       // value at x -> 0 is 0, always a support limit point
    bool attained = false;  // except for finite-activity measures away from 0
    auto consider = [&](double v, bool att) {
        if (v > sup || (v == sup && att)) {
            sup = v;
            attained = att;
        }
    };
    if (!t.nu->is_zero()) {
        for (const auto& a : t.nu->atoms())
            consider(mc.gamma_s * std::expm1(a.x), true);
        const double L = t.nu->support_left(), R = t.nu->support_right();
        if (R > L) {
            consider(mc.gamma_s * std::expm1(R), R < kInf);
            consider(mc.gamma_s * std::expm1(L), L > -kInf);
        }
    }
    out.margin = mc.norm_sigma_nu - sup;
    out.holds = attained ? out.margin > 0.0 : out.margin >= 0.0;
    return out;
}

struct MeasureChange {
    double u_coefficient = 0.0; // -gamma_s / norm, the density loading
    LevyTriplet starred;        // martingale triplet (gamma*, sigma, nu*)
    LevyTriplet v_triplet;      // V with e^V = density process of the change
};

namespace detail {

// nu_V = nu o phi^{-1} with phi(x) = ln(1 - a(e^x - 1)), built directly so
// the exponential-moment rule is exact: the weight (1 - a(e^x-1))^p grows
// like |a|^p e^{px} upward, and stays bounded downward.
inline MeasurePtr make_nu_v(MeasurePtr nu, double a) {
    auto phi = [a](double x) { return std::log1p(-a * std::expm1(x)); };
    TransformedMeasure::Spec spec;
    spec.base = nu;
    spec.forward = phi;
    spec.inverse = [a](double y) { return std::log1p((1.0 - std::exp(y)) / a); };
    spec.inverse_deriv = [a](double y) {
        const double ey = std::exp(y);
        return -ey / (a + 1.0 - ey);
    };
    spec.increasing = a < 0.0;
    const double v1 = phi(nu->support_left()), v2 = phi(nu->support_right());
    spec.support_left = std::min(v1, v2);
    spec.support_right = std::max(v1, v2);
    // Smallest weight value over the support (the gamma_s-side edge).
    const double wmin =
        std::exp(std::min(v1, std::min(v2, 0.0)));
    spec.exp_moment_rule = [nu, a, wmin](double p) {
        if (p > 0.0) return a < 0.0 ? nu->exp_moment_finite(p) : true;
        return wmin > 0.0;
    };
    spec.label = nu->name() + "~lnweight";
    return transformed_measure(std::move(spec));
}

} // namespace detail

// Minimal martingale measure change. The starred drift uses
// gamma* = gamma - a (sigma^2 + int_{|x|<=1} x (e^x - 1) nu), a = gamma_s/norm,
// which is the unique choice making the starred triplet drift-free for S.
inline MeasureChange minimal_martingale_measure(const LevyTriplet& t,
                                                const QuadratureOptions& opts = {}) {
    const MarketCoefficients mc = market_coefficients(t, opts);
    const MmmCheck chk = check_mmm_assumption(t, opts);
    if (!chk.holds)
        throw AssumptionViolated("gamma_s (e^x - 1) reaches " +
                                 std::to_string(mc.norm_sigma_nu - chk.margin) +
                                 " vs norm " + std::to_string(mc.norm_sigma_nu));
    MeasureChange out;
    const double a = mc.gamma_s / mc.norm_sigma_nu;
    out.u_coefficient = -a;
    if (a == 0.0) {
        out.starred = t;
        out.starred.tag = MeasureTag::Minimal;
        out.v_triplet = make_triplet(0.0, 0.0, zero_measure(), MeasureTag::Other, "V");
        return out;
    }

    const double q1 = q1_integral(*t.nu, opts);
    out.starred.gamma = t.gamma - a * (t.sigma * t.sigma + q1);
    out.starred.sigma = t.sigma;
    out.starred.nu = t.nu->is_zero() ? t.nu : reweighted_measure(t.nu, a);
    out.starred.tag = MeasureTag::Minimal;

    // U = -a (sigma W + compensated price-jump martingale); V = ln E(U).
    LevyTriplet u;
    u.sigma = std::abs(a) * t.sigma;
    u.tag = MeasureTag::Other;
    u.tag_name = "U";
    if (t.nu->is_zero()) {
        u.gamma = 0.0;
        u.nu = zero_measure();
    } else {
        auto alpha = [a](double x) { return -a * std::expm1(x); };
        TransformedMeasure::Spec us;
        us.base = t.nu;
        us.forward = alpha;
        us.inverse = [a](double y) { return std::log1p(-y / a); };
        us.inverse_deriv = [a](double y) { return -1.0 / (a * (1.0 - y / a)); };
        us.increasing = a < 0.0;
        const double y1 = alpha(t.nu->support_left()), y2 = alpha(t.nu->support_right());
        us.support_left = std::min(y1, y2);
        us.support_right = std::max(y1, y2);
        MeasurePtr base = t.nu;
        us.exp_moment_rule = [base, a](double p) {
            if (a < 0.0 && p > 0.0) return base->support_right() < kInf;
            return true; // remaining directions are bounded under the assumption
        };
        us.label = t.nu->name() + "~u";
        u.nu = transformed_measure(std::move(us));
        // Zero-mean compensation beyond the unit truncation.
        u.gamma = -u.nu->integrate(
            [](double y) { return std::abs(y) > 1.0 ? y : 0.0; }, opts);
    }
    out.v_triplet = stochastic_to_exp(u, opts);
    out.v_triplet.tag = MeasureTag::Other;
    out.v_triplet.tag_name = "V";
    if (!t.nu->is_zero())
        out.v_triplet.nu = detail::make_nu_v(t.nu, a); // same image, exact moment rule
    return out;
}

enum class IntensityQuery { SmallBeta, BigExp };

// Integrability under nu* answered by transfer from nu: small-jump power
// moments are unchanged; exponential big-jump moments shift by one because
// the tilt weight grows like e^x.
inline bool jump_intensity_transfer(const JumpMeasure& nu, const MeasureChange& change,
                                    IntensityQuery q, double value) {
    if (q == IntensityQuery::SmallBeta) return nu.small_moment_finite(value);
    if (change.u_coefficient == 0.0) return nu.exp_moment_finite(value);
    return nu.exp_moment_finite(value + 1.0);
}

} // namespace levyhedge
