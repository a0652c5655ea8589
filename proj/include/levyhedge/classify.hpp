#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/measure.hpp"
#include "levyhedge/payoff.hpp"

namespace levyhedge {

// Small-jump activity: Blumenthal-Getoor index plus declared membership in
// the alpha-stable-like classes S1/S2 that drive the rate-table cases.
struct SmallJumpClass {
    double bg_index = 0.0;
    bool finite_activity = true;
    std::optional<double> s1_alpha;
    std::optional<double> s2_alpha;
};

namespace detail {

// ln of annulus masses int_{2^{-k-1} < |x| <= 2^{-k}} |x|^r nu(dx), k = 4..20.
// For |x|^{-1-alpha}-like densities these behave like 2^{-k(r-alpha)}, so the
// regression slope of ln A_k against k decides convergence of sum_k A_k.
inline bool annuli_converge(const JumpMeasure& nu, double r,
                            const QuadratureOptions& opts) {
    std::vector<double> ks, logs;
    for (int k = 4; k <= 20; ++k) {
        const double hi = std::ldexp(1.0, -k), lo = 0.5 * hi;
        auto f = [r](double x) { return std::pow(std::abs(x), r); };
        const double a = nu.integrate_region(f, lo, hi, opts) +
                         nu.integrate_region(f, -hi, -lo, opts);
        if (a <= 0.0) continue;
        ks.push_back(double(k));
        logs.push_back(std::log(a));
    }
    if (ks.size() < 5) return true; // no mass accumulating at 0
    const std::size_t n = ks.size();
    double mk = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mk += ks[i]; ml += logs[i]; }
    mk /= double(n);
    ml /= double(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (ks[i] - mk) * (logs[i] - ml);
        sxx += (ks[i] - mk) * (ks[i] - mk);
    }
    return sxy / sxx < 0.0;
}

} // namespace detail

// Estimate inf{r in [0,2] : int_{|x|<=1} |x|^r nu < inf} by bisection on the
// annulus test; S1/S2 membership comes from the family's declaration.
inline SmallJumpClass classify_small_jumps(const JumpMeasure& nu, double tol = 0.05,
                                           const QuadratureOptions& opts = {}) {
    SmallJumpClass out;
    out.finite_activity = nu.finite_activity();
    out.s1_alpha = nu.s1_alpha();
    out.s2_alpha = nu.s2_alpha();
    if (out.finite_activity || nu.is_zero()) {
        out.bg_index = 0.0;
        return out;
    }

    double lo = 0.0, hi = 2.0;
    if (detail::annuli_converge(nu, lo, opts)) {
        out.bg_index = 0.0;
    } else {
        while (hi - lo > tol) {
            const double mid = 0.5 * (lo + hi);
            (detail::annuli_converge(nu, mid, opts) ? hi : lo) = mid;
        }
        out.bg_index = 0.5 * (lo + hi);
    }

    // Sanity probes: the test must separate cleanly around the estimate.
    const double up = out.bg_index + 0.1, down = out.bg_index - 0.1;
    if (up <= 2.0 && !detail::annuli_converge(nu, up, opts))
        throw IndeterminateIndex("annulus test diverges at index + 0.1");
    if (down > 0.0 && detail::annuli_converge(nu, down, opts))
        throw IndeterminateIndex("annulus test converges at index - 0.1");
    return out;
}

enum class Table1Case { C1, C2, C3, C4 };

inline std::string table1_case_name(Table1Case c) {
    switch (c) {
        case Table1Case::C1: return "C1";
        case Table1Case::C2: return "C2";
        case Table1Case::C3: return "C3";
        case Table1Case::C4: return "C4";
    }
    return "?";
}

struct ModelClass {
    double sigma = 0.0;
    SmallJumpClass small_jump;
};

struct Table1Choice {
    Table1Case case_id = Table1Case::C1;
    double r = 2.0;
    double theta = 1.0;
    double alpha = 1.0; // the moment/stable exponent used by the row
    double eta = 1.0;   // payoff Holder exponent
};

// Pick the applicable rate-table row and a concrete (r, theta): the infimum
// of the admissible r range (plus `slack` when the range is open) and the
// supremum of the admissible theta range (minus `slack` when open).
//
//   C1: sigma > 0, eta in (0,1], int_{|x|<=1}|x|^alpha nu < inf for some
//       alpha in [1,2]            -> r in [alpha,2], theta in (0,eta) (=1 if eta=1)
//   C2: sigma = 0, eta in [0,1], moment exponent alpha in [1,1+eta]
//                                 -> r in [alpha,2], theta = 1
//   C3: sigma = 0, eta in [0,1), nu in S1(alpha), alpha in [1+eta,2)
//                                 -> r in (alpha,2], theta in (0, 2(1+eta)/alpha - 1)
//   C4: as C3 with nu in S2(alpha) and g in W^{1,1/(1-eta)}
inline Table1Choice table1_parameters(const ModelClass& m, const Payoff& g,
                                      double slack = 0.05) {
    const double eta = g.holder_eta;
    const SmallJumpClass& sj = m.small_jump;
    // int_{|x|<=1} |x|^beta nu < inf: strict above the index, always at beta=2.
    auto small_ok = [&](double beta) {
        return beta >= 2.0 || sj.finite_activity || beta > sj.bg_index;
    };
    // Smallest usable moment exponent in [1, cap].
    auto min_alpha = [&](double cap) -> std::optional<double> {
        if (small_ok(1.0)) return 1.0;
        const double a = sj.bg_index + slack;
        if (a <= cap && small_ok(a)) return a;
        if (cap >= 2.0) return 2.0;
        return std::nullopt;
    };

    Table1Choice out;
    out.eta = eta;
    if (m.sigma > 0.0) {
        if (eta <= 0.0)
            throw NoApplicableCase("sigma > 0 requires a Holder exponent in (0,1]");
        out.case_id = Table1Case::C1;
        out.alpha = *min_alpha(2.0);
        out.r = out.alpha;
        out.theta = eta == 1.0 ? 1.0 : std::max(eta - slack, 0.5 * eta);
        return out;
    }

    if (const auto a2 = min_alpha(1.0 + eta)) {
        out.case_id = Table1Case::C2;
        out.alpha = *a2;
        out.r = out.alpha;
        out.theta = 1.0;
        return out;
    }

    for (Table1Case c : {Table1Case::C3, Table1Case::C4}) {
        const auto& sa = c == Table1Case::C3 ? sj.s1_alpha : sj.s2_alpha;
        if (!sa) continue;
        if (c == Table1Case::C4 &&
            !(g.sobolev_q && eta < 1.0 && *g.sobolev_q >= 1.0 / (1.0 - eta)))
            continue;
        const double a = *sa;
        if (eta >= 1.0 || a < 1.0 + eta || a >= 2.0) continue;
        out.case_id = c;
        out.alpha = a;
        out.r = std::min(a + slack, 2.0);
        const double theta_sup = 2.0 * (1.0 + eta) / a - 1.0;
        out.theta = std::max(theta_sup - slack, 0.5 * theta_sup);
        return out;
    }
    throw NoApplicableCase("no rate-table row matches sigma=" +
                           std::to_string(m.sigma) + ", eta=" + std::to_string(eta) +
                           ", bg=" + std::to_string(sj.bg_index));
}

} // namespace levyhedge
