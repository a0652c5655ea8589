#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "levyhedge/market.hpp"
#include "levyhedge/semigroup.hpp"

namespace levyhedge {

struct StrategyValue {
    double theta = 0.0;
    double diffusion_part = 0.0; // sigma^2 d/dy G
    double jump_part = 0.0;      // int (G(t, e^x y) - G(t, y))/y (e^x - 1) nu(dx)
    double quadrature_error_bound = 0.0;
};

namespace detail {

// Cubic (Catmull-Rom) interpolation over a uniform grid; linear at the edges.
struct UniformCubic {
    double z0 = 0.0, dz = 1.0;
    std::vector<double> v;

    double operator()(double z) const {
        const double s = (z - z0) / dz;
        const std::ptrdiff_t n = std::ptrdiff_t(v.size());
        if (s <= 0.0) return v.front();
        if (s >= double(n - 1)) return v.back();
        const std::ptrdiff_t j = std::ptrdiff_t(s);
        const double w = s - double(j);
        if (j == 0 || j >= n - 2)
            return v[j] * (1.0 - w) + v[j + 1] * w;
        const double m0 = 0.5 * (v[j + 1] - v[j - 1]);
        const double m1 = 0.5 * (v[j + 2] - v[j]);
        const double w2 = w * w, w3 = w2 * w;
        return (2.0 * w3 - 3.0 * w2 + 1.0) * v[j] + (w3 - 2.0 * w2 + w) * m0 +
               (-2.0 * w3 + 3.0 * w2) * v[j + 1] + (w3 - w2) * m1;
    }
};

} // namespace detail

// Fraction of maturity near T where the formula is refused for eta < 1
// payoffs (the strategy blows up there at the Holder rate).
inline constexpr double kMaturityGuard = 1e-6;

inline void require_strategy_time(const Payoff& g, double t, double T) {
    if (!(t >= 0.0) || !(t < T))
        throw PreconditionViolated("strategy defined on [0, T)");
    if (g.holder_eta < 1.0 && t > T * (1.0 - kMaturityGuard))
        throw PreconditionViolated("strategy evaluation too close to maturity for a "
                                   "non-Lipschitz payoff");
}

// Local risk-minimizing strategy value
//   theta = [sigma^2 d_y G(t,y) + int (G(t,e^x y) - G(t,y))/y (e^x-1) nu] / norm
// with G evaluated under the martingale triplet of `ev`.
inline StrategyValue lrm_strategy(const SemigroupEvaluator& ev,
                                  const MarketCoefficients& coeffs, double t, double y,
                                  const QuadratureOptions& qopts = {}) {
    const Payoff& g = ev.payoff();
    require_strategy_time(g, t, ev.maturity());
    if (!(y > 0.0)) throw PreconditionViolated("price must be positive");

    StrategyValue out;
    if (g.kind == PayoffKind::Constant) return out;
    if (g.kind == PayoffKind::Linear) {
        // Perfect replication of the asset: the formula telescopes exactly.
        const double sigma2 = ev.triplet().sigma * ev.triplet().sigma;
        out.diffusion_part = sigma2;
        out.jump_part = coeffs.norm_sigma_nu - sigma2;
        out.theta = (out.diffusion_part + out.jump_part) / coeffs.norm_sigma_nu;
        return out;
    }
    if (!coeffs.exp_moment(2.0))
        throw NotSquareIntegrable("terminal payoff not square integrable");

    const double sigma = ev.triplet().sigma;
    const bool cosm = ev.method() == PricingMethod::FourierCos;
    std::optional<SemigroupEvaluator::Slice> slice;
    if (cosm) slice = ev.slice(t);
    auto G = [&](double yy) {
        return cosm ? slice->value(yy) : ev.value(t, yy);
    };

    out.diffusion_part =
        sigma > 0.0 ? sigma * sigma * (cosm ? slice->gradient(y) : ev.gradient(t, y))
                    : 0.0;

    if (!coeffs.nu->is_zero()) {
        const double g0 = G(y);
        // Near x = 0 the integrand is (d_y G) (e^x-1)^2 + O(x^3): substitute the
        // chord slope there instead of differencing G at noise level.
        const double cut = 1e-4;
        const double h = 64.0 * cut; // chord window for the local slope
        const double slope = (G(y * (1.0 + h)) - G(y * (1.0 - h))) / (2.0 * h * y);
        auto f = [&](double x) {
            if (std::abs(x) <= cut) return slope * expm1(x) * expm1(x);
            return (G(y * std::exp(x)) - g0) / y * std::expm1(x);
        };
        QuadratureOptions jq = qopts;
        jq.abs_tol = std::max(jq.abs_tol, 1e-11);
        jq.rel_tol = std::max(jq.rel_tol, 1e-8);
        out.jump_part = coeffs.nu->integrate(f, jq, {-cut, cut});
        // Second-order replacement error inside the cut window.
        const double small_mass = coeffs.nu->integrate(
            [cut](double x) {
                return std::abs(x) <= cut ? std::expm1(x) * std::expm1(x) : 0.0;
            },
            jq, {-cut, cut});
        out.quadrature_error_bound =
            small_mass * (std::abs(slope) * h + cut) + jq.abs_tol;
    }
    out.theta = (out.diffusion_part + out.jump_part) / coeffs.norm_sigma_nu;
    return out;
}

// Precomputed theta(t, log y) surface for Monte Carlo hedging runs: per time
// slice the semigroup is tabulated on a log-price grid once, the jump
// integral then reads cubic interpolants instead of fresh series sums.
struct StrategyTableParams {
    std::size_t t_cells = 256;
    std::size_t y_cells = 512;
    double logy_halfwidth_sd = 12.0; // around log y0, in terminal sd units
    double tail_fraction = 0.05;     // t-grid refinement share near T
    double tail_resolution = 1e-7;
};

class StrategyTable {
public:
    using Params = StrategyTableParams;

    StrategyTable(std::shared_ptr<const SemigroupEvaluator> ev,
                  MarketCoefficients coeffs, double y0, Params prm = {},
                  const QuadratureOptions& qopts = {})
        : ev_(std::move(ev)), coeffs_(std::move(coeffs)) {
        const double T = ev_->maturity();
        const Payoff& g = ev_->payoff();
        exact_ = g.kind == PayoffKind::Linear || g.kind == PayoffKind::Constant;
        if (exact_) return;
        if (ev_->method() != PricingMethod::FourierCos)
            throw PreconditionViolated("strategy tables need the cosine method");

        // Time grid: uniform then geometric into the maturity guard.
        const double t_end = T * (1.0 - kMaturityGuard);
        const std::size_t mt = std::max<std::size_t>(prm.t_cells, 8);
        const std::size_t m_tail = mt / 4, m_head = mt - m_tail;
        for (std::size_t i = 0; i < m_head; ++i)
            times_.push_back(T * (1.0 - prm.tail_fraction) * double(i) / double(m_head));
        double frac = prm.tail_fraction;
        const double rho = std::pow(prm.tail_resolution / prm.tail_fraction,
                                    1.0 / double(m_tail - 1));
        for (std::size_t i = 0; i + 1 < m_tail; ++i) {
            const double t = T * (1.0 - frac);
            if (t > times_.back() && t < t_end) times_.push_back(t);
            frac *= rho;
        }
        times_.push_back(t_end);

        // Log-price grid around y0 wide enough for paths and the jump reach.
        const double var = coeffs_.nu->is_zero()
                               ? 0.0
                               : coeffs_.nu->integrate(
                                     [](double x) { return x * x; }, qopts);
        const double sigma = ev_->triplet().sigma;
        const double sd = std::sqrt((sigma * sigma + var) * T);
        const double half = prm.logy_halfwidth_sd * std::max(sd, 0.05);
        z0_ = std::log(y0) - half;
        dz_ = 2.0 * half / double(prm.y_cells);
        nz_ = prm.y_cells + 1;

        // Jump-integral reach: G is needed at log y + x for x in the nu bulk.
        const double reach = 1.5 * half;
        theta_.resize(times_.size());
        for (std::size_t it = 0; it < times_.size(); ++it)
            theta_[it] = build_slice(times_[it], reach, qopts);
    }

    double theta(double t, double y) const {
        const Payoff& g = ev_->payoff();
        if (exact_) return g.kind == PayoffKind::Linear ? 1.0 : 0.0;
        const double tc = std::clamp(t, 0.0, times_.back());
        const auto it = std::upper_bound(times_.begin(), times_.end(), tc);
        const std::size_t j =
            std::min<std::size_t>(it - times_.begin(), times_.size() - 1);
        const std::size_t i = j == 0 ? 0 : j - 1;
        const double t0 = times_[i], t1 = times_[j];
        const double w = t1 > t0 ? std::clamp((tc - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
        const double z = std::log(y);
        return theta_[i](z) * (1.0 - w) + theta_[j](z) * w;
    }

    const std::vector<double>& times() const { return times_; }

private:
    detail::UniformCubic build_slice(double t, double reach,
                                     const QuadratureOptions& qopts) const {
        const auto slice = ev_->slice(t);
        const double sigma = ev_->triplet().sigma;
        // Tabulate G over an extended grid covering the jump reach.
        const std::ptrdiff_t pad = std::ptrdiff_t(std::ceil(reach / dz_)) + 2;
        detail::UniformCubic G;
        G.z0 = z0_ - double(pad) * dz_;
        G.dz = dz_;
        G.v.resize(nz_ + 2 * std::size_t(pad));
        for (std::size_t j = 0; j < G.v.size(); ++j)
            G.v[j] = slice.value(std::exp(G.z0 + double(j) * dz_));

        QuadratureOptions jq = qopts;
        jq.abs_tol = std::max(jq.abs_tol, 1e-10);
        jq.rel_tol = std::max(jq.rel_tol, 1e-7);

        detail::UniformCubic th;
        th.z0 = z0_;
        th.dz = dz_;
        th.v.resize(nz_);
        const double cut = 1e-4;
        for (std::size_t j = 0; j < nz_; ++j) {
            const double z = z0_ + double(j) * dz_;
            const double y = std::exp(z);
            double acc = sigma > 0.0 ? sigma * sigma * slice.gradient(y) : 0.0;
            if (!coeffs_.nu->is_zero()) {
                const double g0 = G(z);
                const double h = 64.0 * cut;
                const double slope = (G(z + h) - G(z - h)) / (y * (std::exp(h) - std::exp(-h)));
                auto f = [&](double x) {
                    if (std::abs(x) <= cut) return slope * expm1(x) * expm1(x);
                    return (G(z + x) - g0) / y * std::expm1(x);
                };
                acc += coeffs_.nu->integrate(f, jq, {-cut, cut});
            }
            th.v[j] = acc / coeffs_.norm_sigma_nu;
        }
        return th;
    }

    std::shared_ptr<const SemigroupEvaluator> ev_;
    MarketCoefficients coeffs_;
    bool exact_ = false;
    std::vector<double> times_;
    std::vector<detail::UniformCubic> theta_;
    double z0_ = 0.0, dz_ = 1.0;
    std::size_t nz_ = 0;
};

// Martingale-representation kernels of F(t, x) = E f(x + X_{T-t}):
// diffusion = sigma d_x F, jump(z) = F(t, x+z) - F(t, x).
struct RepFunction {
    enum class Kind { Constant, Identity, Indicator, Custom } kind = Kind::Constant;
    double level = 0.0;     // Constant value
    double threshold = 0.0; // Indicator: f = 1_{[threshold, inf)}
    std::function<double(double)> fn;
};

struct RepKernels {
    double value = 0.0;     // F(t, x)
    double diffusion = 0.0; // sigma d_x F
    std::function<double(double)> jump;
};

inline RepKernels representation_kernels(const LevyTriplet& triplet,
                                         const RepFunction& f, double T, double t,
                                         double x, McParams mc = {},
                                         const QuadratureOptions& qopts = {}) {
    if (!(t >= 0.0 && t <= T)) throw PreconditionViolated("time must lie in [0, T]");
    RepKernels out;
    switch (f.kind) {
        case RepFunction::Kind::Constant:
            out.value = f.level;
            out.diffusion = 0.0;
            out.jump = [](double) { return 0.0; };
            return out;
        case RepFunction::Kind::Identity: {
            if (!triplet.nu->exp_moment_finite(1.0) ||
                !triplet.nu->exp_moment_finite(-1.0))
                throw DivergentExponentialMoment("mean of X requires e^{|x|} moments");
            const double m =
                triplet.gamma +
                triplet.nu->integrate(
                    [](double u) { return std::abs(u) > 1.0 ? u : 0.0; }, qopts);
            out.value = x + m * (T - t);
            out.diffusion = triplet.sigma;
            out.jump = [](double z) { return z; };
            return out;
        }
        case RepFunction::Kind::Indicator: {
            auto ev = std::make_shared<SemigroupEvaluator>(
                triplet, binary_payoff(std::exp(f.threshold)), T,
                PricingMethod::FourierCos, CosParams{}, mc, qopts);
            out.value = ev->value(t, std::exp(x));
            out.diffusion = triplet.sigma > 0.0
                                ? triplet.sigma * std::exp(x) *
                                      ev->gradient(t, std::exp(x))
                                : 0.0;
            const double base = out.value;
            out.jump = [ev, t, x, base](double z) {
                return ev->value(t, std::exp(x + z)) - base;
            };
            return out;
        }
        case RepFunction::Kind::Custom: {
            if (!f.fn) throw PreconditionViolated("custom kernel needs a function");
            auto sim = std::make_shared<PathSimulator>(triplet, T,
                                                       SimOptions{.grid_size = 64},
                                                       qopts);
            auto F = [sim, &mc, fl = f.fn, T](double tt, double xx) {
                const double tau = T - tt;
                if (tau <= 0.0) return fl(xx);
                double s = 0.0;
                for (std::size_t i = 0; i < mc.paths; ++i) {
                    PathRng rng(mc.seed, i);
                    s += fl(xx + sim->terminal(tau, rng));
                }
                return s / double(mc.paths);
            };
            out.value = F(t, x);
            const double h = std::max(1e-4 * std::abs(x), 1e-6);
            out.diffusion =
                triplet.sigma > 0.0
                    ? triplet.sigma * (F(t, x + h) - F(t, x - h)) / (2.0 * h)
                    : 0.0;
            const double base = out.value;
            auto Fcopy = F;
            out.jump = [Fcopy, t, x, base](double z) { return Fcopy(t, x + z) - base; };
            return out;
        }
    }
    throw Error("unreachable");
}

// Growth-envelope diagnostic: sup over samples of
// |theta_t| (T - t)^{(1-theta_exp)/2} / Theta, with a per-time profile.
struct EnvelopeSample {
    double t = 0.0;
    double strategy = 0.0; // theta_t on the sample path
    double weight = 1.0;   // Theta(eta)_t = sup_{u<=t} S_u^{eta-1}
};

struct GrowthEnvelope {
    double sup_ratio = 0.0;
    std::vector<std::pair<double, double>> profile; // (t, max ratio at t)
};

inline GrowthEnvelope growth_envelope(const std::vector<EnvelopeSample>& samples,
                                      double theta_exp, double T) {
    GrowthEnvelope out;
    std::map<double, double> prof;
    for (const auto& s : samples) {
        if (!(s.weight > 0.0) || !(s.t >= 0.0 && s.t < T)) continue;
        const double r = std::abs(s.strategy) *
                         std::pow(T - s.t, 0.5 * (1.0 - theta_exp)) / s.weight;
        out.sup_ratio = std::max(out.sup_ratio, r);
        auto [it, fresh] = prof.emplace(s.t, r);
        if (!fresh) it->second = std::max(it->second, r);
    }
    out.profile.assign(prof.begin(), prof.end());
    return out;
}

} // namespace levyhedge
