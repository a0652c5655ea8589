#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/payoff.hpp"
#include "levyhedge/sampler.hpp"
#include "levyhedge/triplet.hpp"

namespace levyhedge {

// Black-Scholes closed forms at zero rate (the independent diffusion oracle).
inline double bs_price(double y, double strike, double sigma, double tau) {
    if (tau <= 0.0 || sigma <= 0.0) return std::max(y - strike, 0.0);
    const double sd = sigma * std::sqrt(tau);
    const double d1 = std::log(y / strike) / sd + 0.5 * sd;
    return y * norm_cdf(d1) - strike * norm_cdf(d1 - sd);
}

inline double bs_delta(double y, double strike, double sigma, double tau) {
    if (tau <= 0.0 || sigma <= 0.0) return y >= strike ? 1.0 : 0.0;
    const double sd = sigma * std::sqrt(tau);
    return norm_cdf(std::log(y / strike) / sd + 0.5 * sd);
}

enum class PricingMethod { FourierCos, MonteCarlo };

struct CosParams {
    int n_terms = 1 << 10;
    double width_sd = 10.0;     // truncation half-width in standard deviations
    double mass_tol = 1e-6;     // reconstructed-mass deviation triggering failure
};

struct McParams {
    std::size_t paths = 20000;
    std::uint64_t seed = 1;
};

struct McValue {
    double value = 0.0;
    double std_error = 0.0;
};

// Evaluates G(t, y) = E g(y e^{X_{T-t}}) for the Levy process of the supplied
// triplet (under whichever measure the triplet describes). Linear and
// constant payoffs short-circuit to their exact martingale identities when
// the triplet is drift-free for the price; other built-in payoffs go through
// a Fourier-cosine expansion with the characteristic exponent cached at the
// series frequencies, or through plain Monte Carlo.
class SemigroupEvaluator {
public:
    SemigroupEvaluator(LevyTriplet triplet, Payoff payoff, double maturity,
                       PricingMethod method = PricingMethod::FourierCos,
                       CosParams cos = {}, McParams mc = {},
                       const QuadratureOptions& qopts = {})
        : t_(std::move(triplet)), g_(std::move(payoff)), T_(maturity),
          method_(method), cos_(cos), mc_(mc) {
        if (!(T_ > 0.0)) throw PreconditionViolated("maturity must be positive");
        exact_ = g_.kind == PayoffKind::Linear || g_.kind == PayoffKind::Constant;
        if (exact_) return;
        check_integrability();
        if (method_ == PricingMethod::FourierCos) {
            if (!cos_supported(g_.kind))
                throw PreconditionViolated(
                    "no closed-form cosine coefficients for payoff " + g_.name());
            build_cos(qopts);
        } else {
            sim_ = std::make_shared<PathSimulator>(t_, T_, SimOptions{.grid_size = 64},
                                                   qopts);
        }
    }

    static bool cos_supported(PayoffKind k) {
        return k == PayoffKind::Call || k == PayoffKind::Put ||
               k == PayoffKind::Binary || k == PayoffKind::Linear ||
               k == PayoffKind::Constant;
    }

    double maturity() const { return T_; }
    const Payoff& payoff() const { return g_; }
    const LevyTriplet& triplet() const { return t_; }
    PricingMethod method() const { return method_; }

    // Per-t series weights; reusable across many y at the same time slice.
    struct Slice {
        const SemigroupEvaluator* ev = nullptr;
        double t = 0.0;
        std::vector<double> w; // Re(phi_k e^{-i u_k a}) * 2/(b-a), k=0 halved

        double value(double y) const { return ev->cos_value(*this, y); }
        double gradient(double y) const { return ev->cos_gradient(*this, y); }
    };

    Slice slice(double t) const {
        require_time(t);
        if (method_ != PricingMethod::FourierCos || exact_)
            throw PreconditionViolated("slices exist only for the cosine method");
        Slice s;
        s.ev = this;
        s.t = t;
        const double tau = T_ - t;
        const std::size_t n = psi_.size();
        s.w.resize(n);
        double mass = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const Cplx phi = std::exp(-tau * psi_[k]);
            const double uk = double(k) * kPi / (b_ - a_);
            const Cplx e(std::cos(uk * a_), -std::sin(uk * a_));
            s.w[k] = (phi * e).real() * 2.0 / (b_ - a_);
            if (k == 0) s.w[k] *= 0.5;
            mass += s.w[k] * cos_psi(k, a_, b_);
        }
        if (std::abs(mass - 1.0) > cos_.mass_tol)
            throw CosTruncationError("reconstructed density mass " +
                                     std::to_string(mass) + " at t = " +
                                     std::to_string(t));
        return s;
    }

    double value(double t, double y) const {
        require_state(t, y);
        if (t == T_) return g_(y);
        if (exact_) return g_.kind == PayoffKind::Linear ? y : g_.constant;
        if (method_ == PricingMethod::FourierCos) return slice(t).value(y);
        return value_mc(t, y).value;
    }

    McValue value_mc(double t, double y, std::optional<std::size_t> paths = {},
                     std::optional<std::uint64_t> seed = {}) const {
        require_state(t, y);
        if (t == T_ || exact_) return {value(t, y), 0.0};
        ensure_sim();
        const std::size_t n = paths.value_or(mc_.paths);
        const std::uint64_t sd = seed.value_or(mc_.seed);
        const double tau = T_ - t;
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            PathRng rng(sd, i);
            const double v = g_(y * std::exp(sim_->terminal(tau, rng)));
            s += v;
            s2 += v * v;
        }
        const double mean = s / double(n);
        const double var = std::max(s2 / double(n) - mean * mean, 0.0);
        return {mean, std::sqrt(var / double(n))};
    }

    // d/dy G(t, y); returns 0 when sigma = 0 (the formula's convention).
    double gradient(double t, double y) const {
        require_state(t, y);
        if (t_.sigma == 0.0) return 0.0;
        if (exact_) return g_.kind == PayoffKind::Linear ? 1.0 : 0.0;
        if (method_ == PricingMethod::FourierCos) {
            if (t == T_) { // limit slice: phi_k = 1
                Slice s;
                s.ev = this;
                s.t = t;
                const std::size_t n = psi_.size();
                s.w.resize(n);
                for (std::size_t k = 0; k < n; ++k) {
                    const double uk = double(k) * kPi / (b_ - a_);
                    s.w[k] = std::cos(uk * a_) * 2.0 / (b_ - a_) * (k == 0 ? 0.5 : 1.0);
                }
                return cos_gradient(s, y);
            }
            return slice(t).gradient(y);
        }
        return gradient_mc(t, y).value;
    }

    // Central finite difference with common random numbers across the shift.
    McValue gradient_mc(double t, double y, std::optional<std::size_t> paths = {},
                        std::optional<std::uint64_t> seed = {}) const {
        require_state(t, y);
        if (t_.sigma == 0.0) return {0.0, 0.0};
        ensure_sim();
        const double h = std::max(1e-4 * y, 1e-6);
        const std::size_t n = paths.value_or(mc_.paths);
        const std::uint64_t sd = seed.value_or(mc_.seed);
        const double tau = T_ - t;
        double s = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            PathRng rng(sd, i);
            const double ex = std::exp(sim_->terminal(tau, rng));
            const double d = (g_((y + h) * ex) - g_((y - h) * ex)) / (2.0 * h);
            s += d;
            s2 += d * d;
        }
        const double mean = s / double(n);
        const double var = std::max(s2 / double(n) - mean * mean, 0.0);
        return {mean, std::sqrt(var / double(n))};
    }

    double grid_left() const { return a_; }
    double grid_right() const { return b_; }

private:
    static constexpr double kPi = 3.14159265358979323846;

    void require_time(double t) const {
        if (!(t >= 0.0 && t <= T_))
            throw PreconditionViolated("time must lie in [0, T]");
    }
    void require_state(double t, double y) const {
        require_time(t);
        if (!(y > 0.0)) throw PreconditionViolated("price must be positive");
    }

    void check_integrability() const {
        // Unbounded payoffs grow at most linearly in y; need E e^{X} finite.
        const bool bounded = g_.kind == PayoffKind::Binary ||
                             g_.kind == PayoffKind::Constant;
        if (!bounded && !t_.nu->exp_moment_finite(1.0))
            throw DivergentExponentialMoment(
                "payoff expectation needs int_{|x|>1} e^x nu < inf");
    }

    void ensure_sim() const {
        if (!sim_)
            sim_ = std::make_shared<PathSimulator>(t_, T_, SimOptions{.grid_size = 64});
    }

    void build_cos(const QuadratureOptions& qopts) {
        // Cumulant-based truncation: mean and variance rates of X.
        const double c1 =
            t_.gamma + t_.nu->integrate(
                           [](double x) { return std::abs(x) > 1.0 ? x : 0.0; }, qopts);
        const double c2 =
            t_.sigma * t_.sigma +
            t_.nu->integrate([](double x) { return x * x; }, qopts);
        const double sd = std::sqrt(std::max(c2 * T_, 1e-12));
        a_ = std::min(c1 * T_, 0.0) - cos_.width_sd * sd;
        b_ = std::max(c1 * T_, 0.0) + cos_.width_sd * sd;
        psi_.resize(cos_.n_terms);
        for (int k = 0; k < cos_.n_terms; ++k)
            psi_[k] = characteristic_exponent(t_, Cplx(double(k) * kPi / (b_ - a_), 0.0),
                                              qopts);
    }

    // int_c^d cos(u_k (z - a)) dz and int_c^d e^z cos(u_k (z - a)) dz.
    double cos_psi(std::size_t k, double c, double d) const {
        if (k == 0) return d - c;
        const double u = double(k) * kPi / (b_ - a_);
        return (std::sin(u * (d - a_)) - std::sin(u * (c - a_))) / u;
    }
    double cos_chi(std::size_t k, double c, double d) const {
        const double u = double(k) * kPi / (b_ - a_);
        auto term = [&](double z) {
            return std::exp(z) * (std::cos(u * (z - a_)) + u * std::sin(u * (z - a_)));
        };
        return (term(d) - term(c)) / (1.0 + u * u);
    }

    double cos_value(const Slice& s, double y) const {
        const double c = std::clamp(std::log(g_.strike / y), a_, b_);
        double v = 0.0;
        for (std::size_t k = 0; k < s.w.size(); ++k) {
            double vk = 0.0;
            switch (g_.kind) {
                case PayoffKind::Call:
                    vk = y * cos_chi(k, c, b_) - g_.strike * cos_psi(k, c, b_);
                    break;
                case PayoffKind::Put:
                    vk = g_.strike * cos_psi(k, a_, c) - y * cos_chi(k, a_, c);
                    break;
                case PayoffKind::Binary:
                    vk = cos_psi(k, c, b_);
                    break;
                default:
                    throw PreconditionViolated("unsupported cosine payoff");
            }
            v += s.w[k] * vk;
        }
        return v;
    }

    double cos_gradient(const Slice& s, double y) const {
        const double craw = std::log(g_.strike / y);
        const double c = std::clamp(craw, a_, b_);
        double v = 0.0;
        for (std::size_t k = 0; k < s.w.size(); ++k) {
            double dk = 0.0;
            switch (g_.kind) {
                case PayoffKind::Call:
                    dk = cos_chi(k, c, b_);
                    break;
                case PayoffKind::Put:
                    dk = -cos_chi(k, a_, c);
                    break;
                case PayoffKind::Binary: {
                    if (craw > a_ && craw < b_) {
                        const double u = double(k) * kPi / (b_ - a_);
                        dk = std::cos(u * (c - a_)) / y;
                    }
                    break;
                }
                default:
                    throw PreconditionViolated("unsupported cosine payoff");
            }
            v += s.w[k] * dk;
        }
        return v;
    }

    LevyTriplet t_;
    Payoff g_;
    double T_;
    PricingMethod method_;
    CosParams cos_;
    McParams mc_;
    bool exact_ = false;
    double a_ = 0.0, b_ = 0.0;
    std::vector<Cplx> psi_;
    mutable std::shared_ptr<PathSimulator> sim_;
};

} // namespace levyhedge
