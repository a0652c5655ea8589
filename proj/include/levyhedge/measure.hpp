#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/quadrature.hpp"

namespace levyhedge {

using Cplx = std::complex<double>;
using RealFn = std::function<double(double)>;
using CplxFn = std::function<Cplx(double)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// e^w - 1 - w without cancellation near w = 0.
inline double expm1_minus(double w) {
    if (std::abs(w) < 1e-3)
        return 0.5 * w * w * (1.0 + w / 3.0 + w * w / 12.0 + w * w * w / 60.0);
    return std::expm1(w) - w;
}

inline Cplx expm1_c(Cplx w) {
    if (std::abs(w) < 1e-4)
        return w * (1.0 + w * (0.5 + w * (1.0 / 6.0 + w * (1.0 / 24.0))));
    return std::exp(w) - 1.0;
}

inline Cplx expm1_minus_c(Cplx w) {
    if (std::abs(w) < 1e-3)
        return 0.5 * w * w * (1.0 + w / 3.0 + w * w / 12.0 + w * w * w / 60.0);
    return std::exp(w) - 1.0 - w;
}

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

struct JumpAtom {
    double x;
    double intensity;
};

// A jump (Levy) measure on R \ {0}: an absolutely continuous part given by
// `density` plus finitely many atoms. Moment/integrability queries are
// answered analytically per family; numerical divergence detection is not
// attempted. All instances are immutable and safe to share across threads.
class JumpMeasure {
public:
    virtual ~JumpMeasure() = default;

    virtual std::string name() const = 0;
    virtual bool is_zero() const { return false; }
    virtual bool finite_activity() const = 0;
    virtual double total_mass() const = 0; // +inf for infinite activity
    virtual double density(double x) const = 0;
    virtual const std::vector<JumpAtom>& atoms() const { return no_atoms(); }

    // Support of the whole measure (atoms included); used for edge checks.
    virtual double support_left() const = 0;
    virtual double support_right() const = 0;

    // Is int_{|x|>1} e^{px} nu(dx) finite?
    virtual bool exp_moment_finite(double p) const = 0;
    // Is int_{|x|<=1} |x|^beta nu(dx) finite?
    virtual bool small_moment_finite(double beta) const = 0;

    // Declared stable-like class memberships (parametric families only).
    virtual std::optional<double> s1_alpha() const { return std::nullopt; }
    virtual std::optional<double> s2_alpha() const { return std::nullopt; }

    // May Monte Carlo samplers draw jump sizes from this measure? Built-in
    // families yes; user-defined densities must opt in.
    virtual bool sampler_declared() const { return true; }

    // Closed form for K(z) = int (e^{zx} - 1 - zx 1_{|x|<=1}) nu(dx).
    virtual bool has_closed_k() const { return false; }
    virtual Cplx closed_k(Cplx) const {
        throw Error("no closed-form exponential functional for " + name());
    }

    // int f dnu over the whole line, atoms included. `breaks` lists extra
    // cut points (own variable) where f may be non-smooth.
    double integrate(const RealFn& f, const QuadratureOptions& opts = {},
                     const std::vector<double>& breaks = {}) const {
        return do_integrate(f, opts, breaks);
    }
    Cplx integrate_c(const CplxFn& f, const QuadratureOptions& opts = {},
                     const std::vector<double>& breaks = {}) const {
        return do_integrate_c(f, opts, breaks);
    }
    // Continuous part only over (lo, hi); atoms excluded.
    double integrate_region(const RealFn& f, double lo, double hi,
                            const QuadratureOptions& opts = {}) const {
        return do_integrate_region(f, lo, hi, opts);
    }

protected:
    virtual double do_integrate(const RealFn& f, const QuadratureOptions& opts,
                                const std::vector<double>& breaks) const = 0;
    virtual Cplx do_integrate_c(const CplxFn& f, const QuadratureOptions& opts,
                                const std::vector<double>& breaks) const = 0;
    virtual double do_integrate_region(const RealFn& f, double lo, double hi,
                                       const QuadratureOptions& opts) const = 0;

    static const std::vector<JumpAtom>& no_atoms() {
        static const std::vector<JumpAtom> empty;
        return empty;
    }
};

using MeasurePtr = std::shared_ptr<const JumpMeasure>;

// Sum of f over atoms with x in [lo, hi].
template <typename T, typename F>
T atom_sum(const JumpMeasure& nu, F&& f, double lo = -kInf, double hi = kInf) {
    T s{};
    for (const auto& a : nu.atoms())
        if (a.x >= lo && a.x <= hi) s += a.intensity * T(f(a.x));
    return s;
}

// Base for measures defined directly by a density on an interval.
class DensityMeasure : public JumpMeasure {
protected:
    double do_integrate(const RealFn& f, const QuadratureOptions& opts,
                        const std::vector<double>& breaks) const override {
        return integrate_impl<double>(f, opts, breaks);
    }
    Cplx do_integrate_c(const CplxFn& f, const QuadratureOptions& opts,
                        const std::vector<double>& breaks) const override {
        return integrate_impl<Cplx>(f, opts, breaks);
    }
    double do_integrate_region(const RealFn& f, double lo, double hi,
                               const QuadratureOptions& opts) const override {
        return quad_over<double>(f, std::max(lo, cont_left()), std::min(hi, cont_right()),
                                 opts, {});
    }

    // Continuous-component support (atoms tracked separately).
    virtual double cont_left() const { return support_left(); }
    virtual double cont_right() const { return support_right(); }

    template <typename T, typename F>
    T integrate_impl(F&& f, const QuadratureOptions& opts,
                     const std::vector<double>& breaks) const {
        T s = atom_sum<T>(*this, f);
        s += quad_over<T>(f, cont_left(), cont_right(), opts, breaks);
        return s;
    }

    // Adaptive quadrature of f * density over (lo, hi) with cuts at -1, 0, 1
    // and `breaks`; log substitution handles |x|^{-1-alpha} blow-up at 0.
    template <typename T, typename F>
    T quad_over(F&& f, double lo, double hi, const QuadratureOptions& opts,
                const std::vector<double>& breaks) const {
        if (!(lo < hi)) return T{};
        std::vector<double> b{-1.0, 1.0};
        b.insert(b.end(), breaks.begin(), breaks.end());
        if (lo < 0.0 && hi > 0.0) b.push_back(0.0);
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        std::vector<double> pts{lo};
        for (double x : b)
            if (x > lo && x < hi) pts.push_back(x);
        pts.push_back(hi);

        // Evaluate the density first: in far tails it underflows to 0 while
        // f may overflow, and 0 * inf would poison the sum.
        auto g = [this, &f](double x) -> T {
            const double d = density(x);
            if (d == 0.0) return T{};
            return T(f(x)) * d;
        };
        T s{};
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const double a = pts[i], c = pts[i + 1];
            if (a == -kInf)
                s += integrate_lower<T>(g, c, opts);
            else if (c == kInf)
                s += integrate_upper<T>(g, a, opts);
            else if (a == 0.0)
                s += integrate_down_to_zero<T>(g, c, opts);
            else if (c == 0.0)
                s += integrate_up_to_zero<T>(g, a, opts);
            else
                s += levyhedge::integrate<T>(g, a, c, opts);
        }
        return s;
    }
};

class ZeroMeasure final : public DensityMeasure {
public:
    std::string name() const override { return "zero"; }
    bool is_zero() const override { return true; }
    bool finite_activity() const override { return true; }
    double total_mass() const override { return 0.0; }
    double density(double) const override { return 0.0; }
    double support_left() const override { return 0.0; }
    double support_right() const override { return 0.0; }
    bool exp_moment_finite(double) const override { return true; }
    bool small_moment_finite(double) const override { return true; }
    bool has_closed_k() const override { return true; }
    Cplx closed_k(Cplx) const override { return {}; }
};

// Compound Poisson with a discrete jump-size law.
class AtomicMeasure final : public DensityMeasure {
public:
    explicit AtomicMeasure(std::vector<JumpAtom> atoms) : atoms_(std::move(atoms)) {
        if (atoms_.empty()) throw PreconditionViolated("atomic measure needs atoms");
        for (const auto& a : atoms_) {
            if (a.intensity <= 0.0) throw PreconditionViolated("atom intensity must be > 0");
            if (a.x == 0.0) throw PreconditionViolated("atom at 0 not allowed");
        }
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const JumpAtom& a, const JumpAtom& b) { return a.x < b.x; });
    }
    std::string name() const override { return "compound_poisson"; }
    bool finite_activity() const override { return true; }
    double total_mass() const override {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.intensity;
        return s;
    }
    double density(double) const override { return 0.0; }
    const std::vector<JumpAtom>& atoms() const override { return atoms_; }
    double support_left() const override { return atoms_.front().x; }
    double support_right() const override { return atoms_.back().x; }
    bool exp_moment_finite(double) const override { return true; }
    bool small_moment_finite(double) const override { return true; }
    bool has_closed_k() const override { return true; }
    Cplx closed_k(Cplx z) const override {
        Cplx s{};
        for (const auto& a : atoms_) {
            const Cplx w = z * a.x;
            s += a.intensity * (std::abs(a.x) <= 1.0 ? expm1_minus_c(w) : expm1_c(w));
        }
        return s;
    }

protected:
    double cont_left() const override { return 0.0; }
    double cont_right() const override { return 0.0; }

private:
    std::vector<JumpAtom> atoms_;
};

// lambda * N(mu, sj^2) jump-size density.
class MertonMeasure final : public DensityMeasure {
public:
    MertonMeasure(double lambda, double mu, double sj) : l_(lambda), mu_(mu), sj_(sj) {
        if (lambda <= 0.0 || sj <= 0.0)
            throw PreconditionViolated("Merton needs lambda > 0, sigma_J > 0");
        const double a = (-1.0 - mu_) / sj_, b = (1.0 - mu_) / sj_;
        b_small_ = l_ * (mu_ * (norm_cdf(b) - norm_cdf(a)) - sj_ * (norm_pdf(b) - norm_pdf(a)));
    }
    std::string name() const override { return "merton"; }
    bool finite_activity() const override { return true; }
    double total_mass() const override { return l_; }
    double density(double x) const override { return l_ * norm_pdf((x - mu_) / sj_) / sj_; }
    double support_left() const override { return -kInf; }
    double support_right() const override { return kInf; }
    bool exp_moment_finite(double) const override { return true; }
    bool small_moment_finite(double) const override { return true; }
    bool has_closed_k() const override { return true; }
    Cplx closed_k(Cplx z) const override {
        // int (e^{zx}-1) nu = lambda (mgf(z) - 1); subtract z int_{|x|<=1} x nu.
        return l_ * expm1_c(z * mu_ + 0.5 * z * z * sj_ * sj_) - z * b_small_;
    }

    double lambda() const { return l_; }
    double mu_j() const { return mu_; }
    double sigma_j() const { return sj_; }

private:
    double l_, mu_, sj_;
    double b_small_;
};

// Double-exponential jump-size density.
class KouMeasure final : public DensityMeasure {
public:
    KouMeasure(double lambda, double p, double eta_plus, double eta_minus)
        : l_(lambda), p_(p), ep_(eta_plus), em_(eta_minus) {
        if (lambda <= 0.0 || p < 0.0 || p > 1.0 || eta_plus <= 1.0 || eta_minus <= 0.0)
            throw PreconditionViolated("Kou needs lambda > 0, p in [0,1], eta+ > 1, eta- > 0");
        auto trunc_mean = [](double eta) { return (1.0 - std::exp(-eta) * (1.0 + eta)) / eta; };
        b_small_ = l_ * (p_ * trunc_mean(ep_) - (1.0 - p_) * trunc_mean(em_));
    }
    std::string name() const override { return "kou"; }
    bool finite_activity() const override { return true; }
    double total_mass() const override { return l_; }
    double density(double x) const override {
        return x > 0.0 ? l_ * p_ * ep_ * std::exp(-ep_ * x)
                       : l_ * (1.0 - p_) * em_ * std::exp(em_ * x);
    }
    double support_left() const override { return -kInf; }
    double support_right() const override { return kInf; }
    bool exp_moment_finite(double p) const override { return p < ep_ && p > -em_; }
    bool small_moment_finite(double) const override { return true; }
    bool has_closed_k() const override { return true; }
    Cplx closed_k(Cplx z) const override {
        if (!(z.real() < ep_ && z.real() > -em_))
            throw DivergentExponentialMoment("Kou exponential functional at Re z = " +
                                             std::to_string(z.real()));
        const Cplx psi1 = l_ * (p_ * ep_ / (ep_ - z) + (1.0 - p_) * em_ / (em_ + z) - 1.0);
        return psi1 - z * b_small_;
    }

    double lambda() const { return l_; }
    double p() const { return p_; }
    double eta_plus() const { return ep_; }
    double eta_minus() const { return em_; }

private:
    double l_, p_, ep_, em_;
    double b_small_;
};

// C e^{-G|x|}|x|^{-1-Y} (x<0), C e^{-Mx} x^{-1-Y} (x>0).
class CgmyMeasure final : public DensityMeasure {
public:
    CgmyMeasure(double C, double G, double M, double Y) : c_(C), g_(G), m_(M), y_(Y) {
        if (C <= 0.0 || G <= 0.0 || M <= 0.0 || Y <= 0.0 || Y >= 2.0)
            throw PreconditionViolated("CGMY needs C,G,M > 0 and Y in (0,2)");
        if (y_ < 1.0) {
            // int_{|x|<=1} x nu, finite for Y < 1.
            comp_ = integrate_region([](double x) { return x; }, -1.0, 1.0);
        } else if (y_ > 1.0) {
            // int_{|x|>1} x nu.
            comp_ = integrate_region([](double x) { return x; }, 1.0, kInf) +
                    integrate_region([](double x) { return x; }, -kInf, -1.0);
        }
    }
    std::string name() const override { return "cgmy"; }
    bool finite_activity() const override { return false; }
    double total_mass() const override { return kInf; }
    double density(double x) const override {
        const double ax = std::abs(x);
        const double decay = x > 0.0 ? m_ : g_;
        return c_ * std::exp(-decay * ax) * std::pow(ax, -1.0 - y_);
    }
    double support_left() const override { return -kInf; }
    double support_right() const override { return kInf; }
    bool exp_moment_finite(double p) const override { return p >= -g_ && p <= m_; }
    bool small_moment_finite(double beta) const override { return beta > y_; }
    std::optional<double> s1_alpha() const override { return y_; }
    std::optional<double> s2_alpha() const override { return y_; }
    bool has_closed_k() const override { return y_ != 1.0; }
    Cplx closed_k(Cplx z) const override {
        if (y_ == 1.0) return JumpMeasure::closed_k(z);
        if (!(z.real() >= -g_ && z.real() <= m_))
            throw DivergentExponentialMoment("CGMY exponential functional at Re z = " +
                                             std::to_string(z.real()));
        const double gam = std::tgamma(-y_);
        const Cplx pm = std::pow(Cplx(m_) - z, y_), pg = std::pow(Cplx(g_) + z, y_);
        if (y_ < 1.0) {
            const Cplx psi1 = c_ * gam *
                (pm - std::pow(m_, y_) + pg - std::pow(g_, y_));
            return psi1 - z * comp_;
        }
        const Cplx psi0 = c_ * gam *
            (pm - std::pow(m_, y_) + z * y_ * std::pow(m_, y_ - 1.0) +
             pg - std::pow(g_, y_) - z * y_ * std::pow(g_, y_ - 1.0));
        return psi0 + z * comp_;
    }

    double C() const { return c_; }
    double G() const { return g_; }
    double M() const { return m_; }
    double Y() const { return y_; }

private:
    double c_, g_, m_, y_;
    double comp_ = 0.0; // truncation compensator (small mean for Y<1, big mean for Y>1)
};

// Normal inverse Gaussian: density d*a/pi * e^{bx} K_1(a|x|)/|x|.
class NigMeasure final : public DensityMeasure {
public:
    NigMeasure(double alpha, double beta, double delta) : a_(alpha), b_(beta), d_(delta) {
        if (alpha <= 0.0 || std::abs(beta) >= alpha || delta <= 0.0)
            throw PreconditionViolated("NIG needs alpha > 0, |beta| < alpha, delta > 0");
        gamma0_ = std::sqrt(a_ * a_ - b_ * b_);
        big_mean_ = integrate_region([](double x) { return x; }, 1.0, kInf) +
                    integrate_region([](double x) { return x; }, -kInf, -1.0);
    }
    std::string name() const override { return "nig"; }
    bool finite_activity() const override { return false; }
    double total_mass() const override { return kInf; }
    double density(double x) const override {
        const double ax = std::abs(x);
        const double t = a_ * ax;
        // K_1(t) underflows to 0 for large t; treat as exact tail decay.
        double k1;
        if (t > 650.0) return 0.0;
        k1 = std::cyl_bessel_k(1.0, t);
        return d_ * a_ / 3.14159265358979323846 * std::exp(b_ * x) * k1 / ax;
    }
    double support_left() const override { return -kInf; }
    double support_right() const override { return kInf; }
    bool exp_moment_finite(double p) const override {
        return p <= a_ - b_ && p >= -(a_ + b_);
    }
    bool small_moment_finite(double beta) const override { return beta > 1.0; }
    std::optional<double> s1_alpha() const override { return 1.0; }
    std::optional<double> s2_alpha() const override { return 1.0; }
    bool has_closed_k() const override { return true; }
    Cplx closed_k(Cplx z) const override {
        if (!(z.real() <= a_ - b_ && z.real() >= -(a_ + b_)))
            throw DivergentExponentialMoment("NIG exponential functional at Re z = " +
                                             std::to_string(z.real()));
        const Cplx bz = b_ + z;
        const Cplx psi0 = d_ * (gamma0_ - std::sqrt(a_ * a_ - bz * bz)) - z * d_ * b_ / gamma0_;
        return psi0 + z * big_mean_;
    }

    double alpha() const { return a_; }
    double beta() const { return b_; }
    double delta() const { return d_; }

private:
    double a_, b_, d_, gamma0_;
    double big_mean_;
};

// User-supplied density; integrability answered from declared tail/small-jump
// exponents (numerical divergence detection is unreliable). Declared
// exponential tail rates are spot-checked at 20 log-spaced points.
class CustomMeasure final : public DensityMeasure {
public:
    struct Spec {
        RealFn density;
        double support_left = -kInf;
        double support_right = kInf;
        // density(x) decays at least like e^{-right_decay * x} for x >> 1
        // and e^{-left_decay * |x|} for x << -1.
        double right_decay = kInf;
        double left_decay = kInf;
        double bg_index = 0.0; // declared small-jump activity exponent
        bool finite_activity = true;
        std::optional<double> s1_alpha;
        std::optional<double> s2_alpha;
        bool declared_sampler = false; // opt-in for Monte Carlo jump sampling
        std::string label = "custom";
    };

    explicit CustomMeasure(Spec spec) : s_(std::move(spec)) {
        if (!s_.density) throw PreconditionViolated("custom measure needs a density");
        if (s_.support_right == kInf && s_.right_decay < kInf) spot_check_tail(+1.0, s_.right_decay);
        if (s_.support_left == -kInf && s_.left_decay < kInf) spot_check_tail(-1.0, s_.left_decay);
    }
    std::string name() const override { return s_.label; }
    bool finite_activity() const override { return s_.finite_activity; }
    double total_mass() const override {
        if (!s_.finite_activity) return kInf;
        return integrate([](double) { return 1.0; });
    }
    double density(double x) const override {
        if (x <= s_.support_left || x >= s_.support_right || x == 0.0) return 0.0;
        return s_.density(x);
    }
    double support_left() const override { return s_.support_left; }
    double support_right() const override { return s_.support_right; }
    bool exp_moment_finite(double p) const override {
        const bool right = s_.support_right < kInf || p < s_.right_decay;
        const bool left = s_.support_left > -kInf || -p < s_.left_decay;
        return right && left;
    }
    bool small_moment_finite(double beta) const override {
        return s_.finite_activity || beta > s_.bg_index;
    }
    std::optional<double> s1_alpha() const override { return s_.s1_alpha; }
    std::optional<double> s2_alpha() const override { return s_.s2_alpha; }
    bool sampler_declared() const override { return s_.declared_sampler; }

private:
    void spot_check_tail(double sign, double rate) const {
        const double ref = s_.density(sign * 1.0);
        for (int i = 0; i < 20; ++i) {
            const double x = std::pow(10.0, 0.0 + 1.5 * i / 19.0); // 1 .. ~31.6
            const double bound = 100.0 * std::max(ref, 1.0) * std::exp(-rate * (x - 1.0));
            if (s_.density(sign * x) > bound)
                throw PreconditionViolated("declared tail decay violated at x = " +
                                           std::to_string(sign * x));
        }
    }

    Spec s_;
};

// nu reweighted by w(x) = 1 - a (e^x - 1), the minimal-martingale tilt.
class ReweightedMeasure final : public JumpMeasure {
public:
    ReweightedMeasure(MeasurePtr base, double a) : base_(std::move(base)), a_(a) {
        for (const auto& at : base_->atoms())
            atoms_.push_back({at.x, at.intensity * weight(at.x)});
        if (a_ != 0.0 && base_->has_closed_k())
            q1_ = base_->integrate([](double x) { return std::abs(x) <= 1.0
                                                             ? x * std::expm1(x)
                                                             : 0.0; });
    }

    double weight(double x) const { return 1.0 - a_ * std::expm1(x); }
    double tilt_coefficient() const { return a_; }
    const JumpMeasure& base() const { return *base_; }

    std::string name() const override { return base_->name() + "*"; }
    bool is_zero() const override { return base_->is_zero(); }
    bool finite_activity() const override { return base_->finite_activity(); }
    double total_mass() const override {
        if (!finite_activity()) return kInf;
        return integrate([](double) { return 1.0; });
    }
    double density(double x) const override { return base_->density(x) * weight(x); }
    const std::vector<JumpAtom>& atoms() const override { return atoms_; }
    double support_left() const override { return base_->support_left(); }
    double support_right() const override { return base_->support_right(); }
    bool exp_moment_finite(double p) const override {
        if (a_ == 0.0) return base_->exp_moment_finite(p);
        return base_->exp_moment_finite(p) && base_->exp_moment_finite(p + 1.0);
    }
    bool small_moment_finite(double beta) const override {
        return base_->small_moment_finite(beta); // weight -> 1 at 0
    }
    std::optional<double> s1_alpha() const override { return base_->s1_alpha(); }
    std::optional<double> s2_alpha() const override { return base_->s2_alpha(); }
    bool sampler_declared() const override { return base_->sampler_declared(); }
    bool has_closed_k() const override { return base_->has_closed_k(); }
    Cplx closed_k(Cplx z) const override {
        const Cplx kz = base_->closed_k(z);
        if (a_ == 0.0) return kz;
        // (e^{zx}-1-zx1)(e^x-1) telescopes into compensated exponentials.
        return kz - a_ * (base_->closed_k(z + 1.0) - kz - base_->closed_k(1.0) - z * q1_);
    }
protected:
    double do_integrate(const RealFn& f, const QuadratureOptions& opts,
                        const std::vector<double>& breaks) const override {
        return base_->integrate([this, &f](double x) { return f(x) * weight(x); }, opts,
                                breaks);
    }
    Cplx do_integrate_c(const CplxFn& f, const QuadratureOptions& opts,
                        const std::vector<double>& breaks) const override {
        return base_->integrate_c([this, &f](double x) { return f(x) * weight(x); }, opts,
                                  breaks);
    }
    double do_integrate_region(const RealFn& f, double lo, double hi,
                               const QuadratureOptions& opts) const override {
        return base_->integrate_region([this, &f](double x) { return f(x) * weight(x); },
                                       lo, hi, opts);
    }

private:
    MeasurePtr base_;
    double a_;
    double q1_ = 0.0; // int_{|x|<=1} x (e^x - 1) d(base)
    std::vector<JumpAtom> atoms_;
};

// Image measure nu o h^{-1} for a strictly monotone C^1 map h with h(0) = 0.
class TransformedMeasure final : public JumpMeasure {
public:
    struct Spec {
        MeasurePtr base;
        std::function<double(double)> forward;       // h
        std::function<double(double)> inverse;       // h^{-1}
        std::function<double(double)> inverse_deriv; // d h^{-1} / dy
        bool increasing = true;
        double support_left = -kInf; // support of the image measure
        double support_right = kInf;
        // int_{|y|>1} e^{py} d(nu o h^{-1}) finiteness rule; required whenever
        // it will be queried (it is not derivable from the base in general).
        std::function<bool(double)> exp_moment_rule;
        std::string label;
    };

    explicit TransformedMeasure(Spec spec) : s_(std::move(spec)) {
        if (!s_.base || !s_.forward || !s_.inverse || !s_.inverse_deriv)
            throw PreconditionViolated("transformed measure needs base and map functions");
        for (const auto& at : s_.base->atoms())
            atoms_.push_back({s_.forward(at.x), at.intensity});
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const JumpAtom& a, const JumpAtom& b) { return a.x < b.x; });
    }

    std::string name() const override {
        return s_.label.empty() ? s_.base->name() + "~h" : s_.label;
    }
    bool is_zero() const override { return s_.base->is_zero(); }
    bool finite_activity() const override { return s_.base->finite_activity(); }
    double total_mass() const override { return s_.base->total_mass(); }
    double density(double y) const override {
        if (y <= s_.support_left || y >= s_.support_right || y == 0.0) return 0.0;
        return s_.base->density(s_.inverse(y)) * std::abs(s_.inverse_deriv(y));
    }
    const std::vector<JumpAtom>& atoms() const override { return atoms_; }
    double support_left() const override { return s_.support_left; }
    double support_right() const override { return s_.support_right; }
    bool exp_moment_finite(double p) const override {
        if (s_.exp_moment_rule) return s_.exp_moment_rule(p);
        // Bounded image support: every exponential moment is finite.
        if (s_.support_left > -kInf && s_.support_right < kInf) return true;
        throw PreconditionViolated("transformed measure " + name() +
                                   " has no exponential-moment rule");
    }
    bool small_moment_finite(double beta) const override {
        // h is a C^1 diffeomorphism near 0, so small-jump activity transfers.
        return s_.base->small_moment_finite(beta);
    }
    std::optional<double> s1_alpha() const override { return s_.base->s1_alpha(); }
    std::optional<double> s2_alpha() const override { return s_.base->s2_alpha(); }
    bool sampler_declared() const override { return s_.base->sampler_declared(); }
protected:
    // The map can saturate to +-inf in the far tails (e.g. log1p o expm1 past
    // double precision) where the base density is negligible; drop those.
    double do_integrate(const RealFn& f, const QuadratureOptions& opts,
                        const std::vector<double>& breaks) const override {
        auto g = [this, &f](double x) {
            const double y = s_.forward(x);
            return std::isfinite(y) ? f(y) : 0.0;
        };
        return s_.base->integrate(g, opts, mapped_breaks(breaks));
    }
    Cplx do_integrate_c(const CplxFn& f, const QuadratureOptions& opts,
                        const std::vector<double>& breaks) const override {
        auto g = [this, &f](double x) -> Cplx {
            const double y = s_.forward(x);
            return std::isfinite(y) ? f(y) : Cplx{};
        };
        return s_.base->integrate_c(g, opts, mapped_breaks(breaks));
    }
    double do_integrate_region(const RealFn& f, double lo, double hi,
                               const QuadratureOptions& opts) const override {
        const double a = pullback(std::max(lo, s_.support_left), true);
        const double b = pullback(std::min(hi, s_.support_right), false);
        auto g = [this, &f](double x) {
            const double y = s_.forward(x);
            return std::isfinite(y) ? f(y) : 0.0;
        };
        if (s_.increasing) return s_.base->integrate_region(g, a, b, opts);
        return s_.base->integrate_region(g, b, a, opts);
    }

private:
    std::vector<double> mapped_breaks(const std::vector<double>& breaks) const {
        std::vector<double> out;
        for (double y : std::initializer_list<double>{-1.0, 1.0})
            if (y > s_.support_left && y < s_.support_right) out.push_back(s_.inverse(y));
        for (double y : breaks)
            if (y > s_.support_left && y < s_.support_right) out.push_back(s_.inverse(y));
        return out;
    }
    double pullback(double y, bool is_low) const {
        if (y == s_.support_left || y == s_.support_right || !std::isfinite(y)) {
            const bool base_low = s_.increasing ? is_low : !is_low;
            return base_low ? s_.base->support_left() : s_.base->support_right();
        }
        return s_.inverse(y);
    }

    Spec s_;
    std::vector<JumpAtom> atoms_;
};

// ---- Factories ----

inline MeasurePtr zero_measure() { return std::make_shared<ZeroMeasure>(); }
inline MeasurePtr compound_poisson(std::vector<JumpAtom> atoms) {
    return std::make_shared<AtomicMeasure>(std::move(atoms));
}
inline MeasurePtr single_jump(double x, double intensity) {
    return std::make_shared<AtomicMeasure>(std::vector<JumpAtom>{{x, intensity}});
}
inline MeasurePtr merton_measure(double lambda, double mu_j, double sigma_j) {
    return std::make_shared<MertonMeasure>(lambda, mu_j, sigma_j);
}
inline MeasurePtr kou_measure(double lambda, double p, double eta_plus, double eta_minus) {
    return std::make_shared<KouMeasure>(lambda, p, eta_plus, eta_minus);
}
inline MeasurePtr cgmy_measure(double C, double G, double M, double Y) {
    return std::make_shared<CgmyMeasure>(C, G, M, Y);
}
inline MeasurePtr nig_measure(double alpha, double beta, double delta) {
    return std::make_shared<NigMeasure>(alpha, beta, delta);
}
inline MeasurePtr custom_measure(CustomMeasure::Spec spec) {
    return std::make_shared<CustomMeasure>(std::move(spec));
}
inline MeasurePtr reweighted_measure(MeasurePtr base, double a) {
    return std::make_shared<ReweightedMeasure>(std::move(base), a);
}
inline MeasurePtr transformed_measure(TransformedMeasure::Spec spec) {
    return std::make_shared<TransformedMeasure>(std::move(spec));
}

// ---- Common functionals ----

// K(z) = int (e^{zx} - 1 - zx 1_{|x|<=1}) nu(dx); closed form when available.
inline Cplx compensated_exp(const JumpMeasure& nu, Cplx z,
                            const QuadratureOptions& opts = {}) {
    if (nu.is_zero()) return {};
    if (nu.has_closed_k()) return nu.closed_k(z);
    return nu.integrate_c(
        [z](double x) {
            const Cplx w = z * x;
            return std::abs(x) <= 1.0 ? expm1_minus_c(w) : expm1_c(w);
        },
        opts);
}

inline double compensated_exp_real(const JumpMeasure& nu, double z,
                                   const QuadratureOptions& opts = {}) {
    if (nu.is_zero()) return 0.0;
    if (nu.has_closed_k()) return nu.closed_k(Cplx(z)).real();
    return nu.integrate(
        [z](double x) {
            const double w = z * x;
            return std::abs(x) <= 1.0 ? expm1_minus(w) : std::expm1(w);
        },
        opts);
}

// int (e^x - 1)^2 nu(dx); (e^x-1)^2 = K-integrand(2) - 2 K-integrand(1).
inline double squared_exp_jump(const JumpMeasure& nu, const QuadratureOptions& opts = {}) {
    if (nu.is_zero()) return 0.0;
    if (nu.has_closed_k())
        return (nu.closed_k(Cplx(2.0)) - 2.0 * nu.closed_k(Cplx(1.0))).real();
    return nu.integrate(
        [](double x) {
            const double e = std::expm1(x);
            return e * e;
        },
        opts);
}

// int_{|x|<=1} x (e^x - 1) nu(dx).
inline double q1_integral(const JumpMeasure& nu, const QuadratureOptions& opts = {}) {
    if (nu.is_zero()) return 0.0;
    return nu.integrate(
        [](double x) { return std::abs(x) <= 1.0 ? x * std::expm1(x) : 0.0; }, opts);
}

// nu({|x| > cut}), continuous part plus atoms.
inline double mass_above(const JumpMeasure& nu, double cut,
                         const QuadratureOptions& opts = {}) {
    if (nu.is_zero()) return 0.0;
    auto one = [](double) { return 1.0; };
    double m = nu.integrate_region(one, cut, kInf, opts) +
               nu.integrate_region(one, -kInf, -cut, opts);
    for (const auto& a : nu.atoms())
        if (std::abs(a.x) > cut) m += a.intensity;
    return m;
}

} // namespace levyhedge
