#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "levyhedge/errors.hpp"
#include "levyhedge/measure.hpp"
#include "levyhedge/rng.hpp"
#include "levyhedge/triplet.hpp"

namespace levyhedge {

namespace detail {

// Inverse-CDF table for jump sizes on one side of the origin, built from the
// continuous density by per-cell quadrature. Inversion is piecewise linear in
// mass (uniform within a cell).
struct SideTable {
    std::vector<double> nodes;   // strictly monotone toward the tail
    std::vector<double> cum;     // cumulative masses, cum.back() = total
    double total = 0.0;

    double draw(double u) const { // u in [0, total)
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t j = std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
        const double lo = j == 0 ? 0.0 : cum[j - 1];
        const double m = cum[j] - lo;
        const double w = m > 0.0 ? (u - lo) / m : 0.5;
        return nodes[j] + w * (nodes[j + 1] - nodes[j]);
    }
};

inline SideTable build_side_table(const JumpMeasure& nu, double a, double b,
                                  bool log_spaced, int cells,
                                  const QuadratureOptions& opts) {
    // a, b signed with |a| < |b|; integrates the continuous part cell by cell.
    SideTable t;
    t.nodes.resize(cells + 1);
    for (int j = 0; j <= cells; ++j) {
        const double w = double(j) / cells;
        t.nodes[j] = log_spaced
                         ? std::copysign(std::exp(std::log(std::abs(a)) +
                                                  w * (std::log(std::abs(b)) -
                                                       std::log(std::abs(a)))),
                                         b)
                         : a + w * (b - a);
    }
    t.nodes.front() = a;
    t.nodes.back() = b;
    t.cum.resize(cells);
    double c = 0.0;
    auto one = [](double) { return 1.0; };
    for (int j = 0; j < cells; ++j) {
        const double lo = std::min(t.nodes[j], t.nodes[j + 1]);
        const double hi = std::max(t.nodes[j], t.nodes[j + 1]);
        c += std::max(nu.integrate_region(one, lo, hi, opts), 0.0);
        t.cum[j] = c;
    }
    t.total = c;
    return t;
}

// Extend the integration limit outward until the remaining tail is negligible.
inline double effective_tail_edge(const JumpMeasure& nu, double start, double sign,
                                  double scale, const QuadratureOptions& opts) {
    auto one = [](double) { return 1.0; };
    double edge = std::max(std::abs(start), 1.0) * 2.0;
    for (int i = 0; i < 60; ++i) {
        const double next = edge * 2.0;
        const double m = sign > 0 ? nu.integrate_region(one, edge, next, opts)
                                  : nu.integrate_region(one, -next, -edge, opts);
        if (m < 1e-12 * std::max(scale, 1e-30)) return sign * edge;
        edge = next;
    }
    throw QuadratureFailure("jump tail does not decay");
}

} // namespace detail

// Draws jump sizes of nu restricted to |x| > delta; jumps below delta are
// absorbed into a Gaussian with matched variance (their compensated sum has
// mean zero, so only the variance transfers).
class JumpSampler {
public:
    JumpSampler() = default; // zero measure

    JumpSampler(MeasurePtr nu, double delta, const QuadratureOptions& opts = {})
        : nu_(std::move(nu)), delta_(delta) {
        if (!nu_ || nu_->is_zero()) return;
        if (!nu_->sampler_declared())
            throw UnsupportedSampler("no sampler declared for " + nu_->name());
        if (delta_ < 0.0 || delta_ > 1.0)
            throw PreconditionViolated("AR cutoff must lie in [0, 1]");
        auto one = [](double) { return 1.0; };

        for (const auto& a : nu_->atoms()) {
            if (std::abs(a.x) > delta_) {
                atom_x_.push_back(a.x);
                atom_cum_.push_back((atom_cum_.empty() ? 0.0 : atom_cum_.back()) +
                                    a.intensity);
            } else {
                ar_var_ += a.x * a.x * a.intensity;
            }
        }
        const double atom_rate = atom_cum_.empty() ? 0.0 : atom_cum_.back();

        // Continuous component above the cutoff.
        const double lo_edge = std::max(nu_->support_left(), -kInf);
        const double hi_edge = std::min(nu_->support_right(), kInf);
        double cont_rate = 0.0;
        if (auto* m = dynamic_cast<const MertonMeasure*>(nu_.get())) {
            merton_ = m;
            cont_rate = m->lambda();
        } else if (auto* k = dynamic_cast<const KouMeasure*>(nu_.get())) {
            kou_ = k;
            cont_rate = k->lambda();
        } else {
            const double up = nu_->integrate_region(one, delta_, kInf, opts);
            const double dn = nu_->integrate_region(one, -kInf, -delta_, opts);
            const int cells = 512;
            if (up > 0.0) {
                const double a = std::max(delta_, 1e-12);
                const double b = hi_edge < kInf
                                     ? hi_edge
                                     : detail::effective_tail_edge(*nu_, 1.0, +1.0, up, opts);
                pos_ = detail::build_side_table(*nu_, a, b, delta_ > 0.0, cells, opts);
            }
            if (dn > 0.0) {
                const double a = -std::max(delta_, 1e-12);
                const double b = lo_edge > -kInf
                                     ? lo_edge
                                     : detail::effective_tail_edge(*nu_, 1.0, -1.0, dn, opts);
                neg_ = detail::build_side_table(*nu_, a, b, delta_ > 0.0, cells, opts);
            }
            cont_rate = (pos_ ? pos_->total : 0.0) + (neg_ ? neg_->total : 0.0);
        }
        rate_ = atom_rate + cont_rate;

        if (delta_ > 0.0)
            ar_var_ += nu_->integrate_region([](double x) { return x * x; }, -delta_,
                                             delta_, opts);
        // Compensation for jumps in delta < |x| <= 1 that are now added raw.
        comp_drift_ = nu_->integrate(
            [this](double x) { return std::abs(x) > delta_ && std::abs(x) <= 1.0 ? x : 0.0; },
            opts, {delta_, -delta_});
    }

    double rate() const { return rate_; }          // nu(|x| > delta)
    double delta() const { return delta_; }
    double ar_variance() const { return ar_var_; } // int_{|x|<=delta} x^2 nu
    double comp_drift() const { return comp_drift_; }

    double draw(PathRng& rng) const {
        double u = rate_ * rng.uniform();
        const double atom_rate = atom_cum_.empty() ? 0.0 : atom_cum_.back();
        if (u < atom_rate) {
            const auto it = std::upper_bound(atom_cum_.begin(), atom_cum_.end(), u);
            return atom_x_[std::min<std::size_t>(it - atom_cum_.begin(),
                                                 atom_x_.size() - 1)];
        }
        u -= atom_rate;
        if (merton_) return rng.normal(merton_->mu_j(), merton_->sigma_j());
        if (kou_) {
            if (u < kou_->p() * kou_->lambda())
                return rng.exponential(kou_->eta_plus());
            return -rng.exponential(kou_->eta_minus());
        }
        if (pos_ && u < pos_->total) return pos_->draw(u);
        if (neg_) return neg_->draw(u - (pos_ ? pos_->total : 0.0));
        return 0.0; // rate 0: never reached
    }

private:
    MeasurePtr nu_;
    double delta_ = 0.0;
    double rate_ = 0.0;
    double ar_var_ = 0.0;
    double comp_drift_ = 0.0;
    std::vector<double> atom_x_, atom_cum_;
    const MertonMeasure* merton_ = nullptr;
    const KouMeasure* kou_ = nullptr;
    std::optional<detail::SideTable> pos_, neg_;
};

// Default Asmussen-Rosinski cutoff: smallest power of two with
// nu(|x| > delta) within the per-unit-time jump-rate budget.
inline double default_ar_cutoff(const JumpMeasure& nu, double rate_budget = 1e3,
                                const QuadratureOptions& opts = {}) {
    if (nu.is_zero() || nu.finite_activity()) return 0.0;
    double delta = 1.0;
    for (int k = 0; k < 48; ++k) {
        const double next = delta * 0.5;
        if (mass_above(nu, next, opts) > rate_budget) break;
        delta = next;
    }
    return delta;
}

struct PathJump {
    double time;
    double x;     // log-price jump size
    double pre_x; // left limit of log X at the jump time
};

struct SamplePath {
    std::vector<double> grid; // times, grid[0] = 0, grid.back() = T
    std::vector<double> logx; // X on the grid (right-continuous values)
    std::vector<PathJump> jumps;
    std::uint64_t seed = 0;   // mixed per-path seed actually used
    double small_jump_sigma = 0.0;
    double maturity = 0.0;

    // Index of the last grid time <= t.
    std::size_t index_at(double t) const {
        const auto it = std::upper_bound(grid.begin(), grid.end(), t);
        return it == grid.begin() ? 0 : std::size_t(it - grid.begin()) - 1;
    }
    double log_at(double t) const { return logx[index_at(t)]; }
};

struct SimOptions {
    std::size_t grid_size = std::size_t(1) << 14;
    double rate_budget = 1e3;
    std::optional<double> delta_override;
    double tail_fraction = 0.05;  // geometrically refined portion before T
    double tail_resolution = 1e-9; // smallest grid gap as a fraction of T
    std::vector<double> extra_times; // merged into the grid (e.g. net knots)
};

// Simulates X under the given triplet: exact jumps above the cutoff plus a
// Gaussian substitute for the rest, on a deterministic fine grid refined
// geometrically near maturity.
class PathSimulator {
public:
    PathSimulator(LevyTriplet t, double T, SimOptions opts = {},
                  const QuadratureOptions& qopts = {})
        : t_(std::move(t)), T_(T), opts_(opts) {
        if (!(T > 0.0)) throw PreconditionViolated("maturity must be positive");
        const double delta = opts.delta_override
                                 ? *opts.delta_override
                                 : default_ar_cutoff(*t_.nu, opts.rate_budget, qopts);
        sampler_ = JumpSampler(t_.nu, delta, qopts);
        gamma_eff_ = t_.gamma - sampler_.comp_drift();
        sigma_eff_ = std::sqrt(t_.sigma * t_.sigma + sampler_.ar_variance());
        build_grid();
    }

    const std::vector<double>& grid() const { return grid_; }
    const JumpSampler& sampler() const { return sampler_; }
    double small_jump_sigma() const { return std::sqrt(sampler_.ar_variance()); }
    double maturity() const { return T_; }

    // Terminal draw only (no grid): X_tau.
    double terminal(double tau, PathRng& rng) const {
        double x = gamma_eff_ * tau + sigma_eff_ * std::sqrt(tau) * rng.normal();
        if (sampler_.rate() > 0.0) {
            const std::uint64_t n = rng.poisson(sampler_.rate() * tau);
            for (std::uint64_t i = 0; i < n; ++i) x += sampler_.draw(rng);
        }
        return x;
    }

    SamplePath simulate(std::uint64_t master_seed, std::uint64_t path_index) const {
        PathRng rng(master_seed, path_index);
        SamplePath p;
        p.seed = mix_seed(master_seed, path_index);
        p.maturity = T_;
        p.small_jump_sigma = small_jump_sigma();
        p.grid = grid_;

        std::vector<std::pair<double, double>> jumps; // (time, size)
        if (sampler_.rate() > 0.0) {
            const std::uint64_t n = rng.poisson(sampler_.rate() * T_);
            jumps.reserve(n);
            for (std::uint64_t i = 0; i < n; ++i) {
                double u = rng.uniform();
                while (u <= 0.0 || u >= 1.0) u = rng.uniform(); // keep times in (0,T)
                jumps.emplace_back(u * T_, 0.0);
            }
            std::sort(jumps.begin(), jumps.end());
            for (auto& j : jumps) j.second = sampler_.draw(rng);
        }

        p.logx.reserve(grid_.size());
        p.jumps.reserve(jumps.size());
        double x = 0.0, t = 0.0;
        std::size_t jn = 0;
        auto advance = [&](double to) {
            const double dt = to - t;
            if (dt > 0.0)
                x += gamma_eff_ * dt + sigma_eff_ * std::sqrt(dt) * rng.normal();
            t = to;
        };
        for (double g : grid_) {
            while (jn < jumps.size() && jumps[jn].first <= g) {
                advance(jumps[jn].first);
                p.jumps.push_back({jumps[jn].first, jumps[jn].second, x});
                x += jumps[jn].second;
                ++jn;
            }
            advance(g);
            p.logx.push_back(x);
        }
        return p;
    }

private:
    void build_grid() {
        const std::size_t m = std::max<std::size_t>(opts_.grid_size, 16);
        const std::size_t m_tail = m / 4;
        const std::size_t m_head = m - m_tail;
        const double split = T_ * (1.0 - opts_.tail_fraction);
        grid_.reserve(m + 1);
        for (std::size_t i = 0; i < m_head; ++i)
            grid_.push_back(split * double(i) / double(m_head));
        // Geometric approach: gaps shrink from tail_fraction*T down to
        // tail_resolution*T over m_tail points.
        const double rho = std::pow(opts_.tail_resolution / opts_.tail_fraction,
                                    1.0 / double(std::max<std::size_t>(m_tail, 2) - 1));
        double frac = opts_.tail_fraction;
        for (std::size_t i = 0; i < m_tail; ++i) {
            const double t = T_ * (1.0 - frac);
            if (t > grid_.back() && t < T_) grid_.push_back(t);
            frac *= rho;
        }
        grid_.push_back(T_);
        if (!opts_.extra_times.empty()) {
            for (double t : opts_.extra_times)
                if (t > 0.0 && t < T_) grid_.push_back(t);
            std::sort(grid_.begin(), grid_.end());
            grid_.erase(std::unique(grid_.begin(), grid_.end()), grid_.end());
        }
    }

    LevyTriplet t_;
    double T_;
    SimOptions opts_;
    JumpSampler sampler_;
    double gamma_eff_ = 0.0, sigma_eff_ = 0.0;
    std::vector<double> grid_;
};

} // namespace levyhedge
