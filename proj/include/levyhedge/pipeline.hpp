#pragma once

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "levyhedge/classify.hpp"
#include "levyhedge/config.hpp"
#include "levyhedge/metrics.hpp"
#include "levyhedge/simulate.hpp"
#include "levyhedge/strategy.hpp"

namespace levyhedge {

namespace detail {

// Deterministic fan-out: jobs write into index-addressed slots, so the result
// does not depend on the thread count.
template <typename Fn>
inline void parallel_for(std::size_t total, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(std::min(threads, total), 1);
    if (threads == 1) {
        for (std::size_t i = 0; i < total; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next.fetch_add(1); i < total;
                     i = next.fetch_add(1))
                    fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

} // namespace detail

// Shared model wiring: physical triplet, price coefficients, the martingale
// measure change, and a pricing evaluator under the starred triplet.
struct ModelSetup {
    LevyTriplet triplet; // physical measure
    MarketCoefficients coeffs;
    MeasureChange change;
    std::shared_ptr<const SemigroupEvaluator> evaluator;
};

inline ModelSetup make_model_setup(const ExperimentConfig& c,
                                   const QuadratureOptions& qopts = {}) {
    ModelSetup s;
    s.triplet = build_triplet(c.model, qopts);
    s.coeffs = market_coefficients(s.triplet, qopts);
    s.change = minimal_martingale_measure(s.triplet, qopts);
    CosParams cp;
    s.evaluator = std::make_shared<SemigroupEvaluator>(
        s.change.starred, c.payoff, c.maturity, PricingMethod::FourierCos, cp,
        McParams{c.mc_paths, c.seed}, qopts);
    return s;
}

// Net exponent, rate parameter, and threshold exponent actually used by a
// run: the rate-table row unless the config overrides them.
struct RateParams {
    double theta = 1.0;
    double r = 1.0;
    double kappa = 0.0;
    std::string source; // table row name or "override"
};

inline RateParams resolve_rate_params(const ExperimentConfig& c,
                                      const LevyTriplet& triplet,
                                      const QuadratureOptions& qopts = {}) {
    RateParams out;
    if (c.theta_override && c.r_override) {
        out.theta = *c.theta_override;
        out.r = *c.r_override;
        out.source = "override";
    } else {
        ModelClass mc;
        mc.sigma = triplet.sigma;
        mc.small_jump = classify_small_jumps(*triplet.nu, 0.05, qopts);
        const Table1Choice ch = table1_parameters(mc, c.payoff);
        out.theta = c.theta_override.value_or(ch.theta);
        out.r = c.r_override.value_or(ch.r);
        out.source = table1_case_name(ch.case_id);
    }
    if (!(out.theta > 0.0 && out.theta <= 1.0))
        throw ConfigError("net exponent theta must lie in (0, 1]");
    if (!(out.r > 0.0)) throw ConfigError("rate parameter r must be positive");
    out.kappa = c.kappa_override.value_or(0.5 * (1.0 - out.theta));
    if (!(out.kappa >= 0.0 && out.kappa < 0.5))
        throw ConfigError("kappa must lie in [0, 1/2)");
    return out;
}

// Sub-cutoff jumps are Gaussian substitutes and can never trigger a
// correction; warn when the cutoff is not clearly below the threshold scale.
inline std::optional<std::string> threshold_coverage_warning(double delta,
                                                             double epsilon,
                                                             double kappa) {
    if (delta <= 0.0) return std::nullopt;
    std::ostringstream ss;
    if (kappa > 0.0) {
        ss << "threshold epsilon (T-t)^kappa decays to 0 at maturity; jumps below "
              "the simulation cutoff delta = "
           << delta << " cannot trigger corrections there";
        return ss.str();
    }
    if (std::expm1(delta) >= epsilon) {
        ss << "simulation cutoff delta = " << delta
           << " is not below the correction threshold epsilon = " << epsilon;
        return ss.str();
    }
    return std::nullopt;
}

struct PathRecord {
    std::uint64_t seed = 0;
    double e_rm = 0.0;
    double e_corr = 0.0;
    std::size_t corrections = 0;
};

struct NetResult {
    std::size_t n = 0;
    double epsilon = 0.0;
    double mesh = 0.0;
    double mean_corrections = 0.0;
    std::size_t oracle_exceedances = 0; // paths beyond the Richardson tolerance
    NormEstimate l2_corr, l2_rm;
    std::vector<PathRecord> records;
};

struct RatesOutcome {
    RateParams params;
    std::vector<NetResult> per_n;
    RateReport corrected;
    RateReport riemann;
    std::vector<std::string> warnings;
    bool synthetic = false;
};

// Hedging batch for a single net size: adapted net, physical-measure paths
// with the knots merged into the fine grid, corrected scheme vs the
// fine-grid oracle. The oracle's left-point error fluctuates at the Brownian
// rate grid^{-1/2} (measured ~0.3e-3 median at 2^14 for Merton+Call), so the
// per-path Richardson acceptance scales accordingly with ~2x tail headroom.
inline double oracle_tolerance(std::size_t grid_size) {
    return 0.5 / std::sqrt(double(grid_size));
}

inline NetResult run_net_batch(const ExperimentConfig& c, const LevyTriplet& triplet,
                               const StrategyTable& table, const RateParams& rp,
                               std::size_t n, std::size_t threads,
                               const QuadratureOptions& qopts = {}) {
    NetResult out;
    out.n = n;
    out.epsilon = c.epsilon_fixed ? c.epsilon_value
                                  : std::pow(double(n), -1.0 / (2.0 * rp.r));
    const TimeNet net = adapted_time_net(n, rp.theta, c.maturity);
    out.mesh = mesh_size(net, rp.theta);

    SimOptions so;
    so.grid_size = c.grid_size;
    so.extra_times = net.knots;
    const PathSimulator sim(triplet, c.maturity, so, qopts);

    StrategyFn fn = [&table](double t, double s) { return table.theta(t, s); };
    out.records.resize(c.paths_per_n);
    const double otol = oracle_tolerance(c.grid_size);
    std::atomic<std::size_t> exceed{0};
    detail::parallel_for(c.paths_per_n, threads, [&](std::size_t i) {
        const SamplePath p = sim.simulate(c.seed, i);
        const CorrectedResult cr =
            corrected_approx(p, fn, net, out.epsilon, rp.kappa, c.s0);
        // Per-path Richardson acceptance is statistical: the fine value is
        // kept either way, but a batch with too many exceedances aborts.
        const double fine = fine_grid_integral(p, fn, c.s0, 1);
        const double coarse = fine_grid_integral(p, fn, c.s0, 2);
        if (std::abs(fine - coarse) > otol * std::max(std::abs(fine), 1.0))
            exceed.fetch_add(1);
        out.records[i] = {p.seed, fine - cr.a_rm, fine - cr.a_corr,
                          cr.correction_count};
    });
    out.oracle_exceedances = exceed.load();
    if (out.oracle_exceedances >
        std::max<std::size_t>(std::size_t(0.01 * double(c.paths_per_n)), 2))
        throw OracleNotConverged(
            std::to_string(out.oracle_exceedances) + " of " +
            std::to_string(c.paths_per_n) +
            " paths moved beyond the refinement tolerance at n = " +
            std::to_string(n));

    std::vector<double> ec(c.paths_per_n), er(c.paths_per_n);
    double nc = 0.0;
    for (std::size_t i = 0; i < c.paths_per_n; ++i) {
        ec[i] = out.records[i].e_corr;
        er[i] = out.records[i].e_rm;
        nc += double(out.records[i].corrections);
    }
    out.mean_corrections = nc / double(c.paths_per_n);
    out.l2_corr = lp_norm(ec, 2.0);
    out.l2_rm = lp_norm(er, 2.0);
    return out;
}

// Replay mode: errors come from a text file of "n error" lines instead of
// fresh simulation; used to validate the regression machinery end to end.
inline std::map<double, std::vector<double>> load_synthetic_errors(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open synthetic error file: " + path);
    std::map<double, std::vector<double>> runs;
    double n = 0.0, e = 0.0;
    while (in >> n >> e) runs[n].push_back(e);
    if (runs.empty()) throw ConfigError("synthetic error file is empty: " + path);
    return runs;
}

inline RatesOutcome run_rates(const ExperimentConfig& c, std::size_t threads = 1,
                              const QuadratureOptions& qopts = {}) {
    if (c.n_values.size() < 4)
        throw ConfigError("rate experiments need >= 4 n values");
    RatesOutcome out;

    if (!c.synthetic_errors.empty()) {
        out.synthetic = true;
        out.params.r = c.r_override.value_or(1.0);
        out.params.theta = c.theta_override.value_or(1.0);
        out.params.kappa = c.kappa_override.value_or(0.0);
        out.params.source = "replay";
        const auto runs = load_synthetic_errors(c.synthetic_errors);
        for (const auto& [n, errs] : runs) {
            NetResult nr;
            nr.n = std::size_t(n);
            nr.l2_corr = errs.size() >= 2 ? lp_norm(errs, 2.0) : NormEstimate{};
            out.per_n.push_back(std::move(nr));
        }
        out.corrected = convergence_rate(runs, out.params.r);
        out.riemann = out.corrected;
        return out;
    }

    if (c.paths_per_n < 1000)
        throw ConfigError("rate experiments need paths_per_n >= 1000");

    const ModelSetup setup = make_model_setup(c, qopts);
    out.params = resolve_rate_params(c, setup.triplet, qopts);

    StrategyTableParams tp;
    tp.t_cells = c.table_t_cells;
    tp.y_cells = c.table_y_cells;
    const StrategyTable table(setup.evaluator, setup.coeffs, c.s0, tp, qopts);

    // One shared sampler probe just for the cutoff warning.
    {
        const double delta = default_ar_cutoff(*setup.triplet.nu, 1e3, qopts);
        const double eps_min =
            c.epsilon_fixed ? c.epsilon_value
                            : std::pow(double(c.n_values.back()),
                                       -1.0 / (2.0 * out.params.r));
        if (auto w = threshold_coverage_warning(delta, eps_min, out.params.kappa))
            out.warnings.push_back(*w);
    }

    std::map<double, std::vector<double>> runs_corr, runs_rm;
    for (std::size_t n : c.n_values) {
        NetResult nr =
            run_net_batch(c, setup.triplet, table, out.params, n, threads, qopts);
        auto& rc = runs_corr[double(n)];
        auto& rr = runs_rm[double(n)];
        rc.reserve(nr.records.size());
        rr.reserve(nr.records.size());
        for (const auto& rec : nr.records) {
            rc.push_back(rec.e_corr);
            rr.push_back(rec.e_rm);
        }
        out.per_n.push_back(std::move(nr));
    }
    out.corrected = convergence_rate(runs_corr, out.params.r);
    out.riemann = convergence_rate(runs_rm, out.params.r);
    return out;
}

// ---- martingale-representation residual check ----------------------------
//
// Under the martingale measure, F(t, x) = E*[f(x + X_{T-t})] satisfies
//   f(X_T) = F(0, 0) + int sigma d_x F dW* + int (F(t, x+z) - F(t, x)) dN~*.
// The check discretizes the right-hand side on the simulation's fine grid
// using the simulated dynamics (exact jumps above the cutoff plus the
// Gaussian substitute), so for finite-activity models the only residual is
// time discretization. Kernels are tabulated per time slice like the
// strategy table.
class RepKernelTable {
public:
    RepKernelTable(std::shared_ptr<const SemigroupEvaluator> ev, double y0,
                   double delta, std::size_t t_cells = 128,
                   std::size_t x_cells = 256, const QuadratureOptions& qopts = {})
        : ev_(std::move(ev)), delta_(delta) {
        const double T = ev_->maturity();
        const LevyTriplet& t = ev_->triplet();
        if (ev_->method() != PricingMethod::FourierCos)
            throw PreconditionViolated("representation kernels need the cosine method");

        const double t_end = T * (1.0 - kMaturityGuard);
        const std::size_t mt = std::max<std::size_t>(t_cells, 8);
        const std::size_t m_tail = mt / 4, m_head = mt - m_tail;
        for (std::size_t i = 0; i < m_head; ++i)
            times_.push_back(T * 0.95 * double(i) / double(m_head));
        double frac = 0.05;
        const double rho = std::pow(1e-7 / 0.05, 1.0 / double(m_tail - 1));
        for (std::size_t i = 0; i + 1 < m_tail; ++i) {
            const double tt = T * (1.0 - frac);
            if (tt > times_.back() && tt < t_end) times_.push_back(tt);
            frac *= rho;
        }
        times_.push_back(t_end);

        const double var =
            t.nu->is_zero()
                ? 0.0
                : t.nu->integrate([](double x) { return x * x; }, qopts);
        const double sd = std::sqrt((t.sigma * t.sigma + var) * T);
        const double half = 10.0 * std::max(sd, 0.05);
        z0_ = std::log(y0) - half; // grid in log price, centered at the spot
        dz_ = 2.0 * half / double(x_cells);
        nz_ = x_cells + 1;
        sigma_sim_ = sigma_sim(t, delta_, qopts);

        F_.resize(times_.size());
        D_.resize(times_.size());
        J_.resize(times_.size());
        for (std::size_t i = 0; i < times_.size(); ++i)
            build_slice(i, qopts);
    }

    static double sigma_sim(const LevyTriplet& t, double delta,
                            const QuadratureOptions& qopts) {
        double v = t.sigma * t.sigma;
        if (delta > 0.0 && !t.nu->is_zero())
            v += t.nu->integrate_region([](double x) { return x * x; }, -delta,
                                        delta, qopts);
        return std::sqrt(v);
    }

    double value(double t, double x) const { return interp(F_, t, x); }
    double diffusion(double t, double x) const { return interp(D_, t, x); }
    double compensator(double t, double x) const { return interp(J_, t, x); }
    double delta() const { return delta_; }
    double sim_sigma() const { return sigma_sim_; }

private:
    void build_slice(std::size_t i, const QuadratureOptions& qopts) {
        const auto slice = ev_->slice(times_[i]);
        const double reach = 1.5 * (dz_ * double(nz_ - 1)) * 0.5;
        const std::ptrdiff_t pad = std::ptrdiff_t(std::ceil(reach / dz_)) + 2;
        detail::UniformCubic F;
        F.z0 = z0_ - double(pad) * dz_;
        F.dz = dz_;
        F.v.resize(nz_ + 2 * std::size_t(pad));
        for (std::size_t j = 0; j < F.v.size(); ++j)
            F.v[j] = slice.value(std::exp(F.z0 + double(j) * dz_));

        detail::UniformCubic D, J;
        D.z0 = J.z0 = z0_;
        D.dz = J.dz = dz_;
        D.v.resize(nz_);
        J.v.resize(nz_);
        QuadratureOptions jq = qopts;
        jq.abs_tol = std::max(jq.abs_tol, 1e-10);
        jq.rel_tol = std::max(jq.rel_tol, 1e-7);
        const MeasurePtr& nu = ev_->triplet().nu;
        for (std::size_t j = 0; j < nz_; ++j) {
            const double z = z0_ + double(j) * dz_;
            const double y = std::exp(z);
            // d_x F = y d_y G.
            D.v[j] = sigma_sim_ > 0.0 ? sigma_sim_ * y * slice.gradient(y) : 0.0;
            if (!nu->is_zero()) {
                const double f0 = F(z);
                auto f = [&](double x) {
                    if (std::abs(x) <= delta_) return 0.0;
                    return F(z + x) - f0;
                };
                J.v[j] = nu->integrate(f, jq, {-delta_, delta_});
            }
        }
        F_[i] = std::move(F);
        D_[i] = std::move(D);
        J_[i] = std::move(J);
    }

    double interp(const std::vector<detail::UniformCubic>& tab, double t,
                  double x) const {
        const double tc = std::clamp(t, 0.0, times_.back());
        const auto it = std::upper_bound(times_.begin(), times_.end(), tc);
        const std::size_t j =
            std::min<std::size_t>(it - times_.begin(), times_.size() - 1);
        const std::size_t i = j == 0 ? 0 : j - 1;
        const double t0 = times_[i], t1 = times_[j];
        const double w = t1 > t0 ? std::clamp((tc - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
        return tab[i](x) * (1.0 - w) + tab[j](x) * w;
    }

    std::shared_ptr<const SemigroupEvaluator> ev_;
    double delta_ = 0.0;
    double sigma_sim_ = 0.0;
    std::vector<double> times_;
    std::vector<detail::UniformCubic> F_, D_, J_;
    double z0_ = 0.0, dz_ = 1.0;
    std::size_t nz_ = 0;
};

struct RepLevel {
    std::size_t grid_size = 0;
    NormEstimate residual;
};

struct RepOutcome {
    double value0 = 0.0;  // F(0, 0) = E* f(X_T)
    double f_norm = 0.0;  // empirical L2 norm of f(X_T) at the finest level
    std::vector<RepLevel> levels;
    bool monotone = false;
    double final_relative = 0.0; // residual / f_norm at the finest level
};

inline RepOutcome run_repcheck(const ExperimentConfig& c, std::size_t threads = 1,
                               const QuadratureOptions& qopts = {}) {
    if (c.rep_levels.size() < 2)
        throw ConfigError("representation check needs >= 2 refinement levels");
    const ModelSetup setup = make_model_setup(c, qopts);
    const LevyTriplet& starred = setup.change.starred;
    const double T = c.maturity;
    const double delta = default_ar_cutoff(*starred.nu, 1e3, qopts);
    const RepKernelTable ker(setup.evaluator, c.s0, delta, c.table_t_cells,
                             c.table_y_cells, qopts);
    const double sig = ker.sim_sigma();
    const double ls0 = std::log(c.s0); // kernels indexed by log price

    RepOutcome out;
    out.value0 = setup.evaluator->value(0.0, c.s0);

    std::vector<double> f_final;
    for (std::size_t lvl = 0; lvl < c.rep_levels.size(); ++lvl) {
        SimOptions so;
        so.grid_size = c.rep_levels[lvl];
        so.delta_override = delta;
        const PathSimulator sim(starred, T, so, qopts);
        // Drift rate of the simulated continuous part (Brownian + substitute
        // Gaussian carry no drift; the compensation shift is deterministic).
        const double drift_rate = starred.gamma - sim.sampler().comp_drift();
        std::vector<double> res(c.rep_paths), fvals(c.rep_paths);
        detail::parallel_for(c.rep_paths, threads, [&](std::size_t i) {
            const SamplePath p = sim.simulate(c.seed + 1, i);
            double acc = out.value0;
            std::size_t jn = 0;
            double t_prev = 0.0, x_prev = 0.0;
            // Left-point diffusion term sigma dF dW with dW recovered from the
            // continuous log increment: dW = (dx_cont - drift dt) / sigma. The
            // kernel already carries the sigma factor.
            auto diffuse = [&](double t, double x_left) {
                const double dt = t - t_prev;
                if (dt > 0.0 && sig > 0.0)
                    acc += ker.diffusion(t_prev, ls0 + x_prev) *
                           (x_left - x_prev - drift_rate * dt) / sig;
            };
            for (std::size_t g = 1; g < p.grid.size(); ++g) {
                const double tg = p.grid[g];
                const double t_cell = t_prev;
                const double x_cell = x_prev;
                while (jn < p.jumps.size() && p.jumps[jn].time <= tg) {
                    const PathJump& j = p.jumps[jn];
                    diffuse(j.time, j.pre_x);
                    acc += ker.value(j.time, ls0 + j.pre_x + j.x) -
                           ker.value(j.time, ls0 + j.pre_x);
                    t_prev = j.time;
                    x_prev = j.pre_x + j.x;
                    ++jn;
                }
                diffuse(tg, p.logx[g]);
                // Jump compensator on the grid cell, left-point state.
                acc -= ker.compensator(t_cell, ls0 + x_cell) * (tg - t_cell);
                t_prev = tg;
                x_prev = p.logx[g];
            }
            const double f = c.payoff(c.s0 * std::exp(p.logx.back()));
            res[i] = f - acc;
            fvals[i] = f;
        });
        RepLevel rl;
        rl.grid_size = c.rep_levels[lvl];
        rl.residual = lp_norm(res, 2.0);
        out.levels.push_back(rl);
        if (lvl + 1 == c.rep_levels.size()) f_final = std::move(fvals);
    }
    out.f_norm = lp_norm(f_final, 2.0).value;
    out.monotone = true;
    for (std::size_t i = 1; i < out.levels.size(); ++i)
        out.monotone = out.monotone && out.levels[i].residual.value <=
                                           out.levels[i - 1].residual.value;
    out.final_relative =
        out.f_norm > 0.0 ? out.levels.back().residual.value / out.f_norm : 0.0;
    return out;
}

} // namespace levyhedge
