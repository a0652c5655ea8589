#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "levyhedge/pipeline.hpp"
#include "levyhedge/serialize.hpp"

namespace fs = std::filesystem;
using namespace levyhedge;

namespace {

// Exit codes: 0 success/consistent, 1 usage or config error, 2 rate verdict
// Inconsistent, 3 numerical failure.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInconsistent = 2;
constexpr int kExitNumerical = 3;

struct Cli {
    std::string config_path;
    std::string out_dir = ".";
    std::size_t threads = 1;
};

struct Loaded {
    Toml toml;
    ExperimentConfig cfg;
};

Loaded load(const Cli& cli) {
    Loaded l;
    l.toml = Toml::parse_file(cli.config_path);
    l.cfg = load_experiment(l.toml);
    if (const char* env = std::getenv("LEVYHEDGE_SEED")) {
        try {
            l.cfg.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("LEVYHEDGE_SEED is not an integer");
        }
    }
    return l;
}

Json triplet_json(const LevyTriplet& t, const std::vector<double>& params = {}) {
    Json j;
    j["gamma"] = t.gamma;
    j["sigma"] = t.sigma;
    Json nu;
    nu["family"] = t.nu->name();
    if (!params.empty()) nu["params"] = params;
    j["nu"] = std::move(nu);
    j["measure_tag"] = t.tag == MeasureTag::Original   ? "original"
                       : t.tag == MeasureTag::Minimal ? "minimal"
                                                      : t.tag_name;
    return j;
}

int cmd_coeffs(const Cli& cli) {
    const Loaded l = load(cli);
    const LevyTriplet t = build_triplet(l.cfg.model);
    const MarketCoefficients mc = market_coefficients(t);
    const MmmCheck chk = check_mmm_assumption(t);
    Json j;
    j["triplet"] = triplet_json(t, l.cfg.model.params);
    j["gamma_s"] = mc.gamma_s;
    j["norm_sigma_nu"] = mc.norm_sigma_nu;
    j["tradeoff_slope"] = mc.tradeoff_slope;
    Json flags;
    for (const auto& [p, ok] : mc.exp_moment_flags)
        flags[format_number(p)] = ok;
    j["exp_moment_flags"] = std::move(flags);
    j["martingale_model"] = mc.gamma_s == 0.0;
    Json a;
    a["holds"] = chk.holds;
    a["margin"] = chk.margin;
    a["via_sufficient_condition"] = chk.via_sufficient;
    j["assumption"] = std::move(a);
    write_json(fs::path(cli.out_dir) / "coeffs.json", j, l.cfg.hash);
    std::printf("gamma_s = %.12g  norm = %.12g  slope = %.12g  assumption %s\n",
                mc.gamma_s, mc.norm_sigma_nu, mc.tradeoff_slope,
                chk.holds ? "holds" : "VIOLATED");
    return kExitOk;
}

int cmd_mmm(const Cli& cli) {
    const Loaded l = load(cli);
    const LevyTriplet t = build_triplet(l.cfg.model);
    const MeasureChange ch = minimal_martingale_measure(t);
    const MarketCoefficients starred = market_coefficients(ch.starred);
    Json j;
    j["u_coefficient"] = ch.u_coefficient;
    j["starred"] = triplet_json(ch.starred);
    j["starred_gamma_s"] = starred.gamma_s; // should vanish
    j["v_triplet"] = triplet_json(ch.v_triplet);
    for (double s : {2.0, 3.0}) {
        const std::string key = "rh_constant_s" + std::to_string(int(s));
        try {
            j[key] = reverse_holder_constant(ch.v_triplet, s, l.cfg.maturity,
                                             RhDirection::PstarOverP);
        } catch (const DivergentExponentialMoment&) {
            j[key] = nullptr;
        }
    }
    write_json(fs::path(cli.out_dir) / "mmm.json", j, l.cfg.hash);
    std::printf("u = %.12g  starred gamma_s = %.3e\n", ch.u_coefficient,
                starred.gamma_s);
    return kExitOk;
}

int cmd_strategy(const Cli& cli) {
    const Loaded l = load(cli);
    if (l.cfg.t_grid.empty() || l.cfg.y_grid.empty())
        throw ConfigError("strategy surface needs strategy.t_grid and strategy.y_grid");
    const ModelSetup s = make_model_setup(l.cfg);
    CsvWriter csv(fs::path(cli.out_dir) / "strategy.csv", l.cfg.hash,
                  {"t", "y", "theta", "diffusion_part", "jump_part"});
    for (double t : l.cfg.t_grid)
        for (double y : l.cfg.y_grid) {
            const StrategyValue v = lrm_strategy(*s.evaluator, s.coeffs, t, y);
            csv.row({t, y, v.theta, v.diffusion_part, v.jump_part});
        }
    return kExitOk;
}

void write_records_csv(const fs::path& path, const std::string& hash,
                       const RateParams& rp, const std::vector<NetResult>& per_n) {
    CsvWriter csv(path, hash,
                  {"seed", "n", "theta", "epsilon", "kappa", "e_rm", "e_corr",
                   "n_corrections"});
    for (const auto& nr : per_n)
        for (const auto& rec : nr.records)
            csv.row({double(rec.seed), double(nr.n), rp.theta, nr.epsilon, rp.kappa,
                     rec.e_rm, rec.e_corr, double(rec.corrections)});
}

int cmd_simulate(const Cli& cli) {
    const Loaded l = load(cli);
    if (l.cfg.n_values.empty())
        throw ConfigError("simulate needs experiment.n_values");
    const ModelSetup setup = make_model_setup(l.cfg);
    const RateParams rp = resolve_rate_params(l.cfg, setup.triplet);
    StrategyTableParams tp;
    tp.t_cells = l.cfg.table_t_cells;
    tp.y_cells = l.cfg.table_y_cells;
    const StrategyTable table(setup.evaluator, setup.coeffs, l.cfg.s0, tp);
    std::vector<NetResult> per_n;
    for (std::size_t n : l.cfg.n_values)
        per_n.push_back(
            run_net_batch(l.cfg, setup.triplet, table, rp, n, cli.threads));
    write_records_csv(fs::path(cli.out_dir) / "hedge_runs.csv", l.cfg.hash, rp,
                      per_n);
    for (const auto& nr : per_n)
        std::printf("n=%zu epsilon=%.6g L2(e_corr)=%.6g L2(e_rm)=%.6g\n", nr.n,
                    nr.epsilon, nr.l2_corr.value, nr.l2_rm.value);
    return kExitOk;
}

Json rate_report_json(const RateReport& rep) {
    Json j;
    Json pts = Json::array();
    for (const auto& p : rep.points) {
        Json q;
        q["n"] = p.n;
        q["error"] = p.error;
        q["std_error"] = p.std_error;
        pts.push_back(std::move(q));
    }
    j["points"] = std::move(pts);
    j["slope"] = rep.slope;
    j["ci"] = {rep.ci_lo, rep.ci_hi};
    j["predicted"] = rep.predicted_slope;
    j["verdict"] = verdict_name(rep.verdict);
    return j;
}

void write_rate_plot(const fs::path& dir, const std::string& hash,
                     const RatesOutcome& out) {
    {
        std::ofstream dat(dir / "rates.dat", std::ios::binary);
        dat << output_header(hash) << "\n# n l2_corr l2_rm predicted\n";
        for (const auto& nr : out.per_n) {
            const double pred = out.corrected.points.empty()
                                    ? 0.0
                                    : out.corrected.points.front().error *
                                          std::pow(double(nr.n) /
                                                       out.corrected.points.front().n,
                                                   out.corrected.predicted_slope);
            dat << nr.n << " " << format_number(nr.l2_corr.value) << " "
                << format_number(nr.l2_rm.value) << " " << format_number(pred)
                << "\n";
        }
    }
    std::ofstream gp(dir / "rates.gp", std::ios::binary);
    gp << output_header(hash) << "\n"
       << "set logscale xy\nset xlabel 'n'\nset ylabel 'L2 error'\n"
       << "set terminal pngcairo size 800,600\nset output 'rates.png'\n"
       << "plot 'rates.dat' using 1:2 with linespoints title 'corrected', \\\n"
       << "     'rates.dat' using 1:3 with linespoints title 'riemann', \\\n"
       << "     'rates.dat' using 1:4 with lines dashtype 2 title 'predicted'\n";
}

int cmd_rates(const Cli& cli) {
    const Loaded l = load(cli);
    const RatesOutcome out = run_rates(l.cfg, cli.threads);
    const fs::path dir(cli.out_dir);

    Json j;
    j["theta"] = out.params.theta;
    j["r"] = out.params.r;
    j["kappa"] = out.params.kappa;
    j["parameter_source"] = out.params.source;
    j["corrected"] = rate_report_json(out.corrected);
    j["riemann"] = rate_report_json(out.riemann);
    j["warnings"] = out.warnings;
    write_json(dir / "rates.json", j, l.cfg.hash);

    {
        CsvWriter csv(dir / "rates.csv", l.cfg.hash,
                      {"n", "epsilon", "mesh", "l2_corr", "l2_corr_se", "l2_rm",
                       "l2_rm_se", "mean_corrections"});
        for (const auto& nr : out.per_n)
            csv.row({double(nr.n), nr.epsilon, nr.mesh, nr.l2_corr.value,
                     nr.l2_corr.std_error, nr.l2_rm.value, nr.l2_rm.std_error,
                     nr.mean_corrections});
    }
    if (!out.synthetic)
        write_records_csv(dir / "hedge_runs.csv", l.cfg.hash, out.params, out.per_n);
    write_rate_plot(dir, l.cfg.hash, out);

    for (const auto& w : out.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("slope = %.4f  ci = [%.4f, %.4f]  predicted = %.4f  verdict = %s\n",
                out.corrected.slope, out.corrected.ci_lo, out.corrected.ci_hi,
                out.corrected.predicted_slope, verdict_name(out.corrected.verdict));
    return out.corrected.verdict == Verdict::Inconsistent ? kExitInconsistent
                                                          : kExitOk;
}

int cmd_repcheck(const Cli& cli) {
    const Loaded l = load(cli);
    const RepOutcome out = run_repcheck(l.cfg, cli.threads);
    Json j;
    j["value0"] = out.value0;
    j["f_norm"] = out.f_norm;
    Json lv = Json::array();
    for (const auto& r : out.levels) {
        Json q;
        q["grid_size"] = r.grid_size;
        q["residual"] = r.residual.value;
        q["residual_se"] = r.residual.std_error;
        lv.push_back(std::move(q));
    }
    j["levels"] = std::move(lv);
    j["monotone"] = out.monotone;
    j["final_relative"] = out.final_relative;
    write_json(fs::path(cli.out_dir) / "repcheck.json", j, l.cfg.hash);
    for (const auto& r : out.levels)
        std::printf("grid %zu: residual %.6g (se %.2g)\n", r.grid_size,
                    r.residual.value, r.residual.std_error);
    std::printf("monotone = %s, final residual = %.2f%% of ||f||\n",
                out.monotone ? "yes" : "no", 100.0 * out.final_relative);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hedging-strategy and convergence-rate experiments for "
                 "exponential Levy models"};
    app.require_subcommand(0, 1);

    Cli cli;
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults,
                 "print the default config and exit");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "experiment config file")
            ->required();
        sub->add_option("--threads", cli.threads, "worker threads");
        sub->add_option("--out", cli.out_dir, "output directory");
    };
    CLI::App* coeffs = app.add_subcommand("coeffs", "price coefficients and "
                                                    "martingale-measure feasibility");
    CLI::App* mmm = app.add_subcommand("mmm", "minimal martingale measure change");
    CLI::App* strategy = app.add_subcommand("strategy", "hedging strategy surface");
    CLI::App* simulate = app.add_subcommand("simulate", "hedging runs per net size");
    CLI::App* rates = app.add_subcommand("rates", "convergence-rate experiment");
    CLI::App* repcheck =
        app.add_subcommand("repcheck", "martingale-representation residual check");
    for (CLI::App* sub : {coeffs, mmm, strategy, simulate, rates, repcheck})
        add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    if (print_defaults) {
        std::fputs(default_config_text().c_str(), stdout);
        return kExitOk;
    }
    if (app.get_subcommands().empty()) {
        std::fputs(app.help().c_str(), stderr);
        return kExitUsage;
    }

    try {
        std::filesystem::create_directories(cli.out_dir);
        if (coeffs->parsed()) return cmd_coeffs(cli);
        if (mmm->parsed()) return cmd_mmm(cli);
        if (strategy->parsed()) return cmd_strategy(cli);
        if (simulate->parsed()) return cmd_simulate(cli);
        if (rates->parsed()) return cmd_rates(cli);
        if (repcheck->parsed()) return cmd_repcheck(cli);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
