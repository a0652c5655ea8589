#include <catch2/catch_amalgamated.hpp>

#include "levyhedge/market.hpp"
#include "levyhedge/simulate.hpp"

using namespace levyhedge;

namespace {

struct MomentCheck {
    double mean_sigmas = 0.0; // |mean - theory| in standard errors
    double var_ratio = 1.0;
};

MomentCheck terminal_moments(const LevyTriplet& t, double T, std::size_t npaths) {
    PathSimulator sim(t, T, {.grid_size = 256});
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < npaths; ++i) {
        PathRng rng(42, i);
        const double x = sim.terminal(T, rng);
        s += x;
        s2 += x * x;
    }
    const double mean = s / double(npaths);
    const double var = s2 / double(npaths) - mean * mean;
    const double m_th =
        (t.gamma +
         t.nu->integrate([](double x) { return std::abs(x) > 1.0 ? x : 0.0; })) *
        T;
    const double v_th =
        (t.sigma * t.sigma + t.nu->integrate([](double x) { return x * x; })) * T;
    MomentCheck out;
    out.mean_sigmas = std::abs(mean - m_th) / std::sqrt(v_th / double(npaths));
    out.var_ratio = var / v_th;
    return out;
}

} // namespace

TEST_CASE("terminal moments match the triplet across model families") {
    struct Case {
        const char* name;
        LevyTriplet t;
        std::size_t paths;
    };
    auto starred_merton = [] {
        auto base = make_triplet(0.0, 0.2, merton_measure(0.8, -0.1, 0.25));
        base.gamma -= market_coefficients(base).gamma_s + 0.02;
        return minimal_martingale_measure(base).starred;
    };
    const std::vector<Case> cases = {
        {"bs", make_triplet(0.03, 0.2, zero_measure()), 100000},
        {"merton", make_triplet(0.0, 0.2, merton_measure(0.8, -0.1, 0.25)), 100000},
        {"cgmy", make_triplet(0.0, 0.0, cgmy_measure(0.3, 3.0, 5.0, 0.8)), 60000},
        {"nig", make_triplet(0.0, 0.0, nig_measure(8.0, -2.0, 0.4)), 60000},
        {"kou", make_triplet(0.0, 0.1, kou_measure(1.5, 0.4, 12.0, 9.0)), 100000},
        {"reweighted merton", starred_merton(), 60000},
    };
    for (const auto& c : cases) {
        INFO(c.name);
        const auto m = terminal_moments(c.t, 1.0, c.paths);
        CHECK(m.mean_sigmas < 4.0);
        CHECK_THAT(m.var_ratio, Catch::Matchers::WithinAbs(1.0, 0.05));
    }
}

TEST_CASE("pure drift paths are deterministic") {
    PathSimulator sim(make_triplet(1.0, 0.0, zero_measure()), 2.0, {.grid_size = 64});
    PathRng rng(7, 0);
    CHECK_THAT(sim.terminal(2.0, rng), Catch::Matchers::WithinAbs(2.0, 1e-14));
}

TEST_CASE("compound Poisson jump counts match the intensity") {
    auto t = make_triplet(0.0, 0.2, merton_measure(0.8, -0.1, 0.25));
    PathSimulator sim(t, 1.0, {.grid_size = 256});
    double cnt = 0.0;
    const std::size_t np = 100000;
    for (std::size_t i = 0; i < np; ++i) cnt += double(sim.simulate(9, i).jumps.size());
    CHECK(std::abs(cnt / double(np) - 0.8) < 4.0 * std::sqrt(0.8 / double(np)));
}

TEST_CASE("identical seed and path index reproduce the path bit for bit") {
    auto t = make_triplet(0.0, 0.2, merton_measure(0.8, -0.1, 0.25));
    PathSimulator sim(t, 1.0, {.grid_size = 128});
    const auto p1 = sim.simulate(5, 17);
    const auto p2 = sim.simulate(5, 17);
    CHECK(p1.logx == p2.logx);
    REQUIRE(p1.jumps.size() == p2.jumps.size());
    for (std::size_t i = 0; i < p1.jumps.size(); ++i) {
        CHECK(p1.jumps[i].time == p2.jumps[i].time);
        CHECK(p1.jumps[i].x == p2.jumps[i].x);
    }
}

TEST_CASE("custom densities without decay information cannot be sampled") {
    CustomMeasure::Spec s;
    s.density = [](double x) { return std::exp(-std::abs(x)); };
    s.right_decay = 1.0;
    s.left_decay = 1.0;
    CHECK_THROWS_AS(JumpSampler(custom_measure(s), 0.0), UnsupportedSampler);
}

namespace {

PathSimulator& merton_sim() {
    static auto t = make_triplet(0.0, 0.2, merton_measure(5.0, -0.05, 0.3));
    static TimeNet net = adapted_time_net(8, 1.0, 1.0);
    static SimOptions so = [] {
        SimOptions o;
        o.grid_size = 4096;
        o.extra_times = net.knots;
        return o;
    }();
    static PathSimulator sim(t, 1.0, so);
    return sim;
}

TimeNet test_net() { return adapted_time_net(8, 1.0, 1.0); }

} // namespace

TEST_CASE("constant strategies telescope: both schemes are exact") {
    auto& sim = merton_sim();
    const TimeNet net = test_net();
    StrategyFn cst = [](double, double) { return 0.7; };
    for (int i = 0; i < 200; ++i) {
        auto p = sim.simulate(3, std::size_t(i));
        auto run = hedge_run(p, cst, net, 0.25, 0.1, 1.0, 1e-9);
        CHECK_THAT(run.e_rm, Catch::Matchers::WithinAbs(0.0, 1e-12));
        CHECK_THAT(run.e_corr, Catch::Matchers::WithinAbs(0.0, 1e-12));
        const double ref = 0.7 * (std::exp(p.logx.back()) - 1.0);
        CHECK_THAT(run.a_rm_terminal, Catch::Matchers::WithinAbs(ref, 1e-12));
    }
}

TEST_CASE("one-interval net freezes the strategy at its initial value") {
    auto& sim = merton_sim();
    TimeNet net1 = explicit_time_net({0.0, 1.0});
    auto p = sim.simulate(3, 5);
    StrategyFn f = [](double tt, double s) { return tt + s; };
    const double a = riemann_approx(p, f, net1, 1.0);
    CHECK_THAT(a, Catch::Matchers::WithinRel(
                      f(0.0, 1.0) * (std::exp(p.logx.back()) - 1.0), 1e-12));
}

TEST_CASE("infinite threshold disables corrections entirely") {
    auto& sim = merton_sim();
    auto p = sim.simulate(3, 9);
    StrategyFn f = [](double tt, double s) { return std::sin(tt) + 0.1 * s; };
    auto c = corrected_approx(p, f, test_net(), 1e10, 0.1);
    CHECK(c.a_corr == c.a_rm);
    CHECK(c.correction_count == 0);
}

TEST_CASE("threshold times on a constructed single-jump path") {
    SamplePath p;
    p.maturity = 1.0;
    p.grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    p.jumps = {{0.5, std::log(2.0), 0.0}};
    p.logx = {0.0, 0.0, std::log(2.0), std::log(2.0), std::log(2.0)};
    auto tt = jump_threshold_times(p, 0.5, 0.0);
    REQUIRE(tt.count == 2); // the jump plus maturity
    CHECK(tt.rho[0] == 0.5);

    SamplePath q = p;
    q.jumps.clear();
    auto t2 = jump_threshold_times(q, 0.5, 0.0);
    CHECK(t2.count == 1);
    REQUIRE(t2.rho.size() == 1);
    CHECK(t2.rho[0] == 1.0);

    // Hand-computed correction: net {0, 0.75, 1}, f(t, s) = t + s.
    // Riemann: f(0,1)(S_.75 - S_0) + f(.75,2)(S_1 - S_.75) = 1*(2-1) + 0 = 1.
    // Correction at rho = 0.5: (f(0.5,1) - f(0,1)) * (2-1) = 0.5.
    TimeNet net2 = explicit_time_net({0.0, 0.75, 1.0});
    StrategyFn f = [](double a, double s) { return a + s; };
    auto c = corrected_approx(p, f, net2, 0.5, 0.0);
    CHECK_THAT(c.a_rm, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(c.a_corr, Catch::Matchers::WithinAbs(1.5, 1e-12));
    CHECK(c.correction_count == 1);
}

TEST_CASE("integral oracle trivials") {
    auto& sim = merton_sim();
    auto p = sim.simulate(3, 11);
    StrategyFn one = [](double, double) { return 1.0; };
    StrategyFn zero = [](double, double) { return 0.0; };
    CHECK_THAT(integral_oracle(p, one, 1.0, 1e-12),
               Catch::Matchers::WithinAbs(std::exp(p.logx.back()) - 1.0, 1e-12));
    CHECK(integral_oracle(p, zero) == 0.0);
}

TEST_CASE("correction counts grow as the threshold shrinks") {
    auto& sim = merton_sim();
    double m1 = 0, m2 = 0, m3 = 0;
    for (int i = 0; i < 300; ++i) {
        auto p = sim.simulate(3, std::size_t(1000 + i));
        m1 += double(jump_threshold_times(p, 0.5, 0.1).count);
        m2 += double(jump_threshold_times(p, 0.25, 0.1).count);
        m3 += double(jump_threshold_times(p, 0.125, 0.1).count);
    }
    CHECK(m1 < m2);
    CHECK(m2 < m3);
}

TEST_CASE("refining the net does not worsen the Riemann error on average") {
    // Stochastic monotonicity at 3 standard errors over 10^3 fixed seeds.
    auto t = make_triplet(0.0, 0.2, merton_measure(5.0, -0.05, 0.3));
    TimeNet net_a = adapted_time_net(8, 1.0, 1.0);
    TimeNet net_b = adapted_time_net(16, 1.0, 1.0);
    SimOptions so;
    so.grid_size = 4096;
    so.extra_times = net_a.knots;
    so.extra_times.insert(so.extra_times.end(), net_b.knots.begin(),
                          net_b.knots.end());
    PathSimulator sim(t, 1.0, so);
    StrategyFn f = [](double tt, double s) { return std::sin(tt) + 0.1 * s; };
    double d = 0.0, d2 = 0.0;
    const std::size_t np = 1000;
    for (std::size_t i = 0; i < np; ++i) {
        auto p = sim.simulate(21, i);
        const double fine = fine_grid_integral(p, f, 1.0, 1);
        const double ea = fine - riemann_approx(p, f, net_a, 1.0);
        const double eb = fine - riemann_approx(p, f, net_b, 1.0);
        const double diff = ea * ea - eb * eb;
        d += diff;
        d2 += diff * diff;
    }
    const double mean = d / double(np);
    const double se = std::sqrt((d2 / double(np) - mean * mean) / double(np));
    CHECK(mean > -3.0 * se);
}
