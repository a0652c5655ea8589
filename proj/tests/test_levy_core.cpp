#include <catch2/catch_amalgamated.hpp>

#include "levyhedge/classify.hpp"
#include "levyhedge/market.hpp"
#include "levyhedge/timenet.hpp"
#include "levyhedge/triplet.hpp"

using namespace levyhedge;

namespace {

// Independent oracle for K(z) = int (e^{zx} - 1 - zx 1_{|x|<=1}) nu(dx):
// adaptive quadrature of the raw integrand, bypassing every closed form.
Cplx quad_k(const JumpMeasure& nu, Cplx z) {
    return nu.integrate_c([z](double x) {
        Cplx w = z * x;
        return std::abs(x) <= 1.0 ? expm1_minus_c(w) : expm1_c(w);
    });
}

void check_closed_k(const MeasurePtr& nu, Cplx z, double tol = 1e-7) {
    const Cplx closed = nu->closed_k(z);
    const Cplx quad = quad_k(*nu, z);
    const double rel = std::abs(closed - quad) / std::max(1.0, std::abs(quad));
    CAPTURE(z.real(), z.imag(), closed.real(), closed.imag(), quad.real(),
            quad.imag());
    CHECK(rel < tol);
}

double gamma_for_gs(double target_gs, double sigma, const MeasurePtr& nu) {
    return target_gs - 0.5 * sigma * sigma - compensated_exp_real(*nu, 1.0);
}

} // namespace

TEST_CASE("closed-form cumulant integrals match raw quadrature") {
    check_closed_k(merton_measure(0.5, -0.1, 0.2), Cplx(2.0));
    check_closed_k(merton_measure(0.5, -0.1, 0.2), Cplx(0.0, 1.0));
    check_closed_k(merton_measure(0.5, -0.1, 0.2), Cplx(1.3, 0.7));
    check_closed_k(kou_measure(0.3, 0.4, 10.0, 5.0), Cplx(2.0));
    check_closed_k(kou_measure(0.3, 0.4, 10.0, 5.0), Cplx(-1.0, 2.0));
    check_closed_k(cgmy_measure(0.1, 5.0, 5.0, 0.5), Cplx(2.0));
    check_closed_k(cgmy_measure(0.1, 5.0, 5.0, 0.5), Cplx(0.0, 1.0));
    check_closed_k(cgmy_measure(0.1, 5.0, 5.0, 1.5), Cplx(2.0));
    check_closed_k(cgmy_measure(0.1, 5.0, 5.0, 1.5), Cplx(1.0, 3.0));
    check_closed_k(nig_measure(8.0, -2.0, 0.4), Cplx(2.0));
    check_closed_k(nig_measure(8.0, -2.0, 0.4), Cplx(1.0, 2.0));
    check_closed_k(single_jump(std::log(2.0), 1.0), Cplx(0.0, 1.5));
}

TEST_CASE("reweighted measures keep consistent cumulant integrals") {
    check_closed_k(reweighted_measure(merton_measure(0.5, -0.1, 0.2), 0.3),
                   Cplx(0.5));
    check_closed_k(reweighted_measure(cgmy_measure(0.1, 5.0, 5.0, 1.5), -0.2),
                   Cplx(1.2));
}

TEST_CASE("squared exponential jump moment matches the Merton closed form") {
    const double lam = 0.5, mu = -0.1, sj = 0.2;
    auto nu = merton_measure(lam, mu, sj);
    const double analytic =
        lam * (std::exp(2 * mu + 2 * sj * sj) - 2 * std::exp(mu + sj * sj / 2) + 1);
    CHECK_THAT(squared_exp_jump(*nu), Catch::Matchers::WithinRel(analytic, 1e-9));
    const double direct = nu->integrate([](double x) {
        const double e = std::expm1(x);
        return e * e;
    });
    CHECK_THAT(direct, Catch::Matchers::WithinRel(analytic, 1e-9));
}

TEST_CASE("characteristic exponent trivials") {
    auto bm = make_triplet(0.0, 1.0, zero_measure());
    const Cplx p1 = characteristic_exponent(bm, Cplx(2.0));
    CHECK_THAT(p1.real(), Catch::Matchers::WithinAbs(2.0, 1e-14));
    CHECK_THAT(p1.imag(), Catch::Matchers::WithinAbs(0.0, 1e-14));

    auto drift = make_triplet(3.0, 0.0, zero_measure());
    const Cplx p2 = characteristic_exponent(drift, Cplx(1.0));
    CHECK_THAT(p2.real(), Catch::Matchers::WithinAbs(0.0, 1e-14));
    CHECK_THAT(p2.imag(), Catch::Matchers::WithinAbs(-3.0, 1e-14));
}

TEST_CASE("Merton characteristic exponent matches direct quadrature") {
    const double g = 0.0, s = 0.2, u = 1.0;
    auto t = make_triplet(g, s, merton_measure(0.5, -0.1, 0.2));
    const Cplx psi = characteristic_exponent(t, Cplx(u));
    const Cplx iu(0.0, u);
    const Cplx ref = -iu * g + 0.5 * s * s * u * u - quad_k(*t.nu, iu);
    CHECK_THAT(psi.real(), Catch::Matchers::WithinAbs(ref.real(), 1e-10));
    CHECK_THAT(psi.imag(), Catch::Matchers::WithinAbs(ref.imag(), 1e-10));
}

TEST_CASE("exp / stochastic-exp triplet conversions round-trip") {
    SECTION("nu = 0") {
        auto t = make_triplet(0.05, 0.3, zero_measure());
        auto z = exp_to_stochastic_exp(t);
        CHECK_THAT(z.gamma, Catch::Matchers::WithinAbs(0.05 + 0.045, 1e-15));
        CHECK_THAT(stochastic_to_exp(z).gamma,
                   Catch::Matchers::WithinAbs(0.05, 1e-15));
    }
    SECTION("single atom at ln 2 maps to a unit jump of the exponential") {
        auto t = make_triplet(0.0, 0.0, single_jump(std::log(2.0), 1.0));
        auto z = exp_to_stochastic_exp(t);
        REQUIRE(z.nu->atoms().size() == 1);
        CHECK_THAT(z.nu->atoms()[0].x, Catch::Matchers::WithinAbs(1.0, 1e-15));
        CHECK_THAT(z.nu->atoms()[0].intensity,
                   Catch::Matchers::WithinAbs(1.0, 1e-15));
        auto back = stochastic_to_exp(z);
        CHECK_THAT(back.nu->atoms()[0].x,
                   Catch::Matchers::WithinAbs(std::log(2.0), 1e-15));
        CHECK_THAT(back.gamma, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
    SECTION("Merton round trip preserves the law") {
        auto t = make_triplet(0.02, 0.25, merton_measure(0.5, -0.1, 0.2));
        auto rt = stochastic_to_exp(exp_to_stochastic_exp(t));
        CHECK_THAT(rt.gamma, Catch::Matchers::WithinAbs(t.gamma, 1e-10));
        CHECK(rt.sigma == t.sigma);
        for (double u : {0.7, 2.0, 5.0}) {
            const Cplx a = characteristic_exponent(t, Cplx(u));
            const Cplx b = characteristic_exponent(rt, Cplx(u));
            CHECK_THAT(b.real(), Catch::Matchers::WithinAbs(a.real(), 1e-9));
            CHECK_THAT(b.imag(), Catch::Matchers::WithinAbs(a.imag(), 1e-9));
        }
    }
    SECTION("CGMY round trip (infinite activity)") {
        auto t = make_triplet(-0.01, 0.0, cgmy_measure(0.1, 5.0, 5.0, 1.5));
        auto rt = stochastic_to_exp(exp_to_stochastic_exp(t));
        CHECK_THAT(rt.gamma, Catch::Matchers::WithinAbs(t.gamma, 1e-8));
        const Cplx a = characteristic_exponent(t, Cplx(1.5));
        const Cplx b = characteristic_exponent(rt, Cplx(1.5));
        CHECK_THAT(b.real(), Catch::Matchers::WithinAbs(a.real(), 1e-7));
        CHECK_THAT(b.imag(), Catch::Matchers::WithinAbs(a.imag(), 1e-7));
    }
    SECTION("jumps of the stochastic exponential must stay above -1") {
        auto z = make_triplet(0.0, 0.0, single_jump(-1.5, 1.0));
        CHECK_THROWS_AS(stochastic_to_exp(z), NonPositiveExponential);
    }
}

TEST_CASE("market coefficients") {
    SECTION("nu = 0") {
        auto t = make_triplet(-0.02, 0.2, zero_measure());
        auto mc = market_coefficients(t);
        CHECK_THAT(mc.gamma_s, Catch::Matchers::WithinAbs(0.0, 1e-15));
        CHECK_THAT(mc.norm_sigma_nu, Catch::Matchers::WithinAbs(0.04, 1e-15));
    }
    SECTION("Merton norm closed form") {
        const double lam = 0.5, mu = -0.1, sj = 0.2, s = 0.2;
        auto t = make_triplet(0.0, s, merton_measure(lam, mu, sj));
        const double want =
            s * s +
            lam * (std::exp(2 * mu + 2 * sj * sj) - 2 * std::exp(mu + sj * sj / 2) + 1);
        CHECK_THAT(market_coefficients(t).norm_sigma_nu,
                   Catch::Matchers::WithinAbs(want, 1e-10));
    }
}

TEST_CASE("minimal martingale measure drives the price drift to zero") {
    struct Case {
        const char* name;
        double sigma;
        MeasurePtr nu;
    };
    const std::vector<Case> cases = {
        {"merton", 0.2, merton_measure(0.3, -0.1, 0.15)},
        {"kou", 0.15, kou_measure(0.4, 0.45, 12.0, 6.0)},
        {"cgmy", 0.0, cgmy_measure(0.1, 5.0, 5.0, 1.5)},
        {"cgmy.7", 0.1, cgmy_measure(0.2, 6.0, 7.0, 0.7)},
        {"nig", 0.0, nig_measure(8.0, -2.0, 0.4)},
        {"atoms", 0.1, compound_poisson({{std::log(2.0), 0.5}, {-0.4, 1.0}})},
        {"bs", 0.25, zero_measure()},
    };
    for (const auto& c : cases) {
        INFO(c.name);
        auto t = make_triplet(gamma_for_gs(-0.02, c.sigma, c.nu), c.sigma, c.nu);
        CHECK_THAT(market_coefficients(t).gamma_s,
                   Catch::Matchers::WithinAbs(-0.02, 1e-12));
        auto change = minimal_martingale_measure(t);
        CHECK_THAT(market_coefficients(change.starred).gamma_s,
                   Catch::Matchers::WithinAbs(0.0, 1e-9));
        // e^X is a martingale under the starred triplet: psi*(-i) = 0.
        CHECK(std::abs(characteristic_exponent(change.starred, Cplx(0.0, -1.0))) <
              1e-9);
        if (!c.nu->is_zero()) {
            const double L = std::max(c.nu->support_left(), -5.0);
            const double R = std::min(c.nu->support_right(), 5.0);
            for (int i = 1; i < 200; ++i) {
                const double x = L + (R - L) * i / 200.0;
                if (std::abs(x) < 1e-6) continue;
                if (c.nu->density(x) > 0.0) {
                    CAPTURE(x);
                    CHECK(change.starred.nu->density(x) > 0.0);
                }
            }
        }
    }
}

TEST_CASE("gamma_S = 0 gives the trivial measure change") {
    auto nu = merton_measure(0.3, -0.1, 0.15);
    auto t = make_triplet(gamma_for_gs(0.0, 0.2, nu), 0.2, nu);
    auto ch = minimal_martingale_measure(t);
    CHECK(ch.u_coefficient == 0.0);
    CHECK(ch.v_triplet.gamma == 0.0);
    CHECK(ch.v_triplet.nu->is_zero());
}

TEST_CASE("positive drift with unbounded positive jumps violates admissibility") {
    auto nu = merton_measure(0.3, -0.1, 0.15);
    auto t = make_triplet(gamma_for_gs(0.05, 0.2, nu), 0.2, nu);
    CHECK_FALSE(check_mmm_assumption(t).holds);
    CHECK_THROWS_AS(minimal_martingale_measure(t), AssumptionViolated);
}

TEST_CASE("density exponent V integrates to a unit-mean exponential") {
    auto nu = merton_measure(0.3, -0.1, 0.15);
    auto t = make_triplet(gamma_for_gs(-0.02, 0.2, nu), 0.2, nu);
    auto ch = minimal_martingale_measure(t);
    CHECK(std::abs(characteristic_exponent(ch.v_triplet, Cplx(0.0, -1.0))) < 1e-9);
}

TEST_CASE("small-jump activity index recovery") {
    for (double y : {0.5, 1.0, 1.5}) {
        auto c = classify_small_jumps(*cgmy_measure(0.5, 3.0, 5.0, y));
        CAPTURE(y);
        CHECK_THAT(c.bg_index, Catch::Matchers::WithinAbs(y, 0.1));
        REQUIRE(c.s1_alpha.has_value());
        CHECK_THAT(*c.s1_alpha, Catch::Matchers::WithinAbs(y, 0.1));
    }
    auto cn = classify_small_jumps(*nig_measure(8.0, -2.0, 0.4));
    CHECK_THAT(cn.bg_index, Catch::Matchers::WithinAbs(1.0, 0.1));
    auto cm = classify_small_jumps(*merton_measure(2.0, -0.1, 0.3));
    CHECK(cm.bg_index == 0.0);
    CHECK(cm.finite_activity);
}

TEST_CASE("rate-case selection from model class and payoff regularity") {
    const SmallJumpClass fin{0.0, true, {}, {}};
    SECTION("diffusive, Lipschitz payoff") {
        auto t = table1_parameters({0.2, fin}, call_payoff(1.0));
        CHECK(table1_case_name(t.case_id) == "C1");
        CHECK(t.theta == 1.0);
        CHECK(t.r >= 1.0);
        CHECK(t.r <= 2.0);
    }
    SECTION("pure jump, finite activity, binary payoff") {
        auto t = table1_parameters({0.0, fin}, binary_payoff(1.0));
        CHECK(table1_case_name(t.case_id) == "C2");
        CHECK(t.theta == 1.0);
    }
    SECTION("pure jump, stable-like small jumps, binary payoff") {
        const SmallJumpClass s1{1.5, false, 1.5, 1.5};
        auto t = table1_parameters({0.0, s1}, binary_payoff(1.0));
        CHECK(table1_case_name(t.case_id) == "C3");
        CHECK(t.r > 1.5);
        CHECK(t.r <= 2.0);
        CHECK(t.theta > 0.0);
        CHECK(t.theta < 1.0 / 3.0 + 1e-12);
    }
    SECTION("pure jump with Holder payoff falls back to the lower activity case") {
        const SmallJumpClass s1{1.5, false, 1.5, 1.5};
        auto t = table1_parameters({0.0, s1}, power_call_payoff(1.0, 0.6));
        CHECK(table1_case_name(t.case_id) == "C2");
        CHECK_THAT(t.alpha, Catch::Matchers::WithinAbs(1.55, 1e-12));
    }
    SECTION("no case applies when activity exceeds the payoff regularity") {
        const SmallJumpClass s1{1.95, false, 1.85, {}};
        CHECK_THROWS_AS(table1_parameters({0.0, s1}, power_call_payoff(1.0, 0.9)),
                        NoApplicableCase);
    }
    SECTION("Sobolev-declared payoff reaches the S2 case") {
        const SmallJumpClass s2{1.5, false, {}, 1.5};
        auto g = custom_payoff([](double y) { return y < 1 ? 0.0 : 1.0; }, 0.0, 2.0);
        auto t = table1_parameters({0.0, s2}, g);
        CHECK(table1_case_name(t.case_id) == "C4");
    }
}

TEST_CASE("declared Holder exponents match sampled payoff increments") {
    CHECK(holder_spot_check(call_payoff(1.0), 1.0));
    CHECK(holder_spot_check(binary_payoff(1.0), 1.0));
    CHECK(holder_spot_check(power_call_payoff(1.0, 0.5), 1.0));
}

TEST_CASE("adapted time nets") {
    SECTION("theta = 1 is the uniform net") {
        auto n = adapted_time_net(4, 1.0, 1.0);
        REQUIRE(n.knots.size() == 5);
        for (std::size_t i = 0; i < 5; ++i)
            CHECK_THAT(n.knots[i], Catch::Matchers::WithinAbs(0.25 * double(i), 1e-15));
        CHECK_THAT(mesh_size(n, 1.0), Catch::Matchers::WithinAbs(0.25, 1e-15));
    }
    SECTION("n = 2, theta = 1/2") {
        auto n = adapted_time_net(2, 0.5, 1.0);
        REQUIRE(n.knots.size() == 3);
        CHECK_THAT(n.knots[1], Catch::Matchers::WithinAbs(0.75, 1e-15));
        CHECK_THAT(mesh_size(n, 0.5), Catch::Matchers::WithinAbs(0.75, 1e-15));
    }
    SECTION("single interval") {
        auto n = explicit_time_net({0.0, 1.0});
        CHECK_THAT(mesh_size(n, 0.3), Catch::Matchers::WithinAbs(1.0, 1e-15));
    }
    SECTION("mesh-size bounds T^theta/n <= mesh <= T^theta/(theta n)") {
        for (double T : {0.5, 1.0, 2.0})
            for (double th = 0.1; th <= 1.0001; th += 0.1)
                for (std::size_t n : {1, 2, 3, 7, 10, 100, 500, 1000}) {
                    auto net = adapted_time_net(n, th, T);
                    const double m = mesh_size(net, th);
                    CAPTURE(T, th, n, m);
                    CHECK(m >= std::pow(T, th) / double(n) - 1e-12);
                    CHECK(m <= std::pow(T, th) / (th * double(n)) + 1e-12);
                }
    }
}
