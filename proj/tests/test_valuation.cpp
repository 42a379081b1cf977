#include <doctest.h>

#include <cmath>
#include <string>

#include "rsrl/errors.hpp"
#include "rsrl/valuation.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace rsrl;
using doctest::Approx;

namespace {

using oracle::random_utility;

const double kLnCosh1 = std::log(std::cosh(1.0));

FiniteDistribution coin(double hi, double lo, double p = 0.5) {
    return FiniteDistribution({{hi, p}, {lo, 1.0 - p}});
}

} // namespace

TEST_SUITE("utility families") {
    TEST_CASE("evaluation examples") {
        CHECK(UtilityFunction::polynomial_mixed(0.5, 2, 1, 2)(1.0) == Approx(0.5));
        CHECK(UtilityFunction::linear()(3.7) == 3.7);
        CHECK(UtilityFunction::entropic(1.0)(0.0) == 1.0);
        CHECK(UtilityFunction::polynomial_mixed(0.5, 2, 1, 2)(-2.0) == Approx(-4.0));
        CHECK(UtilityFunction::piecewise_linear(0.5)(2.0) == Approx(1.0));
        CHECK(UtilityFunction::piecewise_linear(0.5)(-2.0) == Approx(-3.0));
        CHECK(UtilityFunction::exponential(-1.0)(1.0) == Approx(1.0 - std::exp(-1.0)));
    }

    TEST_CASE("non-finite input is a domain error") {
        const auto u = UtilityFunction::linear();
        CHECK_THROWS_AS(u(std::nan("")), DomainError);
        CHECK_THROWS_AS(u(INFINITY), DomainError);
    }

    TEST_CASE("parameter invariants") {
        CHECK_THROWS_AS(UtilityFunction::polynomial_mixed(0, 1, 1, 1), DomainError);
        CHECK_THROWS_AS(UtilityFunction::polynomial_mixed(1, -1, 1, 1), DomainError);
        CHECK_THROWS_AS(UtilityFunction::piecewise_linear(1.0), DomainError);
        CHECK_THROWS_AS(UtilityFunction::piecewise_linear(-1.0), DomainError);
        CHECK_THROWS_AS(UtilityFunction::entropic(0.0), DomainError);
        const auto lin = UtilityFunction::linear();
        CHECK_THROWS_AS(UtilityFunction::truncated(lin, 1.0, 1.0, 1.0), DomainError);
        CHECK_THROWS_AS(UtilityFunction::truncated(lin, -1.0, 1.0, 0.0), DomainError);
        CHECK_THROWS_AS(UtilityFunction::linearized_near_zero(lin, 0.0), DomainError);
    }

    TEST_CASE("every family is strictly increasing on a dense grid") {
        oracle::Gen g(11);
        for (int rep = 0; rep < 200; ++rep) {
            const auto c = random_utility(g);
            double prev = c.u(-8.0);
            for (int i = 1; i <= 2000; ++i) {
                const double x = -8.0 + 16.0 * i / 2000;
                const double v = c.u(x);
                REQUIRE_MESSAGE(v > prev, c.name << " not increasing at " << x);
                prev = v;
            }
        }
    }

    TEST_CASE("family names") {
        CHECK(UtilityFunction::linear().family_name() == "linear");
        CHECK(UtilityFunction::piecewise_linear(0.1).family_name() == "piecewise_linear");
        CHECK(linearize_near_zero(UtilityFunction::polynomial_mixed(1, 2, 1, 2)).family_name() ==
              "linearized_near_zero");
    }
}

TEST_SUITE("slope bounds") {
    TEST_CASE("linear has unit slope") {
        const auto b = slope_bounds(UtilityFunction::linear(), -5, 5, 101);
        CHECK(b.lower == Approx(1.0));
        CHECK(b.upper == Approx(1.0));
        CHECK_FALSE(b.violation);
    }

    TEST_CASE("piecewise linear slopes are 1 -/+ kappa") {
        const auto b = slope_bounds(UtilityFunction::piecewise_linear(0.5), -5, 5, 100);
        CHECK(b.lower == Approx(0.5));
        CHECK(b.upper == Approx(1.5));
    }

    TEST_CASE("square root on [0.01, 1] matches all-pairs divided differences") {
        const auto u = UtilityFunction::polynomial_mixed(1, 0.5, 1, 0.5);
        const auto b = slope_bounds(u, 0.01, 1.0, 200);
        const auto [lo, hi] =
            oracle::brute_slopes([](double x) { return std::sqrt(x); }, 0.01, 1.0, 200);
        CHECK(b.lower > 0);
        CHECK(b.upper <= 5.0);
        CHECK(b.lower == Approx(lo).epsilon(1e-9));
        CHECK(b.upper == Approx(hi).epsilon(1e-9));
    }

    TEST_CASE("zero derivative at the origin is flagged") {
        const auto b = slope_bounds(UtilityFunction::polynomial_mixed(1, 2, 1, 2), -1, 1, 51);
        CHECK(b.violation);
        const auto ok =
            slope_bounds(linearize_near_zero(UtilityFunction::piecewise_linear(0.3)), -1, 1, 51);
        CHECK_FALSE(ok.violation);
    }
}

TEST_SUITE("finite distributions") {
    TEST_CASE("construction checks") {
        CHECK_THROWS_AS(FiniteDistribution({}), DomainError);
        CHECK_THROWS_AS(FiniteDistribution({{1, 0.5}, {2, 0.4}}), DomainError);
        CHECK_THROWS_AS(FiniteDistribution({{1, 1.2}, {2, -0.2}}), DomainError);
        CHECK_THROWS_AS(FiniteDistribution({{NAN, 1.0}}), DomainError);
        const FiniteDistribution d({{1, 0.5 + 1e-10}, {2, 0.5}});
        double total = 0;
        for (const auto& o : d.outcomes()) total += o.probability;
        CHECK(total == Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("support range ignores zero-probability outcomes") {
        const FiniteDistribution d({{-100, 0.0}, {1, 0.5}, {3, 0.5}});
        CHECK(d.min() == 1);
        CHECK(d.max() == 3);
        CHECK(d.mean() == Approx(2));
        CHECK(d.variance() == Approx(1));
    }
}

TEST_SUITE("shortfall") {
    TEST_CASE("examples") {
        const Shortfall lin(UtilityFunction::linear(), 0.0);
        CHECK(shortfall_value(coin(1, -1), lin) == Approx(0.0).epsilon(1e-10));
        CHECK(shortfall_value(coin(2, -1, 0.25), lin) == Approx(-0.25));

        const Shortfall ent(UtilityFunction::entropic(1.0), 1.0);
        CHECK(ent.reference_root() == Approx(0.0));
        CHECK(std::abs(shortfall_value(coin(1, -1), ent, 1e-12) - kLnCosh1) < 1e-9);
    }

    TEST_CASE("point mass short-circuits to v - y0") {
        const Shortfall s(UtilityFunction::exponential(1.0), 0.5);
        const double y0 = s.reference_root();
        CHECK(std::abs(std::expm1(y0) - 0.5) < 1e-12);
        CHECK(shortfall_value(FiniteDistribution::point_mass(3.0), s) == 3.0 - y0);
    }

    TEST_CASE("acceptance level outside the utility range is rejected") {
        CHECK_THROWS_AS(Shortfall(UtilityFunction::exponential(-1.0), 2.0), DomainError);
        CHECK_THROWS_AS(Shortfall(UtilityFunction::entropic(1.0), -1.0), DomainError);
    }

    TEST_CASE("centralized value examples") {
        const Shortfall lin(UtilityFunction::linear(), 0.0);
        const FiniteDistribution x({{3, 0.2}, {-1, 0.3}, {0.5, 0.5}});
        CHECK(centralized_value(x, lin) == Approx(x.mean()));

        const Shortfall ra(UtilityFunction::exponential(-1.0), 0.0);
        CHECK(std::abs(centralized_value(coin(1, -1), ra, 1e-12) + kLnCosh1) < 1e-9);

        oracle::Gen g(5);
        for (int i = 0; i < 50; ++i) {
            const auto c = random_utility(g);
            const Shortfall s(c.u, c.x0);
            const double v = g.uniform(-5, 5);
            CHECK(centralized_value(FiniteDistribution::point_mass(v), s) == Approx(v).epsilon(1e-12));
        }
    }

    TEST_CASE("agrees with an independent regula falsi root") {
        oracle::Gen g(7);
        for (int rep = 0; rep < 400; ++rep) {
            const auto c = random_utility(g);
            const auto xp = g.distribution(g.integer(2, 6), -5, 5);
            const Shortfall s(c.u, c.x0);
            const double tol = 1e-10;
            const double m = shortfall_value(oracle::to_distribution(xp), s, tol);
            const double ref = oracle::shortfall_root(xp, c.ref, c.x0);
            REQUIRE_MESSAGE(std::abs(m - ref) <= tol + 1e-9 * (1 + std::abs(ref)), c.name);
        }
    }
}

TEST_SUITE("shortfall axioms") {
    TEST_CASE("monotonicity, translation invariance, range and root residual") {
        oracle::Gen g(2024);
        const double tol = 1e-10;
        for (int rep = 0; rep < 1000; ++rep) {
            const auto c = random_utility(g);
            const Shortfall s(c.u, c.x0);
            const int n = g.integer(1, 6);
            const auto w = g.simplex(n);
            std::vector<Outcome> xo, yo, zo;
            const double shift = g.uniform(-10, 10);
            for (int i = 0; i < n; ++i) {
                const double x = g.uniform(-5, 5);
                xo.push_back({x, w[i]});
                yo.push_back({x + g.uniform(0, 2), w[i]});
                zo.push_back({x + shift, w[i]});
            }
            const FiniteDistribution X(xo), Y(yo), Z(zo);
            const double mx = shortfall_value(X, s, tol);

            CHECK(mx <= shortfall_value(Y, s, tol) + 2 * tol);
            CHECK(std::abs(shortfall_value(Z, s, tol) - mx - shift) <= 2 * tol + 1e-12 * std::abs(shift));

            const double cv = mx + s.reference_root();
            CHECK(cv >= X.min() - tol);
            CHECK(cv <= X.max() + tol);

            // |m* - m_true| <= tol bounds the residual by the utility's variation over tol.
            double bound = 0;
            for (const auto& o : X.outcomes())
                bound = std::max(bound, std::max(c.u(o.value - mx + tol) - c.u(o.value - mx),
                                                 c.u(o.value - mx) - c.u(o.value - mx - tol)));
            CHECK(std::abs(expected_utility(X.outcomes(), c.u, mx) - c.x0) <= bound + 1e-12);
        }
    }

    TEST_CASE("concave utilities value mixtures at least as much as the average") {
        oracle::Gen g(99);
        const double tol = 1e-10;
        for (int rep = 0; rep < 300; ++rep) {
            const bool concave = g.coin();
            const double lam = g.uniform(0.3, 1.5);
            const Shortfall s(UtilityFunction::exponential(concave ? -lam : lam), 0.0);
            const int n = g.integer(2, 5);
            const auto w = g.simplex(n);
            const double a = g.uniform(0, 1);
            std::vector<Outcome> xo, yo, mo;
            for (int i = 0; i < n; ++i) {
                const double x = g.uniform(-3, 3), y = g.uniform(-3, 3);
                xo.push_back({x, w[i]});
                yo.push_back({y, w[i]});
                mo.push_back({a * x + (1 - a) * y, w[i]});
            }
            const double vx = centralized_value(FiniteDistribution(xo), s, tol);
            const double vy = centralized_value(FiniteDistribution(yo), s, tol);
            const double vm = centralized_value(FiniteDistribution(mo), s, tol);
            if (concave) CHECK(vm >= a * vx + (1 - a) * vy - 2 * tol);
            else CHECK(vm <= a * vx + (1 - a) * vy + 2 * tol);
        }
    }

    TEST_CASE("entropic map: first-order term is half the variance") {
        // (1/lambda) ln E exp(lambda X) = mean + (lambda / 2) Var + O(lambda^2).
        const auto x = coin(1, -1);
        double prev_ratio = 0;
        for (double lam : {0.1, 0.05, 0.025}) {
            const Shortfall s(UtilityFunction::entropic(lam), 1.0);
            const double v = centralized_value(x, s, 0.0);
            CHECK(v == Approx(std::log(std::cosh(lam)) / lam).epsilon(1e-12));
            const double ratio = std::abs(v - (x.mean() + 0.5 * lam * x.variance())) / (lam * lam);
            if (prev_ratio > 0) CHECK(ratio == Approx(prev_ratio).epsilon(0.25));
            prev_ratio = ratio;
        }
    }
}

TEST_SUITE("subjective probability") {
    TEST_CASE("examples") {
        const Shortfall lin(UtilityFunction::linear(), 0.0);
        CHECK(subjective_probability(4, -2, 0.3, lin) == Approx(0.3));
        const Shortfall ra(UtilityFunction::exponential(-1.0), 0.0);
        CHECK(std::abs(subjective_probability(1, -1, 0.5, ra, 0.0) - (1 - kLnCosh1) / 2) < 1e-9);
        const Shortfall mix1(UtilityFunction::polynomial_mixed(0.5, 2, 1, 2), 0.0);
        CHECK(subjective_probability(1, -1, 0.1, mix1) > 0.1);
        CHECK(subjective_probability(1, -1, 0.9, mix1) < 0.9);
    }

    TEST_CASE("x1 <= x2 is a domain error") {
        const Shortfall lin(UtilityFunction::linear(), 0.0);
        CHECK_THROWS_AS(subjective_probability(-1, 1, 0.5, lin), DomainError);
        CHECK_THROWS_AS(subjective_probability(1, 1, 0.5, lin), DomainError);
    }

    TEST_CASE("endpoints and monotonicity") {
        oracle::Gen g(3);
        for (int rep = 0; rep < 40; ++rep) {
            const auto c = random_utility(g);
            const Shortfall s(c.u, c.x0);
            CHECK(subjective_probability(1, -1, 0.0, s) == Approx(0.0).epsilon(1e-9));
            CHECK(subjective_probability(1, -1, 1.0, s) == Approx(1.0).epsilon(1e-9));
            double prev = 0;
            for (int i = 1; i < 100; ++i) {
                const double w = subjective_probability(1, -1, i / 100.0, s);
                CHECK(w >= prev - 1e-9);
                CHECK(w >= 0.0);
                CHECK(w <= 1.0);
                prev = w;
            }
        }
    }
}

TEST_SUITE("truncation") {
    TEST_CASE("window by substitution") {
        const auto w = truncation_window(0.0, 3.0, 0.5);
        CHECK(w.lower == Approx(-12));
        CHECK(w.upper == Approx(12));
    }

    TEST_CASE("continuity at the knots and slope outside") {
        const auto u = UtilityFunction::exponential(1.0);
        const auto w = truncation_window(0.0, 1.0, 0.5);
        const auto t = truncate(u, 0.0, 1.0, 0.5, 0.25);
        CHECK(t(w.lower) == Approx(u(w.lower)));
        CHECK(t(w.upper) == Approx(u(w.upper)));
        CHECK(t(w.upper + 1) == Approx(u(w.upper) + 0.25));
        CHECK(t(w.lower - 2) == Approx(u(w.lower) - 0.5));
        CHECK(t(0.3) == u(0.3));
    }

    TEST_CASE("default slope is the grid minimum, floored") {
        const auto t = truncate(UtilityFunction::exponential(1.0), 0.0, 1.0, 0.5);
        const auto& tr = std::get<utility::Truncated>(t.family());
        const auto [lo, hi] = oracle::brute_slopes([](double x) { return std::expm1(x); },
                                                   tr.lower, tr.upper, 400);
        CHECK(tr.slope > 0);
        CHECK(tr.slope <= lo * 1.01);
        CHECK(tr.slope >= lo * 0.99);
        (void)hi;

        // exp(-x) flattens to ~e^-40 at the top of the window.
        const auto flat = truncate(UtilityFunction::exponential(-1.0), 0.0, 2.0, 0.9);
        CHECK(std::get<utility::Truncated>(flat.family()).slope == Approx(1e-6));
    }
}

TEST_SUITE("near-zero linearization") {
    TEST_CASE("linear chord") {
        const auto u = linearize_near_zero(UtilityFunction::polynomial_mixed(1, 0.5, 1, 0.5), 0.04);
        CHECK(u(0.02) == Approx(0.1));
        CHECK(u(-0.02) == Approx(-0.1));
        CHECK(u(0.25) == Approx(0.5));
        const auto sq = linearize_near_zero(UtilityFunction::polynomial_mixed(1, 2, 1, 2), 0.1);
        CHECK(sq(0.05) / 0.05 == Approx(0.1));
    }

    TEST_CASE("shift scheme") {
        const auto u = linearize_near_zero(UtilityFunction::polynomial_mixed(1, 0.5, 1, 0.5), 0.01,
                                           LinearizationScheme::Shift);
        CHECK(u(0.0) == 0.0);
        CHECK(u(1.0) == Approx(std::sqrt(1.01) - 0.1));
        CHECK_THROWS_AS(linearize_near_zero(UtilityFunction::linear(), 0.01, LinearizationScheme::Shift),
                        UnsupportedError);
    }

    TEST_CASE("result has a positive slope lower bound") {
        for (double l : {0.3, 0.5, 2.0, 3.0}) {
            const auto u = linearize_near_zero(UtilityFunction::polynomial_mixed(1, l, 1, l));
            const auto b = slope_bounds(u, -1, 1, 401);
            CHECK(b.lower > 0);
        }
    }
}
