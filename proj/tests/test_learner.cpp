#include <doctest.h>

#include <cmath>
#include <numbers>

#include "rsrl/errors.hpp"
#include "rsrl/io.hpp"
#include "rsrl/learner.hpp"
#include "rsrl/solver.hpp"
#include "support/oracles.hpp"

using namespace rsrl;
using doctest::Approx;

namespace {

Mdp one_state() {
    std::vector<StateModel> st(1);
    st[0].actions.push_back({0, {{0, 1.0}}, FiniteDistribution::point_mass(1.0)});
    return Mdp(std::move(st), 0.5);
}

Mdp two_action_one_state() {
    std::vector<StateModel> st(2);
    for (int s = 0; s < 2; ++s) {
        st[s].actions.push_back({0, {{0, 0.5}, {1, 0.5}}, FiniteDistribution::two_point(3, -2, 0.5)});
        st[s].actions.push_back({1, {{1 - s, 1.0}}, FiniteDistribution::point_mass(0.5)});
    }
    return Mdp(std::move(st), 0.5);
}

Mdp fixture() { return io::load_mdp(RSRL_FIXTURES "/three_state.json"); }

const auto kMixGain = UtilityFunction::polynomial_mixed(0.5, 2.0, 1.0, 1.0);
const auto kMixLoss = UtilityFunction::polynomial_mixed(1.0, 1.0, 1.0, 2.0);

LearnerConfig convergence_config(const Mdp& m, Algorithm alg, Shortfall s, std::uint64_t seed) {
    LearnerConfig cfg;
    cfg.algorithm = alg;
    cfg.shortfall = std::move(s);
    cfg.gamma = m.discount();
    cfg.schedule = Schedule::inverse_visit();
    cfg.beta = 1.0;
    cfg.steps = 200000;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_SUITE("softmax") {
    TEST_CASE("examples") {
        for (double beta : {0.0, 0.5, 40.0})
            for (double p : softmax_probabilities(std::vector<double>{1, 1, 1, 1}, beta)) CHECK(p == Approx(0.25));
        for (double p : softmax_probabilities(std::vector<double>{5, -3, 100}, 0.0)) CHECK(p == Approx(1.0 / 3));
        const auto p = softmax_probabilities(std::vector<double>{1, 0}, std::log(3.0));
        CHECK(p[0] == Approx(0.75).epsilon(1e-14));
        CHECK(p[1] == Approx(0.25).epsilon(1e-14));
    }

    TEST_CASE("huge beta and huge values stay finite") {
        const auto p = softmax_probabilities(std::vector<double>{1e6, 1e6 - 1, -1e6}, 1e4);
        double total = 0;
        for (double x : p) {
            CHECK(std::isfinite(x));
            total += x;
        }
        CHECK(total == Approx(1.0));
        CHECK(p[0] == Approx(1.0));
    }

    TEST_CASE("sampled frequencies") {
        const auto m = two_action_one_state();
        QTable q(m);
        q.at(0, 0) = 1.0;
        Rng rng(4);
        const int n = 100000;
        int zero = 0;
        for (int i = 0; i < n; ++i) zero += softmax_action(q, 0, std::log(3.0), rng) == 0;
        CHECK(std::abs(zero / double(n) - 0.75) < 3 * std::sqrt(0.75 * 0.25 / n));
    }
}

TEST_SUITE("updates") {
    const Mdp m = two_action_one_state();

    TEST_CASE("td error") {
        QTable q(m);
        CHECK(td_error(q, {0, 0, 0, 2.0, 1}, 0.5) == 2.0);
        q.at(0, 0) = 1.0;
        q.at(1, 1) = 2.0;
        CHECK(td_error(q, {0, 0, 0, 0.0, 1}, 0.5) == 0.0);
        CHECK_THROWS_AS(td_error(q, {0, 0, 5, 0.0, 1}, 0.5), DomainError);
    }

    TEST_CASE("rsql arithmetic") {
        QTable q(m);
        rsql_step(q, {0, 0, 0, 3.0, 1}, 0.5, UtilityFunction::linear(), 0.0, 0.1);
        CHECK(q(0, 0) == Approx(0.3));
        QTable g(m);
        rsql_step(g, {0, 0, 0, 3.0, 1}, 0.5, kMixGain, 0.0, 0.1);
        CHECK(g(0, 0) == Approx(0.45));
        QTable l(m);
        const auto r = rsql_step(l, {0, 0, 0, -2.0, 1}, 0.5, kMixLoss, 0.0, 0.1);
        CHECK(l(0, 0) == Approx(-0.4));
        CHECK(r.td == -2.0);
        CHECK(r.update == Approx(-0.4));
    }

    TEST_CASE("eu arithmetic") {
        QTable q(m);
        eu_step(q, {0, 0, 0, 3.0, 1}, 0.5, kMixGain, 0.0, 0.1);
        CHECK(q(0, 0) == Approx(0.45));
        QTable z(m);
        z.at(0, 0) = 1.0;
        eu_step(z, {0, 0, 0, 0.0, 1}, 0.5, kMixGain, 0.0, 0.1);
        CHECK(z(0, 0) == Approx(0.9));
    }

    TEST_CASE("linear utility reduces to the standard step") {
        oracle::Gen g(12);
        QTable a(m), b(m), c(m);
        for (int i = 0; i < 1000; ++i) {
            const int s = g.integer(0, 1), act = g.integer(0, 1);
            const Transition t{i, s, act, g.uniform(-4, 4), g.integer(0, 1)};
            const double alpha = g.uniform(0.01, 1);
            const auto ra = rsql_step(a, t, 0.7, UtilityFunction::linear(), 0.0, alpha);
            const auto rb = eu_step(b, t, 0.7, UtilityFunction::linear(), 0.0, alpha);
            const auto rc = standard_q_step(c, t, 0.7, alpha);
            CHECK(ra.update == rc.update);
            CHECK(rb.update == Approx(rc.update).epsilon(1e-12));
        }
        CHECK(a == c);
    }

    TEST_CASE("non-finite update names the step") {
        QTable q(m);
        try {
            rsql_step(q, {41, 0, 0, std::numeric_limits<double>::infinity(), 1}, 0.5,
                      UtilityFunction::linear(), 0.0, 0.1);
            FAIL("expected a NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("41") != std::string::npos);
        }
    }
}

TEST_SUITE("run") {
    TEST_CASE("config validation") {
        const auto m = one_state();
        LearnerConfig cfg;
        cfg.gamma = 1.0;
        CHECK_THROWS_AS(run(m, cfg), ConfigError);
        cfg = {};
        cfg.schedule = Schedule::constant(0.0);
        CHECK_THROWS_AS(run(m, cfg), ConfigError);
        cfg = {};
        cfg.beta = -1;
        CHECK_THROWS_AS(run(m, cfg), ConfigError);
        cfg = {};
        cfg.start_state = 3;
        CHECK_THROWS_AS(run(m, cfg), ConfigError);
        CHECK(parse_algorithm("rsql_truncated") == Algorithm::RSQLTruncated);
        CHECK(to_string(Algorithm::EU) == "eu");
        CHECK_THROWS_AS(parse_algorithm("sarsa"), ConfigError);
    }

    TEST_CASE("standard Q on one state converges monotonically to 2") {
        LearnerConfig cfg;
        cfg.algorithm = Algorithm::StandardQ;
        cfg.gamma = 0.5;
        cfg.schedule = Schedule::constant(0.1);
        cfg.steps = 2000;
        cfg.snapshot_every = 1;
        const auto r = run(one_state(), cfg);
        double prev = 0;
        for (const auto& [step, q] : r.trace.snapshots) {
            CHECK(q(0, 0) >= prev);
            CHECK(q(0, 0) <= 2.0);
            prev = q(0, 0);
        }
        CHECK(std::abs(r.q(0, 0) - 2.0) < 0.01);
        CHECK(r.counts.total() == 2000);
    }

    TEST_CASE("seed determinism") {
        const auto m = build_investment_game(InvestmentGameConfig::defaults());
        LearnerConfig cfg;
        cfg.shortfall = Shortfall(UtilityFunction::piecewise_linear(0.3), 0.0);
        cfg.steps = 3000;
        cfg.seed = 99;
        cfg.record_trace = true;
        const auto a = run(m, cfg), b = run(m, cfg);
        CHECK(a.q == b.q);
        REQUIRE(a.trace.steps.size() == b.trace.steps.size());
        for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
            CHECK(a.trace.steps[i].transition == b.trace.steps[i].transition);
            CHECK(a.trace.steps[i].td == b.trace.steps[i].td);
            CHECK(a.trace.steps[i].update == b.trace.steps[i].update);
        }
        cfg.seed = 100;
        CHECK_FALSE(run(m, cfg).q == a.q);
    }

    TEST_CASE("exactly one entry changes per step") {
        const auto m = fixture();
        auto cfg = convergence_config(m, Algorithm::RSQL, Shortfall(UtilityFunction::exponential(-0.5), 0.0), 5);
        cfg.steps = 500;
        cfg.snapshot_every = 1;
        cfg.record_trace = true;
        const auto r = run(m, cfg);
        QTable prev(m);
        for (std::size_t i = 0; i < r.trace.snapshots.size(); ++i) {
            const auto& q = r.trace.snapshots[i].second;
            const auto& t = r.trace.steps[i].transition;
            for (int s = 0; s < m.n_states(); ++s)
                for (int a : q.action_ids(s))
                    if (s != t.state || a != t.action) CHECK(q(s, a) == prev(s, a));
            prev = q;
        }
    }

    TEST_CASE("visit counts sum to steps and satisfy Robbins-Monro sums") {
        const auto m = fixture();
        auto cfg = convergence_config(m, Algorithm::RSQL, Shortfall(UtilityFunction::linear(), 0.0), 1);
        cfg.steps = 50000;
        const auto r = run(m, cfg);
        CHECK(r.counts.total() == 50000);
        const auto sched = Schedule::inverse_visit();
        for (int s = 0; s < m.n_states(); ++s)
            for (long n : r.counts.row(s)) {
                REQUIRE(n > 0);
                double sum = 0, sum2 = 0;
                for (long k = 1; k <= n; ++k) {
                    sum += sched.rate(k);
                    sum2 += sched.rate(k) * sched.rate(k);
                }
                CHECK(sum >= std::log(double(n) + 1));
                CHECK(sum2 <= std::numbers::pi * std::numbers::pi / 6);
            }
    }

    TEST_CASE("rsql with linear utility replays standard Q bit for bit") {
        const auto m = build_investment_game(InvestmentGameConfig::defaults());
        for (auto sched : {Schedule::constant(0.2), Schedule::inverse_visit()}) {
            LearnerConfig cfg;
            cfg.schedule = sched;
            cfg.steps = 20000;
            cfg.seed = 17;
            cfg.beta = 0.05;
            cfg.record_trace = true;
            const auto a = run(m, cfg);
            cfg.algorithm = Algorithm::StandardQ;
            const auto b = run(m, cfg);
            CHECK(a.q == b.q);
            for (std::size_t i = 0; i < a.trace.steps.size(); ++i) {
                CHECK(a.trace.steps[i].transition == b.trace.steps[i].transition);
                CHECK(a.trace.steps[i].update == b.trace.steps[i].update);
            }
        }
    }

    TEST_CASE("learned Q approaches the solver's Q*") {
        const auto m = fixture();
        struct Case {
            const char* name;
            Algorithm alg;
            Shortfall s;
        };
        const Case cases[] = {
            {"linear", Algorithm::RSQL, Shortfall(UtilityFunction::linear(), 0.0)},
            {"piecewise +0.5", Algorithm::RSQL, Shortfall(UtilityFunction::piecewise_linear(0.5), 0.0)},
            {"piecewise -0.5", Algorithm::RSQL, Shortfall(UtilityFunction::piecewise_linear(-0.5), 0.0)},
            {"truncated entropic", Algorithm::RSQLTruncated, Shortfall(UtilityFunction::entropic(-0.8), -1.0)},
        };
        for (const auto& c : cases) {
            const auto qstar = value_iteration(m, c.s, 1e-10).q;
            for (std::uint64_t seed = 1; seed <= 10; ++seed) {
                const auto r = run(m, convergence_config(m, c.alg, c.s, seed));
                INFO(std::string(c.name) << " seed " << seed);
                CHECK(r.q.sup_distance(qstar) < 0.05);
            }
        }
    }

    TEST_CASE("truncated and plain traces agree inside the window") {
        const auto m = fixture();
        const Shortfall s(UtilityFunction::exponential(0.2), 0.0);
        auto cfg = convergence_config(m, Algorithm::RSQL, s, 8);
        cfg.steps = 20000;
        cfg.record_trace = true;
        const auto plain = run(m, cfg);
        cfg.algorithm = Algorithm::RSQLTruncated;
        const auto trunc = run(m, cfg);
        const auto w = truncation_window(s.reference_root(), reward_bound(m), m.discount());
        for (const auto& st : plain.trace.steps) {
            REQUIRE(st.td >= w.lower);
            REQUIRE(st.td <= w.upper);
        }
        REQUIRE(plain.trace.steps.size() == trunc.trace.steps.size());
        for (std::size_t i = 0; i < plain.trace.steps.size(); ++i) {
            CHECK(plain.trace.steps[i].transition == trunc.trace.steps[i].transition);
            CHECK(plain.trace.steps[i].update == trunc.trace.steps[i].update);
        }
        CHECK(plain.q == trunc.q);
    }

    TEST_CASE("clamping keeps Q inside its bounds") {
        const auto m = fixture();
        auto cfg = convergence_config(m, Algorithm::RSQLTruncated, Shortfall(UtilityFunction::linear(), 0.0), 2);
        cfg.steps = 5000;
        cfg.q_init = 100.0;
        cfg.truncation.clamp_q = true;
        const auto r = run(m, cfg);
        const double hi = reward_bound(m) / (1 - m.discount());
        for (int s = 0; s < m.n_states(); ++s)
            for (double x : r.q.row(s)) CHECK(x <= hi + 1e-12);
    }
}

TEST_SUITE("exploration") {
    const Mdp game = build_investment_game(InvestmentGameConfig::defaults());

    TEST_CASE("softmax with beta 1 visits every pair of the game") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            LearnerConfig cfg;
            cfg.steps = 10000;
            cfg.seed = seed;
            const auto rep = exploration_report(run(game, cfg).counts);
            CHECK(rep.entries.size() == 28);
            CHECK(rep.min_count > 0);
            CHECK(rep.starved.empty());
        }
    }

    TEST_CASE("a greedy agent on a biased table starves pairs") {
        LearnerConfig cfg;
        cfg.algorithm = Algorithm::StandardQ;
        cfg.schedule = Schedule::constant(0.1);
        cfg.beta = 1e6;
        cfg.q_init = -1000.0;
        cfg.steps = 3000;
        const auto rep = exploration_report(run(game, cfg).counts);
        CHECK(rep.min_count == 0);
        CHECK_FALSE(rep.starved.empty());
    }

    TEST_CASE("zero steps") {
        LearnerConfig cfg;
        const auto r = run(game, cfg);
        const auto rep = exploration_report(r.counts);
        CHECK(r.counts.total() == 0);
        CHECK(rep.min_count == 0);
        CHECK(rep.starved.size() == 28);
        for (const auto& e : rep.entries) CHECK(e.count == 0);
    }
}
