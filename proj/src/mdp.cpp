#include "rsrl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

namespace rsrl {

int Mdp::action_index(int s, int a) const noexcept {
    if (s < 0 || s >= n_states()) return -1;
    const auto& acts = states_[s].actions;
    for (std::size_t i = 0; i < acts.size(); ++i)
        if (acts[i].id == a) return static_cast<int>(i);
    return -1;
}

const ActionModel& Mdp::action(int s, int a) const {
    const int idx = action_index(s, a);
    if (idx < 0) {
        throw DomainError("inadmissible pair (s=" + std::to_string(s) +
                          ", a=" + std::to_string(a) + ")");
    }
    return states_[s].actions[idx];
}

int Mdp::n_pairs() const noexcept {
    int n = 0;
    for (const auto& st : states_) n += static_cast<int>(st.actions.size());
    return n;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

std::string pair_tag(int s, int a) {
    return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

void validate_mixture(const GaussianMixtureReward& mix, const std::string& tag,
                      std::vector<std::string>& issues) {
    if (mix.components.empty()) {
        issues.push_back(tag + ": reward mixture has no components");
        return;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < mix.components.size(); ++i) {
        const auto& c = mix.components[i];
        const std::string ctag = tag + " component " + std::to_string(i);
        if (!std::isfinite(c.mean)) issues.push_back(ctag + ": mean is not finite");
        if (!(c.stddev >= 0.0) || !std::isfinite(c.stddev))
            issues.push_back(ctag + ": std must be finite and >= 0");
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
            issues.push_back(ctag + ": weight must be finite and >= 0");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << tag << ": mixture weights sum to " << total;
        issues.push_back(os.str());
    }
}

} // namespace

std::vector<std::string> validate(const Mdp& mdp) {
    std::vector<std::string> issues;
    if (mdp.n_states() == 0) issues.emplace_back("mdp has no states");
    if (!(mdp.discount() >= 0.0 && mdp.discount() < 1.0))
        issues.emplace_back("discount must lie in [0, 1)");

    for (int s = 0; s < mdp.n_states(); ++s) {
        const auto& acts = mdp.actions(s);
        if (acts.empty()) issues.push_back("state " + std::to_string(s) + " has no actions");
        std::set<int> seen;
        for (const auto& act : acts) {
            const std::string tag = pair_tag(s, act.id);
            if (act.id < 0) issues.push_back(tag + ": action id must be >= 0");
            if (!seen.insert(act.id).second) issues.push_back(tag + ": duplicate action id");

            if (act.transitions.empty()) issues.push_back(tag + ": empty transition row");
            double total = 0.0;
            for (const auto& nx : act.transitions) {
                if (nx.state < 0 || nx.state >= mdp.n_states())
                    issues.push_back(tag + ": next state " + std::to_string(nx.state) +
                                     " out of range");
                if (!(nx.probability >= 0.0) || !std::isfinite(nx.probability))
                    issues.push_back(tag + ": transition probability must be >= 0");
                total += nx.probability;
            }
            if (std::abs(total - 1.0) > 1e-12) {
                std::ostringstream os;
                os << tag << ": transition row sums to " << total;
                issues.push_back(os.str());
            }
            if (const auto* mix = std::get_if<GaussianMixtureReward>(&act.reward))
                validate_mixture(*mix, tag, issues);
        }
    }
    return issues;
}

void require_valid(const Mdp& mdp) {
    auto issues = validate(mdp);
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

// ---------------------------------------------------------------------------
// Rewards and sampling

double sample_reward(const RewardModel& model, Rng& rng) {
    if (const auto* dist = std::get_if<FiniteDistribution>(&model)) {
        const auto outcomes = dist->outcomes();
        if (outcomes.size() == 1) return outcomes[0].value;
        std::vector<double> w(outcomes.size());
        for (std::size_t i = 0; i < outcomes.size(); ++i) w[i] = outcomes[i].probability;
        return outcomes[rng.categorical(w)].value;
    }
    const auto& comps = std::get<GaussianMixtureReward>(model).components;
    std::size_t k = 0;
    if (comps.size() > 1) {
        std::vector<double> w(comps.size());
        for (std::size_t i = 0; i < comps.size(); ++i) w[i] = comps[i].weight;
        k = rng.categorical(w);
    }
    const auto& c = comps[k];
    if (c.stddev == 0.0) return c.mean + 0.0;  // no negative zero for a = 0
    return rng.normal(c.mean, c.stddev);
}

double reward_mean(const RewardModel& model) {
    if (const auto* dist = std::get_if<FiniteDistribution>(&model)) return dist->mean();
    double m = 0.0;
    for (const auto& c : std::get<GaussianMixtureReward>(model).components) m += c.weight * c.mean;
    return m;
}

double reward_second_moment(const RewardModel& model) {
    double m2 = 0.0;
    if (const auto* dist = std::get_if<FiniteDistribution>(&model)) {
        for (const auto& o : dist->outcomes()) m2 += o.probability * o.value * o.value;
        return m2;
    }
    for (const auto& c : std::get<GaussianMixtureReward>(model).components)
        m2 += c.weight * (c.stddev * c.stddev + c.mean * c.mean);
    return m2;
}

bool has_finite_support(const RewardModel& model) noexcept {
    return std::holds_alternative<FiniteDistribution>(model);
}

Transition sample_transition(const Mdp& mdp, int s, int a, Rng& rng, long t) {
    const auto& act = mdp.action(s, a);
    int next = act.transitions.front().state;
    if (act.transitions.size() > 1) {
        std::vector<double> w(act.transitions.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = act.transitions[i].probability;
        next = act.transitions[rng.categorical(w)].state;
    }
    const double r = sample_reward(act.reward, rng);
    return Transition{t, s, a, r, next};
}

Mdp discretize_rewards(const Mdp& mdp, int quantiles) {
    if (quantiles < 1) throw DomainError("discretization needs at least one quantile");
    auto states = mdp.states();
    for (auto& st : states) {
        for (auto& act : st.actions) {
            const auto* mix = std::get_if<GaussianMixtureReward>(&act.reward);
            if (mix == nullptr) continue;
            std::vector<Outcome> outcomes;
            for (const auto& c : mix->components) {
                if (c.weight == 0.0) continue;
                if (c.stddev == 0.0) {
                    outcomes.push_back({c.mean, c.weight});
                    continue;
                }
                const boost::math::normal_distribution<double> normal(c.mean, c.stddev);
                for (int i = 0; i < quantiles; ++i) {
                    const double q = (i + 0.5) / quantiles;
                    outcomes.push_back({boost::math::quantile(normal, q), c.weight / quantiles});
                }
            }
            act.reward = FiniteDistribution(std::move(outcomes));
        }
    }
    return Mdp(std::move(states), mdp.discount());
}

// ---------------------------------------------------------------------------
// Investment game

InvestmentGameConfig InvestmentGameConfig::defaults() {
    InvestmentGameConfig cfg;
    // Component means are (M + (1 - p) g, M - p g) around the state mean M
    // with gap g = 8. State means: 8, 22, 13.3, 10, -4, 10, -13.6.
    cfg.states = {{
        {10.0, 2.0, 0.75},
        {28.0, 20.0, 0.25},
        {17.3, 9.3, 0.5},
        {12.0, 4.0, 0.75},
        {2.0, -6.0, 0.25},
        {14.0, 6.0, 0.5},
        {-7.6, -15.6, 0.25},
    }};
    return cfg;
}

Mdp build_investment_game(const InvestmentGameConfig& cfg) {
    std::vector<std::string> issues;
    for (int s = 0; s < kGameStates; ++s) {
        const auto& pc = cfg.states[s];
        if (!(pc.prob_high >= 0.0 && pc.prob_high <= 1.0))
            issues.push_back("game state " + std::to_string(s) + ": probability outside [0, 1]");
        if (!std::isfinite(pc.mean_high) || !std::isfinite(pc.mean_low))
            issues.push_back("game state " + std::to_string(s) + ": mean is not finite");
    }
    if (!(cfg.price_std >= 0.0)) issues.emplace_back("game price std must be >= 0");
    if (!issues.empty()) throw ValidationError(std::move(issues));

    // successor[s] = {risk-seeking successor, risk-averse successor}
    constexpr std::array<std::array<int, 2>, kGameStates> successor{{
        {1, 2}, {3, 4}, {5, 6}, {0, 0}, {0, 0}, {0, 0}, {0, 0}}};

    std::vector<StateModel> states(kGameStates);
    for (int s = 0; s < kGameStates; ++s) {
        const auto& pc = cfg.states[s];
        for (int a = 0; a < kGameActions; ++a) {
            const int next = successor[s][is_risk_seeking_action(a) ? 0 : 1];
            GaussianMixtureReward reward{{
                {a * pc.mean_high, a * cfg.price_std, pc.prob_high},
                {a * pc.mean_low, a * cfg.price_std, 1.0 - pc.prob_high},
            }};
            states[s].actions.push_back(ActionModel{a, {{next, 1.0}}, std::move(reward)});
        }
    }
    return Mdp(std::move(states), cfg.discount);
}

std::vector<GamePath> enumerate_paths(const Mdp& mdp, int start) {
    auto deterministic_next = [&](int s, const ActionModel& act) {
        if (act.transitions.size() != 1)
            throw UnsupportedError("path enumeration needs deterministic transitions at state " +
                                   std::to_string(s));
        return act.transitions.front().state;
    };
    auto successors = [&](int s) {
        std::set<int> next;
        for (const auto& act : mdp.actions(s)) next.insert(deterministic_next(s, act));
        return next;
    };
    auto consistent = [&](int s, int target) {
        std::vector<int> ids;
        for (const auto& act : mdp.actions(s))
            if (deterministic_next(s, act) == target) ids.push_back(act.id);
        return ids;
    };
    auto all_actions = [&](int s) {
        std::vector<int> ids;
        for (const auto& act : mdp.actions(s)) ids.push_back(act.id);
        return ids;
    };

    std::vector<GamePath> paths;
    for (int s1 : successors(start)) {
        for (int s2 : successors(s1)) {
            GamePath p;
            p.states = {start, s1, s2};
            p.consistent_actions = {consistent(start, s1), consistent(s1, s2), all_actions(s2)};
            paths.push_back(std::move(p));
        }
    }
    return paths;
}

namespace {

constexpr long kBlockRounds = 4096;

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    long count = 0;
};

Moments simulate_path_block(const Mdp& mdp, const GamePath& path, long rounds, std::uint64_t seed) {
    Rng rng(seed);
    Moments m;
    for (long r = 0; r < rounds; ++r) {
        double total = 0.0;
        for (int k = 0; k < kGameDecisionsPerRound; ++k) {
            const auto& ids = path.consistent_actions[k];
            const int a = ids[rng.uniform_index(ids.size())];
            total += sample_transition(mdp, path.states[k], a, rng).reward;
        }
        m.sum += total;
        m.sum_sq += total * total;
        ++m.count;
    }
    return m;
}

std::vector<long> count_uniform_paths(const Mdp& mdp, const std::vector<GamePath>& paths,
                                      long rounds, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<long> counts(paths.size(), 0);
    for (long r = 0; r < rounds; ++r) {
        std::array<int, kGameDecisionsPerRound> visited{};
        int s = paths.front().states[0];
        for (int k = 0; k < kGameDecisionsPerRound; ++k) {
            visited[k] = s;
            const auto& acts = mdp.actions(s);
            const int a = acts[rng.uniform_index(acts.size())].id;
            s = sample_transition(mdp, s, a, rng).next_state;
        }
        for (std::size_t i = 0; i < paths.size(); ++i)
            if (paths[i].states == visited) ++counts[i];
    }
    return counts;
}

} // namespace

std::vector<PathStatistics> path_statistics(const Mdp& mdp, long n_rounds, std::uint64_t seed,
                                            int jobs) {
    if (n_rounds < 1) throw DomainError("path statistics need at least one round");
    require_valid(mdp);
    const auto paths = enumerate_paths(mdp);
    const long n_blocks = (n_rounds + kBlockRounds - 1) / kBlockRounds;
    const auto block_size = [&](long b) { return std::min(kBlockRounds, n_rounds - b * kBlockRounds); };

    // Task list: one entry per (path, block); the extra "path" index
    // paths.size() is the uniform-policy visit count.
    const std::size_t n_tasks = (paths.size() + 1) * static_cast<std::size_t>(n_blocks);
    std::vector<Moments> moments(paths.size() * n_blocks);
    std::vector<std::vector<long>> visits(n_blocks);

    auto run_task = [&](std::size_t task) {
        const std::size_t p = task / n_blocks;
        const long b = static_cast<long>(task % n_blocks);
        const std::uint64_t block_seed = derive_seed(seed, p * 1'000'003ULL + b);
        if (p < paths.size())
            moments[task] = simulate_path_block(mdp, paths[p], block_size(b), block_seed);
        else
            visits[b] = count_uniform_paths(mdp, paths, block_size(b), block_seed);
    };

    const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
    } else {
        std::vector<std::future<void>> futures;
        for (std::size_t w = 0; w < workers; ++w) {
            futures.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t t = w; t < n_tasks; t += workers) run_task(t);
            }));
        }
        for (auto& f : futures) f.get();
    }

    std::vector<PathStatistics> out;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        Moments total;
        for (long b = 0; b < n_blocks; ++b) {
            const auto& m = moments[p * n_blocks + b];
            total.sum += m.sum;
            total.sum_sq += m.sum_sq;
            total.count += m.count;
        }
        const double n = static_cast<double>(total.count);
        const double mean = total.sum / n;
        const double var = n > 1 ? std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1)) : 0.0;

        double ev = 0.0;
        double var_exact = 0.0;
        for (int k = 0; k < kGameDecisionsPerRound; ++k) {
            const auto& ids = paths[p].consistent_actions[k];
            double m1 = 0.0;
            double m2 = 0.0;
            for (int a : ids) {
                const auto& reward = mdp.action(paths[p].states[k], a).reward;
                m1 += reward_mean(reward);
                m2 += reward_second_moment(reward);
            }
            m1 /= static_cast<double>(ids.size());
            m2 /= static_cast<double>(ids.size());
            ev += m1;
            var_exact += m2 - m1 * m1;
        }

        long hits = 0;
        for (const auto& v : visits) hits += v[p];

        out.push_back(PathStatistics{paths[p], mean, std::sqrt(var / n), std::sqrt(var), ev,
                                     std::sqrt(std::max(0.0, var_exact)),
                                     static_cast<double>(hits) / static_cast<double>(n_rounds)});
    }
    return out;
}

std::vector<Transition> simulate(const Mdp& mdp, const Policy& policy, long n_steps, Rng& rng,
                                 int start) {
    if (start < 0 || start >= mdp.n_states()) throw DomainError("start state out of range");
    std::vector<Transition> out;
    out.reserve(static_cast<std::size_t>(std::max(0L, n_steps)));
    int s = start;
    for (long t = 0; t < n_steps; ++t) {
        const int a = policy(s, rng);
        out.push_back(sample_transition(mdp, s, a, rng, t));
        s = out.back().next_state;
    }
    return out;
}

Policy uniform_policy(const Mdp& mdp) {
    return [&mdp](int s, Rng& rng) {
        const auto& acts = mdp.actions(s);
        return acts[rng.uniform_index(acts.size())].id;
    };
}

} // namespace rsrl
