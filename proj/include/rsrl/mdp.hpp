#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rsrl/rng.hpp"
#include "rsrl/valuation.hpp"

namespace rsrl {

struct GaussianComponent {
    double mean;
    double stddev;
    double weight;
};

/// Sampler-backed reward: a finite mixture of Gaussians.
struct GaussianMixtureReward {
    std::vector<GaussianComponent> components;
};

/// Finite-support rewards use FiniteDistribution directly.
using RewardModel = std::variant<FiniteDistribution, GaussianMixtureReward>;

struct NextState {
    int state;
    double probability;
};

struct ActionModel {
    int id;
    std::vector<NextState> transitions;
    RewardModel reward;
};

struct StateModel {
    std::vector<ActionModel> actions;
};

/// Finite MDP over states 0..n-1 with per-state admissible action ids.
/// Construction does not validate; use validate() or require_valid().
class Mdp {
public:
    Mdp(std::vector<StateModel> states, double discount)
        : states_(std::move(states)), discount_(discount) {}

    int n_states() const noexcept { return static_cast<int>(states_.size()); }
    double discount() const noexcept { return discount_; }
    const std::vector<StateModel>& states() const noexcept { return states_; }
    const std::vector<ActionModel>& actions(int s) const { return states_.at(s).actions; }

    /// Position of action id `a` in actions(s), or -1 when inadmissible.
    int action_index(int s, int a) const noexcept;
    bool admissible(int s, int a) const noexcept { return action_index(s, a) >= 0; }

    /// Throws DomainError when (s, a) is inadmissible.
    const ActionModel& action(int s, int a) const;

    /// Number of admissible (s, a) pairs.
    int n_pairs() const noexcept;

    Mdp with_discount(double discount) const { return Mdp(states_, discount); }

private:
    std::vector<StateModel> states_;
    double discount_;
};

/// Every invariant violation, each naming its (s, a) coordinates. Empty when valid.
std::vector<std::string> validate(const Mdp& mdp);

/// Throws ValidationError carrying validate()'s issues.
void require_valid(const Mdp& mdp);

struct Transition {
    long t;
    int state;
    int action;
    double reward;
    int next_state;

    bool operator==(const Transition&) const = default;
};

double sample_reward(const RewardModel& model, Rng& rng);
double reward_mean(const RewardModel& model);
double reward_second_moment(const RewardModel& model);
bool has_finite_support(const RewardModel& model) noexcept;

/// Draws s' ~ P(.|s,a) and then the reward, in that order.
Transition sample_transition(const Mdp& mdp, int s, int a, Rng& rng, long t = 0);

/// Replaces every Gaussian component by `quantiles` equally weighted points at
/// the midpoint quantiles (i + 1/2) / quantiles. Point components stay points.
Mdp discretize_rewards(const Mdp& mdp, int quantiles = 41);

// ---------------------------------------------------------------------------
// Sequential investment game

/// Two-component price-change mixture of one game state.
struct PriceChangeModel {
    double mean_high;
    double mean_low;
    double prob_high;
};

inline constexpr int kGameStates = 7;
inline constexpr int kGameActions = 4;
inline constexpr int kGameDecisionsPerRound = 3;

struct InvestmentGameConfig {
    /// Indexed by state id; id k is the figure's state k + 1.
    std::array<PriceChangeModel, kGameStates> states;
    double price_std = 5.0;
    double discount = 0.9;
    int rounds = 80;

    /// Calibrated non-canonical defaults: per-path expected round totals of
    /// 90, 25, 52.25 and -9.75.
    static InvestmentGameConfig defaults();
};

/// Actions 2 and 3 follow the risk-seeking edge, 0 and 1 the risk-averse one.
inline bool is_risk_seeking_action(int a) { return a >= 2; }

/// 7 states, actions 0..3 everywhere; reward a x price change.
/// Topology: 0 -> {1 RS, 2 RA}, 1 -> {3 RS, 4 RA}, 2 -> {5 RS, 6 RA}, 3..6 -> 0.
Mdp build_investment_game(const InvestmentGameConfig& cfg);

/// A three-state path and, per step, the actions consistent with it.
struct GamePath {
    std::array<int, kGameDecisionsPerRound> states;
    std::array<std::vector<int>, kGameDecisionsPerRound> consistent_actions;
};

/// Paths of length 3 from state 0 over deterministic transitions, ordered by
/// successor ids (Path 1 first). The last step admits every action.
std::vector<GamePath> enumerate_paths(const Mdp& mdp, int start = 0);

struct PathStatistics {
    GamePath path;
    double ev_mc;
    double ev_stderr;
    double std_mc;
    double ev_exact;
    double std_exact;
    /// Fraction of rounds following this path under the uniform random policy.
    double visit_frequency;
};

/// Monte-Carlo per-round total-reward statistics under the policy that picks
/// uniformly among the actions consistent with each path, plus exact moments.
/// Rounds are split into fixed blocks with derived seeds, so results do not
/// depend on `jobs`.
std::vector<PathStatistics> path_statistics(const Mdp& mdp, long n_rounds, std::uint64_t seed,
                                            int jobs = 1);

using Policy = std::function<int(int state, Rng& rng)>;

/// Runs `n_steps` transitions from `start` under `policy`; t counts from 0.
std::vector<Transition> simulate(const Mdp& mdp, const Policy& policy, long n_steps, Rng& rng,
                                 int start = 0);

Policy uniform_policy(const Mdp& mdp);

} // namespace rsrl
