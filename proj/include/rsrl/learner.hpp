#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "rsrl/mdp.hpp"
#include "rsrl/qtable.hpp"
#include "rsrl/rng.hpp"
#include "rsrl/valuation.hpp"

namespace rsrl {

enum class Algorithm {
    RSQL,           ///< Q += alpha (u(TD) - x0)
    RSQLTruncated,  ///< same with the truncated utility
    EU,             ///< Q += alpha (u(r) - x0 + gamma max Q' - Q)
    StandardQ,      ///< Q += alpha TD
};

std::string_view to_string(Algorithm a) noexcept;
Algorithm parse_algorithm(std::string_view name);

struct Schedule {
    enum class Kind { InverseVisit, Constant };
    Kind kind = Kind::InverseVisit;
    double alpha = 0.1;  ///< Constant only

    static Schedule inverse_visit() { return {Kind::InverseVisit, 0.0}; }
    static Schedule constant(double alpha) { return {Kind::Constant, alpha}; }

    /// Learning rate after the pair's `visits`-th visit (visits >= 1).
    double rate(long visits) const noexcept {
        return kind == Kind::InverseVisit ? 1.0 / static_cast<double>(visits) : alpha;
    }
};

struct TruncationSettings {
    /// Defaults to reward_bound(mdp) when unset.
    std::optional<double> reward_bound;
    /// Defaults to the grid-estimated minimal slope (see truncate()).
    std::optional<double> slope;
    /// Also clamp the updated entry into the Q* bounds after every step.
    bool clamp_q = false;
};

struct LearnerConfig {
    Algorithm algorithm = Algorithm::RSQL;
    Shortfall shortfall{UtilityFunction::linear(), 0.0};
    double gamma = 0.9;
    Schedule schedule;
    double beta = 1.0;
    long steps = 0;
    std::uint64_t seed = 0;
    int start_state = 0;
    double q_init = 0.0;
    TruncationSettings truncation;
    bool record_trace = false;
    /// Store a copy of Q every this many steps (0 = never).
    long snapshot_every = 0;
};

/// Throws ConfigError on gamma, alpha, beta, steps or start-state violations.
void validate_config(const LearnerConfig& cfg, const Mdp& mdp);

class VisitCounts {
public:
    VisitCounts() = default;
    explicit VisitCounts(const Mdp& mdp);

    int n_states() const noexcept { return static_cast<int>(counts_.size()); }
    const std::vector<int>& action_ids(int s) const { return ids_.at(s); }
    std::span<const long> row(int s) const { return counts_.at(s); }
    long operator()(int s, int a) const;

    /// Returns the new count.
    long increment(int s, int a);
    long total() const noexcept;

private:
    std::vector<std::vector<int>> ids_;
    std::vector<std::vector<long>> counts_;
};

struct TraceStep {
    Transition transition;
    double td;
    double update;
};

struct RunTrace {
    std::vector<TraceStep> steps;
    std::vector<std::pair<long, QTable>> snapshots;
};

struct RunResult {
    QTable q;
    VisitCounts counts;
    RunTrace trace;
};

/// Softmax over one Q row with the row max subtracted first.
std::vector<double> softmax_probabilities(std::span<const double> q_row, double beta);

int softmax_action(const QTable& q, int s, double beta, Rng& rng);

/// r + gamma max_a Q(s', a) - Q(s, a)
double td_error(const QTable& q, const Transition& t, double gamma);

struct StepResult {
    double td;
    double update;
};

// Each step changes only Q(s_t, a_t) and throws NumericError naming the
// transition's time index if the new value is not finite.

StepResult rsql_step(QTable& q, const Transition& t, double gamma, const UtilityFunction& u,
                     double x0, double alpha);

StepResult eu_step(QTable& q, const Transition& t, double gamma, const UtilityFunction& u,
                   double x0, double alpha);

StepResult standard_q_step(QTable& q, const Transition& t, double gamma, double alpha);

/// Softmax exploration, sampling and updating for cfg.steps transitions.
RunResult run(const Mdp& mdp, const LearnerConfig& cfg);

struct ExplorationReport {
    struct Entry {
        int state;
        int action;
        long count;
    };
    std::vector<Entry> entries;
    long min_count = 0;
    std::vector<Entry> starved;  ///< pairs never visited
};

ExplorationReport exploration_report(const VisitCounts& counts);

} // namespace rsrl
