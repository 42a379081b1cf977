#include "rsrl/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rsrl/solver.hpp"

namespace rsrl {

std::string_view to_string(Algorithm a) noexcept {
    switch (a) {
    case Algorithm::RSQL: return "rsql";
    case Algorithm::RSQLTruncated: return "rsql_truncated";
    case Algorithm::EU: return "eu";
    case Algorithm::StandardQ: return "standard_q";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    for (auto a : {Algorithm::RSQL, Algorithm::RSQLTruncated, Algorithm::EU, Algorithm::StandardQ})
        if (to_string(a) == name) return a;
    throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

void validate_config(const LearnerConfig& cfg, const Mdp& mdp) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (cfg.schedule.kind == Schedule::Kind::Constant &&
        !(cfg.schedule.alpha > 0.0 && cfg.schedule.alpha <= 1.0))
        throw ConfigError("constant learning rate must lie in (0, 1]");
    if (!(cfg.beta >= 0.0) || !std::isfinite(cfg.beta)) throw ConfigError("beta must be >= 0");
    if (cfg.steps < 0) throw ConfigError("steps must be >= 0");
    if (cfg.start_state < 0 || cfg.start_state >= mdp.n_states())
        throw ConfigError("start state out of range");
    if (!std::isfinite(cfg.q_init)) throw ConfigError("initial Q must be finite");
    if (cfg.snapshot_every < 0) throw ConfigError("snapshot interval must be >= 0");
}

// ---------------------------------------------------------------------------
// VisitCounts

VisitCounts::VisitCounts(const Mdp& mdp) {
    ids_.resize(mdp.n_states());
    counts_.resize(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (const auto& act : mdp.actions(s)) ids_[s].push_back(act.id);
        counts_[s].assign(ids_[s].size(), 0);
    }
}

long VisitCounts::operator()(int s, int a) const {
    const auto& ids = ids_.at(s);
    const auto it = std::find(ids.begin(), ids.end(), a);
    if (it == ids.end()) throw DomainError("visit count at inadmissible pair");
    return counts_[s][it - ids.begin()];
}

long VisitCounts::increment(int s, int a) {
    const auto& ids = ids_.at(s);
    const auto it = std::find(ids.begin(), ids.end(), a);
    if (it == ids.end()) throw DomainError("visit count at inadmissible pair");
    return ++counts_[s][it - ids.begin()];
}

long VisitCounts::total() const noexcept {
    long n = 0;
    for (const auto& row : counts_)
        for (long c : row) n += c;
    return n;
}

// ---------------------------------------------------------------------------
// Policy and updates

std::vector<double> softmax_probabilities(std::span<const double> q_row, double beta) {
    std::vector<double> p(q_row.size());
    if (q_row.empty()) return p;
    const double top = *std::max_element(q_row.begin(), q_row.end());
    double total = 0.0;
    for (std::size_t i = 0; i < q_row.size(); ++i) {
        p[i] = std::exp(beta * (q_row[i] - top));
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

int softmax_action(const QTable& q, int s, double beta, Rng& rng) {
    const auto probs = softmax_probabilities(q.row(s), beta);
    return q.action_ids(s)[rng.categorical(probs)];
}

double td_error(const QTable& q, const Transition& t, double gamma) {
    return t.reward + gamma * q.max(t.next_state) - q(t.state, t.action);
}

namespace {

StepResult apply_update(QTable& q, const Transition& t, double td, double update) {
    double& entry = q.at(t.state, t.action);
    const double next = entry + update;
    if (!std::isfinite(next))
        throw NumericError("non-finite Q update at step " + std::to_string(t.t));
    entry = next;
    return {td, update};
}

} // namespace

StepResult rsql_step(QTable& q, const Transition& t, double gamma, const UtilityFunction& u,
                     double x0, double alpha) {
    const double td = td_error(q, t, gamma);
    if (!std::isfinite(td)) throw NumericError("non-finite TD error at step " + std::to_string(t.t));
    return apply_update(q, t, td, alpha * (u(td) - x0));
}

StepResult eu_step(QTable& q, const Transition& t, double gamma, const UtilityFunction& u,
                   double x0, double alpha) {
    const double td = td_error(q, t, gamma);
    const double target = u(t.reward) - x0 + gamma * q.max(t.next_state) - q(t.state, t.action);
    return apply_update(q, t, td, alpha * target);
}

StepResult standard_q_step(QTable& q, const Transition& t, double gamma, double alpha) {
    const double td = td_error(q, t, gamma);
    return apply_update(q, t, td, alpha * td);
}

// ---------------------------------------------------------------------------
// Run loop

RunResult run(const Mdp& mdp, const LearnerConfig& cfg) {
    require_valid(mdp);
    validate_config(cfg, mdp);

    const double x0 = cfg.shortfall.acceptance_level();
    UtilityFunction u = cfg.shortfall.utility();
    double clamp_lo = -std::numeric_limits<double>::infinity();
    double clamp_hi = std::numeric_limits<double>::infinity();

    if (cfg.algorithm == Algorithm::RSQLTruncated) {
        const double r_bar = cfg.truncation.reward_bound.value_or(reward_bound(mdp));
        u = truncate(u, x0, r_bar, cfg.gamma, cfg.truncation.slope);
        if (cfg.truncation.clamp_q) {
            const double y0 = cfg.shortfall.reference_root();
            clamp_lo = (-r_bar - y0) / (1.0 - cfg.gamma);
            clamp_hi = (r_bar - y0) / (1.0 - cfg.gamma);
        }
    }

    RunResult out{QTable(mdp, cfg.q_init), VisitCounts(mdp), {}};
    if (cfg.record_trace) out.trace.steps.reserve(static_cast<std::size_t>(cfg.steps));

    Rng rng(cfg.seed);
    int s = cfg.start_state;
    for (long step = 0; step < cfg.steps; ++step) {
        const int a = softmax_action(out.q, s, cfg.beta, rng);
        const Transition tr = sample_transition(mdp, s, a, rng, step);
        const double alpha = cfg.schedule.rate(out.counts.increment(s, a));

        StepResult res{};
        switch (cfg.algorithm) {
        case Algorithm::RSQL:
        case Algorithm::RSQLTruncated: res = rsql_step(out.q, tr, cfg.gamma, u, x0, alpha); break;
        case Algorithm::EU: res = eu_step(out.q, tr, cfg.gamma, u, x0, alpha); break;
        case Algorithm::StandardQ: res = standard_q_step(out.q, tr, cfg.gamma, alpha); break;
        }
        if (cfg.truncation.clamp_q && cfg.algorithm == Algorithm::RSQLTruncated) {
            double& entry = out.q.at(s, a);
            entry = std::clamp(entry, clamp_lo, clamp_hi);
        }

        if (cfg.record_trace) out.trace.steps.push_back({tr, res.td, res.update});
        if (cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0)
            out.trace.snapshots.emplace_back(step + 1, out.q);
        s = tr.next_state;
    }
    return out;
}

ExplorationReport exploration_report(const VisitCounts& counts) {
    ExplorationReport report;
    report.min_count = std::numeric_limits<long>::max();
    for (int s = 0; s < counts.n_states(); ++s) {
        const auto& ids = counts.action_ids(s);
        const auto row = counts.row(s);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            ExplorationReport::Entry e{s, ids[i], row[i]};
            report.entries.push_back(e);
            report.min_count = std::min(report.min_count, e.count);
            if (e.count == 0) report.starved.push_back(e);
        }
    }
    if (report.entries.empty()) report.min_count = 0;
    return report;
}

} // namespace rsrl
