#include "rsrl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rsrl {

namespace {

void require_finite_rewards(const Mdp& mdp) {
    for (int s = 0; s < mdp.n_states(); ++s)
        for (const auto& act : mdp.actions(s))
            if (!has_finite_support(act.reward))
                throw UnsupportedError("oracle requires finite-support rewards; (s=" +
                                       std::to_string(s) + ", a=" + std::to_string(act.id) +
                                       ") is sampler-backed");
}

double sup_norm_diff(const ValueFunction& a, const ValueFunction& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

ValueFunction row_max(const QTable& q) {
    ValueFunction v(q.n_states());
    for (int s = 0; s < q.n_states(); ++s) v[s] = q.max(s);
    return v;
}

} // namespace

QTable q_backup(const Mdp& mdp, const ValueFunction& v, const Shortfall& s, double tol) {
    require_finite_rewards(mdp);
    if (static_cast<int>(v.size()) != mdp.n_states())
        throw DomainError("value function size does not match the mdp");

    const double gamma = mdp.discount();
    QTable q(mdp);
    std::vector<Outcome> outcomes;
    for (int st = 0; st < mdp.n_states(); ++st) {
        const auto& acts = mdp.actions(st);
        auto row = q.row(st);
        for (std::size_t i = 0; i < acts.size(); ++i) {
            const auto& rewards = std::get<FiniteDistribution>(acts[i].reward).outcomes();
            outcomes.clear();
            for (const auto& nx : acts[i].transitions) {
                if (nx.probability <= 0.0) continue;
                for (const auto& r : rewards) {
                    if (r.probability <= 0.0) continue;
                    outcomes.push_back({r.value + gamma * v[nx.state], nx.probability * r.probability});
                }
            }
            row[i] = shortfall_value(outcomes, s, tol);
        }
    }
    return q;
}

ValueFunction bellman_backup(const Mdp& mdp, const ValueFunction& v, const Shortfall& s,
                             double tol) {
    return row_max(q_backup(mdp, v, s, tol));
}

ValueIterationResult value_iteration(const Mdp& mdp, const Shortfall& s, double tol,
                                     int max_iter) {
    if (!(tol > 0.0)) throw DomainError("value iteration tolerance must be > 0");
    require_valid(mdp);
    require_finite_rewards(mdp);

    const double gamma = mdp.discount();
    const double stop = gamma > 0.0 ? tol * (1.0 - gamma) / gamma : 0.0;
    // Backup errors add e / (1 - gamma) to the bound; keep that a small fraction of tol.
    const double inner_tol = 0.01 * tol * (1.0 - gamma);

    ValueFunction v(mdp.n_states(), 0.0);
    double residual = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        ValueFunction next = bellman_backup(mdp, v, s, inner_tol);
        residual = sup_norm_diff(next, v);
        v = std::move(next);
        if (residual <= stop) {
            QTable q = q_backup(mdp, v, s, inner_tol);
            return ValueIterationResult{row_max(q), std::move(q), it, residual};
        }
    }
    std::ostringstream os;
    os << "value iteration did not converge in " << max_iter << " sweeps (last residual "
       << residual << ")";
    throw NumericError(os.str());
}

double reward_bound(const Mdp& mdp, bool* approximate) {
    double bound = 0.0;
    bool approx = false;
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (const auto& act : mdp.actions(s)) {
            if (const auto* dist = std::get_if<FiniteDistribution>(&act.reward)) {
                bound = std::max({bound, std::abs(dist->min()), std::abs(dist->max())});
            } else {
                approx = true;
                for (const auto& c : std::get<GaussianMixtureReward>(act.reward).components)
                    bound = std::max(bound, std::abs(c.mean) + 6.0 * c.stddev);
            }
        }
    }
    if (approximate != nullptr) *approximate = approx;
    return bound;
}

QBounds q_bounds(const Mdp& mdp, const Shortfall& s) {
    const double gamma = mdp.discount();
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("discount must lie in [0, 1)");
    bool approx = false;
    const double r = reward_bound(mdp, &approx);
    const double y0 = s.reference_root();
    return QBounds{(-r - y0) / (1.0 - gamma), (r - y0) / (1.0 - gamma), r, approx};
}

std::vector<int> greedy_policy(const QTable& q) {
    std::vector<int> policy(q.n_states());
    for (int s = 0; s < q.n_states(); ++s) policy[s] = q.argmax(s);
    return policy;
}

std::vector<ValueFunction> finite_horizon_values(const Mdp& mdp, const Shortfall& s, int horizon,
                                                 double tol) {
    if (horizon < 0) throw DomainError("horizon must be >= 0");
    std::vector<ValueFunction> stages(horizon + 1);
    stages[horizon] = bellman_backup(mdp, ValueFunction(mdp.n_states(), 0.0), s, tol);
    for (int t = horizon - 1; t >= 0; --t) stages[t] = bellman_backup(mdp, stages[t + 1], s, tol);
    return stages;
}

} // namespace rsrl
