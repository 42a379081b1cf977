#pragma once

#include <vector>

#include "rsrl/mdp.hpp"
#include "rsrl/qtable.hpp"
#include "rsrl/valuation.hpp"

namespace rsrl {

using ValueFunction = std::vector<double>;

// Model-based risk-sensitive dynamic programming. All operations need
// finite-support rewards (see discretize_rewards) and throw
// UnsupportedError otherwise.

/// Q(s, a) = shortfall of r(s, a, e) + gamma V(s') under P(s'|s,a) P_r(e|s,a).
QTable q_backup(const Mdp& mdp, const ValueFunction& v, const Shortfall& s,
                double tol = kDefaultShortfallTol);

/// (T V)(s) = max_a q_backup(V)(s, a).
ValueFunction bellman_backup(const Mdp& mdp, const ValueFunction& v, const Shortfall& s,
                             double tol = kDefaultShortfallTol);

struct ValueIterationResult {
    ValueFunction values;
    QTable q;
    int iterations;
    /// Sup-norm of the last step.
    double residual;
};

/// Iterates T from V = 0 until the last step is <= tol (1 - gamma) / gamma,
/// so that ||V - V*|| <= tol. Throws NumericError after max_iter sweeps.
ValueIterationResult value_iteration(const Mdp& mdp, const Shortfall& s, double tol = 1e-8,
                                     int max_iter = 100000);

struct QBounds {
    double lower;
    double upper;
    double reward_bound;
    /// Set for Gaussian mixtures, whose bound is max |mean| + 6 std.
    bool approximate;
};

/// Largest |r| over all admissible pairs.
double reward_bound(const Mdp& mdp, bool* approximate = nullptr);

/// [(-R - y0) / (1 - gamma), (R - y0) / (1 - gamma)]
QBounds q_bounds(const Mdp& mdp, const Shortfall& s);

/// Per-state argmax, lowest action id on ties.
std::vector<int> greedy_policy(const QTable& q);

/// Stage values V_0..V_T of the T-horizon problem; V_T = T(0).
std::vector<ValueFunction> finite_horizon_values(const Mdp& mdp, const Shortfall& s, int horizon,
                                                 double tol = kDefaultShortfallTol);

} // namespace rsrl
