#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsrl/mdp.hpp"
#include "rsrl/optimize.hpp"
#include "rsrl/valuation.hpp"

namespace rsrl {

struct SubjectData {
    std::string id;
    std::vector<Transition> transitions;

    std::size_t n_trials() const noexcept { return transitions.size(); }
};

enum class ModelKind { RSQL, EU, StandardQ };

std::string_view to_string(ModelKind m) noexcept;
ModelKind parse_model(std::string_view name);

/// Free parameters: RSQL (beta, gamma, k+, l+, k-, l-), EU adds alpha,
/// StandardQ (alpha, beta, gamma). Unused fields are ignored.
struct ModelParams {
    double beta = 1.0;
    double gamma = 0.9;
    double k_plus = 1.0;
    double l_plus = 1.0;
    double k_minus = 1.0;
    double l_minus = 1.0;
    double alpha = 0.1;
};

int n_params(ModelKind m) noexcept;

/// Throws DomainError if a parameter used by the model violates its domain.
void check_params(ModelKind m, const ModelParams& p);

/// LinearizedNearZero(PolynomialMixed(k+, l+, k-, l-), 1e-4).
UtilityFunction fitting_utility(const ModelParams& p);

constexpr double kFittingPhi = 1e-4;

struct ReplayResult {
    double log_likelihood;
    /// Probability of each recorded action before that trial's update.
    std::vector<double> action_probabilities;
};

/// Replays the recorded transitions through the model's update rule.
/// Throws NumericError naming the trial on a non-finite likelihood or Q value.
ReplayResult replay(const SubjectData& data, const Mdp& mdp, ModelKind m, const ModelParams& p);

double replay_log_likelihood(const SubjectData& data, const Mdp& mdp, ModelKind m,
                             const ModelParams& p);

/// Synthetic subject: a model agent choosing by softmax over its own Q.
SubjectData simulate_subject(const Mdp& mdp, ModelKind m, const ModelParams& p, long n_trials,
                             std::uint64_t seed, std::string id = "synthetic", int start = 0);

struct ParamBounds {
    double beta_max = 50.0;
    double gamma_max = 0.99;
    double k_min = 1e-3, k_max = 10.0;
    double l_min = 0.05, l_max = 5.0;
    double alpha_min = 1e-3, alpha_max = 1.0;
};

struct FitOptions {
    int n_starts = 16;
    int jobs = 1;
    ParamBounds bounds;
    NelderMeadOptions optimizer{.max_evaluations = 3000,
                                .f_tolerance = 1e-7,
                                .x_tolerance = 1e-5,
                                .initial_step = 0.7,
                                .restarts = 1};
};

struct FitDiagnostics {
    int starts = 0;
    int failed_starts = 0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    /// Set when the nested start (from a StandardQ fit) was the best candidate.
    bool nested_start_best = false;
};

struct FitResult {
    ModelKind model;
    ModelParams params;
    double log_likelihood;
    double bic;
    /// bic - bic of the StandardQ baseline; NaN until compared.
    double delta_bic;
    std::size_t n_trials;
    std::vector<double> trial_probabilities;
    FitDiagnostics diagnostics;
};

double bic(double log_likelihood, int k, std::size_t n);

/// Multi-start bounded maximum likelihood. `nested` is a StandardQ estimate
/// mapped into the model as an extra start (l = 1, k = alpha for RSQL).
/// Throws NumericError if every start fails.
FitResult fit(const SubjectData& data, const Mdp& mdp, ModelKind m, const FitOptions& opt = {},
              const std::optional<ModelParams>& nested = std::nullopt);

/// Parameters of `m` that reproduce StandardQ(alpha, beta, gamma) exactly.
ModelParams nested_params(ModelKind m, const ModelParams& standard_q);

/// Fits StandardQ first and then the other requested models, each with the
/// nested start; delta_bic is relative to the StandardQ fit. The returned
/// list always starts with StandardQ.
std::vector<FitResult> compare_models(const SubjectData& data, const Mdp& mdp,
                                      std::span<const ModelKind> models,
                                      const FitOptions& opt = {});

/// Root of mean u(r_i - m) = 0.
double empirical_subjective_mean(std::span<const double> rewards, const UtilityFunction& u);

/// (m_sub - m_emp) / (max r - min r). Throws DomainError if all rewards are equal.
double normalized_subjective_probability(std::span<const double> rewards,
                                         const UtilityFunction& u);

} // namespace rsrl
