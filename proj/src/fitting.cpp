#include "rsrl/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "rsrl/learner.hpp"
#include "rsrl/qtable.hpp"

namespace rsrl {

std::string_view to_string(ModelKind m) noexcept {
    switch (m) {
    case ModelKind::RSQL: return "rsql";
    case ModelKind::EU: return "eu";
    case ModelKind::StandardQ: return "standard_q";
    }
    return "unknown";
}

ModelKind parse_model(std::string_view name) {
    for (auto m : {ModelKind::RSQL, ModelKind::EU, ModelKind::StandardQ})
        if (to_string(m) == name) return m;
    throw ConfigError("unknown model '" + std::string(name) + "'");
}

int n_params(ModelKind m) noexcept {
    switch (m) {
    case ModelKind::RSQL: return 6;
    case ModelKind::EU: return 7;
    case ModelKind::StandardQ: return 3;
    }
    return 0;
}

void check_params(ModelKind m, const ModelParams& p) {
    if (!(p.beta >= 0.0) || !std::isfinite(p.beta)) throw DomainError("beta must be >= 0");
    if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw DomainError("gamma must lie in [0, 1)");
    if (m != ModelKind::StandardQ) {
        for (double v : {p.k_plus, p.l_plus, p.k_minus, p.l_minus})
            if (!(v > 0.0) || !std::isfinite(v))
                throw DomainError("utility coefficients and exponents must be > 0");
    }
    if (m != ModelKind::RSQL && !(p.alpha > 0.0 && p.alpha <= 1.0))
        throw DomainError("alpha must lie in (0, 1]");
}

UtilityFunction fitting_utility(const ModelParams& p) {
    return linearize_near_zero(
        UtilityFunction::polynomial_mixed(p.k_plus, p.l_plus, p.k_minus, p.l_minus), kFittingPhi,
        LinearizationScheme::Linear);
}

namespace {

struct Agent {
    ModelKind model;
    ModelParams params;
    std::optional<UtilityFunction> u;

    Agent(ModelKind m, const ModelParams& p) : model(m), params(p) {
        check_params(m, p);
        if (m != ModelKind::StandardQ) u = fitting_utility(p);
    }

    void update(QTable& q, const Transition& t) const {
        switch (model) {
        case ModelKind::RSQL: rsql_step(q, t, params.gamma, *u, 0.0, 1.0); break;
        case ModelKind::EU: eu_step(q, t, params.gamma, *u, 0.0, params.alpha); break;
        case ModelKind::StandardQ: standard_q_step(q, t, params.gamma, params.alpha); break;
        }
    }
};

double log_softmax(std::span<const double> row, std::size_t i, double beta) {
    const double top = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(beta * (v - top));
    return beta * (row[i] - top) - std::log(total);
}

// --- parameter transforms -------------------------------------------------

enum class Scale { Log, Linear, Log1p };

struct Coordinate {
    double ModelParams::*field;
    Scale scale;
    double lo;
    double hi;
};

std::vector<Coordinate> coordinates(ModelKind m, const ParamBounds& b) {
    const Coordinate alpha{&ModelParams::alpha, Scale::Log, b.alpha_min, b.alpha_max};
    const Coordinate beta{&ModelParams::beta, Scale::Log1p, 0.0, b.beta_max};
    const Coordinate gamma{&ModelParams::gamma, Scale::Linear, 0.0, b.gamma_max};
    const Coordinate kp{&ModelParams::k_plus, Scale::Log, b.k_min, b.k_max};
    const Coordinate lp{&ModelParams::l_plus, Scale::Log, b.l_min, b.l_max};
    const Coordinate km{&ModelParams::k_minus, Scale::Log, b.k_min, b.k_max};
    const Coordinate lm{&ModelParams::l_minus, Scale::Log, b.l_min, b.l_max};
    switch (m) {
    case ModelKind::RSQL: return {beta, gamma, kp, lp, km, lm};
    case ModelKind::EU: return {alpha, beta, gamma, kp, lp, km, lm};
    case ModelKind::StandardQ: return {alpha, beta, gamma};
    }
    return {};
}

double forward(Scale s, double v) {
    switch (s) {
    case Scale::Log: return std::log(v);
    case Scale::Linear: return v;
    case Scale::Log1p: return std::log1p(v);
    }
    return v;
}

double backward(Scale s, double v) {
    switch (s) {
    case Scale::Log: return std::exp(v);
    case Scale::Linear: return v;
    case Scale::Log1p: return std::expm1(v);
    }
    return v;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double t) { return std::log(t / (1.0 - t)); }

ModelParams decode(const std::vector<Coordinate>& cs, const std::vector<double>& z) {
    ModelParams p;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto& c = cs[i];
        const double a = forward(c.scale, c.lo), b = forward(c.scale, c.hi);
        p.*c.field = std::clamp(backward(c.scale, a + (b - a) * sigmoid(z[i])), c.lo, c.hi);
    }
    // The upper gamma bound is below 1, so decoded points always satisfy check_params.
    return p;
}

std::vector<double> encode(const std::vector<Coordinate>& cs, const ModelParams& p) {
    std::vector<double> z(cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto& c = cs[i];
        const double a = forward(c.scale, c.lo), b = forward(c.scale, c.hi);
        const double t = (forward(c.scale, std::clamp(p.*c.field, c.lo, c.hi)) - a) / (b - a);
        z[i] = logit(std::clamp(t, 1e-9, 1.0 - 1e-9));
    }
    return z;
}

double negative_ll(const SubjectData& data, const Mdp& mdp, ModelKind m, const ModelParams& p) {
    try {
        return -replay_log_likelihood(data, mdp, m, p);
    } catch (const NumericError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
        return std::numeric_limits<double>::infinity();
    }
}

} // namespace

ReplayResult replay(const SubjectData& data, const Mdp& mdp, ModelKind m, const ModelParams& p) {
    const Agent agent(m, p);
    QTable q(mdp);
    ReplayResult out{0.0, {}};
    out.action_probabilities.reserve(data.transitions.size());
    for (std::size_t i = 0; i < data.transitions.size(); ++i) {
        const Transition& t = data.transitions[i];
        const int idx = q.index_of(t.state, t.action);
        if (idx < 0)
            throw DomainError("subject '" + data.id + "' trial " + std::to_string(i) +
                              ": inadmissible pair");
        const double lp = log_softmax(q.row(t.state), static_cast<std::size_t>(idx), p.beta);
        if (!std::isfinite(lp))
            throw NumericError("subject '" + data.id + "' trial " + std::to_string(i) +
                               ": non-finite log-likelihood");
        out.log_likelihood += lp;
        out.action_probabilities.push_back(std::exp(lp));
        try {
            agent.update(q, t);
        } catch (const NumericError& e) {
            throw NumericError("subject '" + data.id + "' trial " + std::to_string(i) + ": " +
                               e.what());
        }
    }
    return out;
}

double replay_log_likelihood(const SubjectData& data, const Mdp& mdp, ModelKind m,
                             const ModelParams& p) {
    return replay(data, mdp, m, p).log_likelihood;
}

SubjectData simulate_subject(const Mdp& mdp, ModelKind m, const ModelParams& p, long n_trials,
                             std::uint64_t seed, std::string id, int start) {
    require_valid(mdp);
    const Agent agent(m, p);
    QTable q(mdp);
    Rng rng(seed);
    SubjectData out{std::move(id), {}};
    out.transitions.reserve(static_cast<std::size_t>(std::max(0L, n_trials)));
    int s = start;
    for (long t = 0; t < n_trials; ++t) {
        const int a = softmax_action(q, s, p.beta, rng);
        const Transition tr = sample_transition(mdp, s, a, rng, t);
        agent.update(q, tr);
        out.transitions.push_back(tr);
        s = tr.next_state;
    }
    return out;
}

double bic(double log_likelihood, int k, std::size_t n) {
    if (n < 1) throw DomainError("bic needs n >= 1");
    return -2.0 * log_likelihood + k * std::log(static_cast<double>(n));
}

ModelParams nested_params(ModelKind m, const ModelParams& q) {
    ModelParams p = q;
    switch (m) {
    case ModelKind::RSQL:
        p.k_plus = p.k_minus = q.alpha;
        p.l_plus = p.l_minus = 1.0;
        break;
    case ModelKind::EU:
        p.k_plus = p.k_minus = 1.0;
        p.l_plus = p.l_minus = 1.0;
        break;
    case ModelKind::StandardQ: break;
    }
    return p;
}

FitResult fit(const SubjectData& data, const Mdp& mdp, ModelKind m, const FitOptions& opt,
              const std::optional<ModelParams>& nested) {
    if (data.transitions.empty())
        throw DomainError("subject '" + data.id + "' has no trials");
    if (opt.n_starts < 0) throw ConfigError("n_starts must be >= 0");
    require_valid(mdp);

    const auto cs = coordinates(m, opt.bounds);
    const int dim = static_cast<int>(cs.size());

    std::vector<std::vector<double>> starts;
    for (int i = 1; i <= opt.n_starts; ++i) {
        auto t = halton_point(i, dim);
        std::vector<double> z(dim);
        for (int d = 0; d < dim; ++d) z[d] = logit(t[d]);
        starts.push_back(std::move(z));
    }
    if (nested) starts.push_back(encode(cs, *nested));
    if (starts.empty()) starts.push_back(std::vector<double>(dim, 0.0));

    auto objective = [&](const std::vector<double>& z) {
        return negative_ll(data, mdp, m, decode(cs, z));
    };

    std::vector<NelderMeadResult> results(starts.size());
    const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(starts.size())));
    auto work = [&](int w) {
        for (std::size_t i = w; i < starts.size(); i += jobs)
            results[i] = nelder_mead(objective, starts[i], opt.optimizer);
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::future<void>> fs;
        for (int w = 0; w < jobs; ++w) fs.push_back(std::async(std::launch::async, work, w));
        for (auto& f : fs) f.get();
    }

    FitDiagnostics diag;
    diag.starts = static_cast<int>(starts.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        diag.iterations += results[i].iterations;
        diag.evaluations += results[i].evaluations;
        if (!std::isfinite(results[i].value)) ++diag.failed_starts;
        if (results[i].value < results[best].value) best = i;
    }
    if (!std::isfinite(results[best].value))
        throw NumericError("fit of '" + data.id + "' failed: all " + std::to_string(diag.starts) +
                           " starts gave non-finite likelihoods");

    ModelParams theta = decode(cs, results[best].x);
    double value = results[best].value;
    diag.converged = results[best].converged;
    if (nested) {
        const double v = negative_ll(data, mdp, m, *nested);
        ++diag.evaluations;
        if (v < value) {
            theta = *nested;
            value = v;
            diag.nested_start_best = true;
        }
    }

    auto rep = replay(data, mdp, m, theta);
    const std::size_t n = data.transitions.size();
    return FitResult{m,
                     theta,
                     rep.log_likelihood,
                     bic(rep.log_likelihood, n_params(m), n),
                     std::numeric_limits<double>::quiet_NaN(),
                     n,
                     std::move(rep.action_probabilities),
                     diag};
}

std::vector<FitResult> compare_models(const SubjectData& data, const Mdp& mdp,
                                      std::span<const ModelKind> models, const FitOptions& opt) {
    std::vector<FitResult> out;
    out.push_back(fit(data, mdp, ModelKind::StandardQ, opt));
    const FitResult& base = out.front();
    out.front().delta_bic = 0.0;
    const ModelParams q_hat = base.params;
    const double b_q = base.bic;
    for (ModelKind m : models) {
        if (m == ModelKind::StandardQ) continue;
        out.push_back(fit(data, mdp, m, opt, nested_params(m, q_hat)));
        out.back().delta_bic = out.back().bic - b_q;
    }
    return out;
}

double empirical_subjective_mean(std::span<const double> rewards, const UtilityFunction& u) {
    if (rewards.empty()) throw DomainError("subjective mean needs at least one reward");
    std::vector<Outcome> outcomes;
    outcomes.reserve(rewards.size());
    const double w = 1.0 / static_cast<double>(rewards.size());
    for (double r : rewards) outcomes.push_back({r, w});
    return shortfall_value(outcomes, Shortfall(u, 0.0), 0.0);
}

double normalized_subjective_probability(std::span<const double> rewards,
                                         const UtilityFunction& u) {
    if (rewards.empty()) throw DomainError("subjective probability needs rewards");
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    if (!(*hi > *lo))
        throw DomainError("normalized subjective probability is undefined when all rewards are equal");
    const double m_emp =
        std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    return (empirical_subjective_mean(rewards, u) - m_emp) / (*hi - *lo);
}

} // namespace rsrl
