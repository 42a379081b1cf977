// rsrl: solve, learn, simulate, fit and curves subcommands.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsrl/errors.hpp"
#include "rsrl/fitting.hpp"
#include "rsrl/io.hpp"
#include "rsrl/learner.hpp"
#include "rsrl/mdp.hpp"
#include "rsrl/solver.hpp"
#include "rsrl/valuation.hpp"

namespace fs = std::filesystem;
using namespace rsrl;
using io::CsvWriter;
using io::Json;
using io::ObjectReader;

namespace {

struct Globals {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

struct Loaded {
    Json json;
    fs::path base;
};

Loaded load_config(const Globals& g, bool required) {
    if (g.config.empty()) {
        if (required) throw ConfigError("--config is required for this command");
        return {Json::object(), fs::current_path()};
    }
    const fs::path p(g.config);
    return {io::load_json(p), p.parent_path()};
}

fs::path out_dir(const Globals& g) {
    fs::path d(g.out);
    fs::create_directories(d);
    return d;
}

std::uint64_t resolve_seed(const Globals& g, ObjectReader& r) {
    const auto from_file = r.get_or<std::uint64_t>("seed", 0);
    return g.seed.value_or(from_file);
}

Shortfall shortfall_or_default(ObjectReader& r) {
    if (r.has("shortfall")) return io::parse_shortfall(r.object("shortfall"));
    return Shortfall(UtilityFunction::linear(), 0.0);
}

void write_q(const fs::path& path, const QTable& q) {
    CsvWriter w(path, {"state", "action", "q"});
    for (int s = 0; s < q.n_states(); ++s) {
        const auto& ids = q.action_ids(s);
        const auto row = q.row(s);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            w.cell(s).cell(ids[i]).cell(row[i]);
            w.end_row();
        }
    }
}

// ---------------------------------------------------------------------------

int cmd_solve(const Globals& g) {
    auto cfg = load_config(g, true);
    ObjectReader r(cfg.json, "config");
    const Mdp mdp = io::parse_mdp(r.raw("mdp"), cfg.base);
    const Shortfall sf = shortfall_or_default(r);
    const double tol = r.get_or("tol", 1e-8);
    const int max_iter = r.get_or("max_iter", 100000);
    r.finish();

    const auto res = value_iteration(mdp, sf, tol, max_iter);
    const auto dir = out_dir(g);
    {
        CsvWriter w(dir / "v.csv", {"state", "v"});
        for (int s = 0; s < mdp.n_states(); ++s) {
            w.cell(s).cell(res.values[s]);
            w.end_row();
        }
    }
    write_q(dir / "q.csv", res.q);
    {
        CsvWriter w(dir / "policy.csv", {"state", "action"});
        const auto pol = greedy_policy(res.q);
        for (int s = 0; s < mdp.n_states(); ++s) {
            w.cell(s).cell(pol[s]);
            w.end_row();
        }
    }
    std::cout << "value iteration converged in " << res.iterations << " sweeps (residual "
              << res.residual << ")\n";
    return 0;
}

// Q* of the learner's own fixed-point equation.
QTable learner_oracle(const Mdp& mdp, const LearnerConfig& lc, double tol) {
    const Mdp m = mdp.with_discount(lc.gamma);
    switch (lc.algorithm) {
    case Algorithm::RSQL:
    case Algorithm::RSQLTruncated: return value_iteration(m, lc.shortfall, tol).q;
    case Algorithm::StandardQ:
        return value_iteration(m, Shortfall(UtilityFunction::linear(), 0.0), tol).q;
    case Algorithm::EU: {
        // EU is standard Q-learning on the rewards u(r) - x0.
        std::vector<StateModel> states = m.states();
        const auto& u = lc.shortfall.utility();
        const double x0 = lc.shortfall.acceptance_level();
        for (auto& st : states) {
            for (auto& act : st.actions) {
                const auto* d = std::get_if<FiniteDistribution>(&act.reward);
                if (d == nullptr)
                    throw UnsupportedError("oracle requires finite-support rewards");
                std::vector<Outcome> os;
                for (const auto& o : d->outcomes()) os.push_back({u(o.value) - x0, o.probability});
                act.reward = FiniteDistribution(std::move(os));
            }
        }
        return value_iteration(Mdp(std::move(states), lc.gamma),
                               Shortfall(UtilityFunction::linear(), 0.0), tol)
            .q;
    }
    }
    throw UnsupportedError("no oracle for this algorithm");
}

int cmd_learn(const Globals& g) {
    auto cfg = load_config(g, true);
    ObjectReader r(cfg.json, "config");
    const Mdp mdp = io::parse_mdp(r.raw("mdp"), cfg.base);
    LearnerConfig lc = io::parse_learner(r.object("learner"), mdp);
    // --seed beats a top-level "seed", which beats learner.seed.
    if (r.has("seed")) lc.seed = r.get<std::uint64_t>("seed");
    if (g.seed) lc.seed = *g.seed;
    std::optional<double> oracle_tol;
    if (r.has("oracle")) {
        auto o = r.object("oracle");
        oracle_tol = o.get_or("tol", 1e-8);
        o.finish();
    }
    r.finish();

    const auto res = run(mdp, lc);
    const auto dir = out_dir(g);
    write_q(dir / "q.csv", res.q);
    {
        CsvWriter w(dir / "counts.csv", {"state", "action", "count"});
        for (const auto& e : exploration_report(res.counts).entries) {
            w.cell(e.state).cell(e.action).cell(e.count);
            w.end_row();
        }
    }
    if (lc.record_trace) {
        CsvWriter w(dir / "trace.csv",
                    {"round", "t", "state", "action", "reward", "next_state", "td", "update"});
        for (const auto& st : res.trace.steps) {
            const auto& t = st.transition;
            w.cell(t.t / kGameDecisionsPerRound).cell(t.t).cell(t.state).cell(t.action)
                .cell(t.reward).cell(t.next_state).cell(st.td).cell(st.update);
            w.end_row();
        }
    }
    const auto report = exploration_report(res.counts);
    if (oracle_tol) {
        const QTable star = learner_oracle(mdp, lc, *oracle_tol);
        CsvWriter w(dir / "summary.csv", {"algorithm", "seed", "steps", "min_count", "gap"});
        w.cell(to_string(lc.algorithm)).cell(static_cast<long long>(lc.seed)).cell(lc.steps)
            .cell(report.min_count).cell(res.q.sup_distance(star));
        w.end_row();
    }
    std::cout << "learned " << lc.steps << " steps; min visit count " << report.min_count;
    if (!report.starved.empty()) std::cout << "; " << report.starved.size() << " pairs never visited";
    std::cout << "\n";
    return 0;
}

int cmd_simulate(const Globals& g) {
    auto cfg = load_config(g, true);
    ObjectReader r(cfg.json, "config");
    const Mdp mdp = io::parse_mdp(r.raw("mdp"), cfg.base);
    const std::uint64_t seed = resolve_seed(g, r);
    const long steps = r.get_or("steps", 0L);
    const int start = r.get_or("start_state", 0);
    const auto path_rounds = r.optional<long>("path_rounds");

    std::vector<Transition> traj;
    if (steps > 0 || r.has("policy")) {
        auto pol = r.has("policy") ? std::optional(r.object("policy")) : std::nullopt;
        const auto type = pol ? pol->get_or<std::string>("type", "uniform") : "uniform";
        Rng rng(derive_seed(seed, 1));
        if (type == "uniform") {
            traj = simulate(mdp, uniform_policy(mdp), steps, rng, start);
        } else if (type == "fixed") {
            const auto actions = pol->get<std::vector<int>>("actions");
            if (static_cast<int>(actions.size()) != mdp.n_states())
                throw ConfigError(pol->path() + ".actions: need one action per state");
            for (int s = 0; s < mdp.n_states(); ++s)
                if (!mdp.admissible(s, actions[s]))
                    throw ConfigError(pol->path() + ".actions: action " +
                                      std::to_string(actions[s]) + " inadmissible in state " +
                                      std::to_string(s));
            traj = simulate(mdp, [&](int s, Rng&) { return actions[s]; }, steps, rng, start);
        } else if (type == "agent") {
            const auto model = parse_model(pol->get<std::string>("model"));
            const auto params = io::parse_params(pol->object("params"));
            try {
                check_params(model, params);
            } catch (const DomainError& e) {
                throw ConfigError(pol->path() + ".params: " + e.what());
            }
            traj = simulate_subject(mdp, model, params, steps, derive_seed(seed, 1), "agent", start)
                       .transitions;
        } else {
            throw ConfigError(pol->path() + ".type: unknown policy '" + type + "'");
        }
        if (pol) pol->finish();
    }
    r.finish();

    const auto dir = out_dir(g);
    io::write_trajectory_csv(dir / "trajectory.csv", traj);
    if (path_rounds) {
        if (*path_rounds < 1) throw ConfigError("config.path_rounds: must be >= 1");
        const auto stats = path_statistics(mdp, *path_rounds, derive_seed(seed, 2), g.jobs);
        CsvWriter w(dir / "paths.csv", {"path", "states", "ev_mc", "ev_stderr", "std_mc",
                                        "ev_exact", "std_exact", "visit_frequency"});
        for (std::size_t i = 0; i < stats.size(); ++i) {
            const auto& st = stats[i];
            std::string states;
            for (int s : st.path.states) states += (states.empty() ? "" : "-") + std::to_string(s);
            w.cell(static_cast<long long>(i + 1)).cell(states).cell(st.ev_mc).cell(st.ev_stderr)
                .cell(st.std_mc).cell(st.ev_exact).cell(st.std_exact).cell(st.visit_frequency);
            w.end_row();
        }
    }
    std::cout << "simulated " << traj.size() << " transitions\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct SubjectSource {
    std::string id;
    std::optional<fs::path> file;
    std::optional<SubjectData> data;
};

int cmd_fit(const Globals& g) {
    auto cfg = load_config(g, true);
    ObjectReader r(cfg.json, "config");
    const Mdp mdp = r.has("mdp") ? io::parse_mdp(r.raw("mdp"), cfg.base)
                                 : build_investment_game(InvestmentGameConfig::defaults());
    const std::uint64_t seed = resolve_seed(g, r);

    std::vector<ModelKind> models;
    for (const auto& name : r.get_or<std::vector<std::string>>("models", {"rsql"}))
        models.push_back(parse_model(name));

    FitOptions opt;
    opt.jobs = g.jobs;
    opt.n_starts = r.get_or("n_starts", opt.n_starts);
    if (r.has("max_evaluations")) opt.optimizer.max_evaluations = r.get<int>("max_evaluations");

    std::vector<SubjectSource> subjects;
    if (r.has("subjects")) {
        for (auto s : r.objects("subjects")) {
            const fs::path file = cfg.base / s.get<std::string>("file");
            subjects.push_back({s.get_or("id", file.stem().string()), file, std::nullopt});
            s.finish();
        }
    }
    if (r.has("synthetic")) {
        auto syn = r.object("synthetic");
        const auto model = parse_model(syn.get<std::string>("model"));
        const auto params = io::parse_params(syn.object("params"));
        const int n = syn.get_or("n_subjects", 10);
        const long trials = syn.get_or("trials", 240L);
        syn.finish();
        try {
            check_params(model, params);
        } catch (const DomainError& e) {
            throw ConfigError(syn.path() + ".params: " + e.what());
        }
        for (int i = 0; i < n; ++i) {
            auto data = simulate_subject(mdp, model, params, trials, derive_seed(seed, i),
                                         "synthetic_" + std::to_string(i));
            subjects.push_back({data.id, std::nullopt, std::move(data)});
        }
    }
    r.finish();
    if (subjects.empty()) throw ConfigError("config: no 'subjects' or 'synthetic' entries");

    const auto dir = out_dir(g);
    CsvWriter fit_csv(dir / "fit.csv", {"subject", "model", "L", "B", "dB", "beta", "gamma",
                                        "k_plus", "l_plus", "k_minus", "l_minus", "alpha",
                                        "converged"});
    CsvWriter ana_csv(dir / "analysis.csv", {"subject", "m_sub", "m_emp", "dp"});
    CsvWriter err_csv(dir / "errors.csv", {"subject", "error"});
    if (std::any_of(subjects.begin(), subjects.end(), [](const auto& s) { return !s.file; }))
        fs::create_directories(dir / "trajectories");

    auto emit = [&](const std::string& id, std::string_view model, double L, double B, double dB,
                    const ModelParams& p, std::string_view converged) {
        const double nan = std::nan("");
        const ModelKind m = parse_model(model.substr(0, model.find("_nested")));
        const bool util = m != ModelKind::StandardQ, alpha = m != ModelKind::RSQL;
        fit_csv.cell(id).cell(model).cell(L).cell(B).cell(dB).cell(p.beta).cell(p.gamma)
            .cell(util ? p.k_plus : nan).cell(util ? p.l_plus : nan)
            .cell(util ? p.k_minus : nan).cell(util ? p.l_minus : nan)
            .cell(alpha ? p.alpha : nan).cell(converged);
        fit_csv.end_row();
    };

    int failures = 0;
    for (auto& src : subjects) {
        try {
            SubjectData data = src.data ? *src.data : io::read_trajectory_csv(*src.file, src.id);
            if (!src.file) io::write_trajectory_csv(dir / "trajectories" / (src.id + ".csv"),
                                                    data.transitions);
            const auto results = compare_models(data, mdp, models, opt);
            const FitResult& base = results.front();
            for (const auto& fr : results)
                emit(src.id, to_string(fr.model), fr.log_likelihood, fr.bic, fr.delta_bic,
                     fr.params, fr.diagnostics.converged ? "1" : "0");

            // StandardQ optimum replayed through the nested parameterizations.
            for (const auto& fr : results) {
                if (fr.model == ModelKind::StandardQ) continue;
                const auto p = nested_params(fr.model, base.params);
                const double L = replay_log_likelihood(data, mdp, fr.model, p);
                const double B = bic(L, n_params(fr.model), data.n_trials());
                emit(src.id, std::string(to_string(fr.model)) + "_nested", L, B, B - base.bic, p,
                     "");
            }

            std::vector<double> rewards;
            for (const auto& t : data.transitions) rewards.push_back(t.reward);
            const FitResult* risk = nullptr;
            for (const auto& fr : results)
                if (fr.model == ModelKind::RSQL) risk = &fr;
            const UtilityFunction u =
                risk ? fitting_utility(risk->params) : UtilityFunction::linear();
            double m_emp = 0.0;
            for (double x : rewards) m_emp += x / static_cast<double>(rewards.size());
            try {
                const double dp = normalized_subjective_probability(rewards, u);
                ana_csv.cell(src.id).cell(empirical_subjective_mean(rewards, u)).cell(m_emp)
                    .cell(dp);
                ana_csv.end_row();
            } catch (const DomainError& e) {
                err_csv.cell(src.id).cell(std::string("analysis: ") + e.what());
                err_csv.end_row();
            }
        } catch (const std::exception& e) {
            ++failures;
            err_csv.cell(src.id).cell(e.what());
            err_csv.end_row();
        }
    }
    std::cout << "fitted " << subjects.size() - failures << " of " << subjects.size()
              << " subjects\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct NamedUtility {
    std::string name;
    Shortfall shortfall;
};

std::vector<NamedUtility> default_curves() {
    return {
        {"lin", Shortfall(UtilityFunction::linear(), 0.0)},
        {"RS", Shortfall(UtilityFunction::exponential(1.0), 0.0)},
        {"RA", Shortfall(UtilityFunction::exponential(-1.0), 0.0)},
        {"mix1", Shortfall(UtilityFunction::polynomial_mixed(0.5, 2.0, 1.0, 2.0), 0.0)},
        {"mix2", Shortfall(UtilityFunction::polynomial_mixed(1.0, 0.5, 1.5, 0.5), 0.0)},
    };
}

int cmd_curves(const Globals& g) {
    auto cfg = load_config(g, false);
    ObjectReader r(cfg.json, "config");
    const double x_min = r.get_or("x_min", -3.0);
    const double x_max = r.get_or("x_max", 3.0);
    const int x_points = r.get_or("x_points", 121);
    const int p_points = r.get_or("p_points", 99);
    const double x1 = r.get_or("x1", 1.0);
    const double x2 = r.get_or("x2", -1.0);
    const double x0 = r.get_or("x0", 0.0);
    if (x_points < 2 || p_points < 1 || !(x_max > x_min) || !(x1 > x2))
        throw ConfigError("config: need x_points >= 2, p_points >= 1, x_max > x_min, x1 > x2");

    std::vector<NamedUtility> curves;
    if (r.has("utilities")) {
        for (auto c : r.objects("utilities")) {
            const auto name = c.get<std::string>("name");
            const auto u = io::parse_utility(c.object("utility"));
            c.finish();
            try {
                curves.push_back({name, Shortfall(u, x0)});
            } catch (const DomainError& e) {
                throw ConfigError(c.path() + ": " + e.what());
            }
        }
    } else {
        for (auto& c : default_curves()) curves.push_back({c.name, Shortfall(c.shortfall.utility(), x0)});
    }
    r.finish();

    const auto dir = out_dir(g);
    CsvWriter uw(dir / "utility.csv", {"name", "x", "value"});
    CsvWriter ww(dir / "wp.csv", {"name", "p", "w"});
    for (const auto& c : curves) {
        for (int i = 0; i < x_points; ++i) {
            const double x = x_min + (x_max - x_min) * i / (x_points - 1);
            uw.cell(c.name).cell(x).cell(c.shortfall.utility()(x));
            uw.end_row();
        }
        for (int i = 1; i <= p_points; ++i) {
            const double p = static_cast<double>(i) / (p_points + 1);
            ww.cell(c.name).cell(p).cell(subjective_probability(x1, x2, p, c.shortfall, 0.0));
            ww.end_row();
        }
    }
    std::cout << "wrote " << curves.size() << " curves\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-sensitive reinforcement learning experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "JSON config file");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--seed", g.seed, "Seed (overrides the config)");
    app.add_option("--jobs", g.jobs, "Worker threads for fit and simulate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    int (*command)(const Globals&) = nullptr;
    auto add = [&](const char* name, const char* help, int (*fn)(const Globals&)) {
        app.add_subcommand(name, help)->callback([&command, fn] { command = fn; });
    };
    add("solve", "Risk-sensitive value iteration", cmd_solve);
    add("learn", "Run a Q-learning variant", cmd_learn);
    add("simulate", "Sample trajectories and path statistics", cmd_simulate);
    add("fit", "Fit behavioral models to trajectories", cmd_fit);
    add("curves", "Utility and subjective probability curves", cmd_curves);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return command(g);
    } catch (const ValidationError& e) {
        std::cerr << "error: invalid mdp:\n";
        for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
