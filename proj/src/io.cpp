#include "rsrl/io.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "rsrl/errors.hpp"

namespace rsrl::io {

namespace fs = std::filesystem;

ObjectReader::ObjectReader(const Json& obj, std::string path) : obj_(&obj), path_(std::move(path)) {
    if (!obj.is_object()) throw ConfigError(path_ + ": expected an object");
}

bool ObjectReader::has(const std::string& key) const { return obj_->contains(key); }

const Json& ObjectReader::raw(const std::string& key) {
    if (!has(key)) throw ConfigError(path_ + ": missing key '" + key + "'");
    if (std::find(used_.begin(), used_.end(), key) == used_.end()) used_.push_back(key);
    return obj_->at(key);
}

ObjectReader ObjectReader::object(const std::string& key) {
    return ObjectReader(raw(key), path_ + "." + key);
}

std::vector<ObjectReader> ObjectReader::objects(const std::string& key) {
    const Json& arr = raw(key);
    if (!arr.is_array()) throw ConfigError(path_ + "." + key + ": expected an array");
    std::vector<ObjectReader> out;
    for (std::size_t i = 0; i < arr.size(); ++i)
        out.emplace_back(arr[i], path_ + "." + key + "[" + std::to_string(i) + "]");
    return out;
}

void ObjectReader::finish() const {
    std::vector<std::string> unknown;
    for (const auto& [key, _] : obj_->items())
        if (std::find(used_.begin(), used_.end(), key) == used_.end()) unknown.push_back(key);
    if (unknown.empty()) return;
    std::string msg = path_ + ": unknown key";
    msg += unknown.size() > 1 ? "s" : "";
    for (std::size_t i = 0; i < unknown.size(); ++i) msg += (i ? ", '" : " '") + unknown[i] + "'";
    throw ConfigError(msg);
}

void ObjectReader::throw_type(const std::string& key) const {
    throw ConfigError(path_ + "." + key + ": wrong type");
}

Json load_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// MDP files

namespace {

RewardModel parse_reward(ObjectReader r) {
    const auto type = r.get<std::string>("type");
    if (type == "discrete") {
        std::vector<Outcome> outcomes;
        for (auto o : r.objects("outcomes")) {
            outcomes.push_back({o.get<double>("value"), o.get<double>("p")});
            o.finish();
        }
        r.finish();
        try {
            return FiniteDistribution(std::move(outcomes));
        } catch (const DomainError& e) {
            throw ConfigError(r.path() + ": " + e.what());
        }
    }
    if (type == "gaussian_mixture") {
        GaussianMixtureReward g;
        for (auto c : r.objects("components")) {
            g.components.push_back(
                {c.get<double>("mean"), c.get<double>("std"), c.get<double>("weight")});
            c.finish();
        }
        r.finish();
        return g;
    }
    throw ConfigError(r.path() + ": unknown reward type '" + type + "'");
}

Mdp parse_explicit(ObjectReader r) {
    std::vector<StateModel> states;
    for (auto st : r.objects("states")) {
        StateModel sm;
        for (auto act : st.objects("actions")) {
            ActionModel am{act.get<int>("id"), {}, FiniteDistribution::point_mass(0.0)};
            for (auto nx : act.objects("transitions")) {
                am.transitions.push_back({nx.get<int>("state"), nx.get<double>("p")});
                nx.finish();
            }
            am.reward = parse_reward(act.object("reward"));
            act.finish();
            sm.actions.push_back(std::move(am));
        }
        st.finish();
        states.push_back(std::move(sm));
    }
    Mdp mdp(std::move(states), r.get<double>("discount"));
    r.finish();
    return mdp;
}

} // namespace

InvestmentGameConfig parse_game(ObjectReader r) {
    auto cfg = InvestmentGameConfig::defaults();
    cfg.price_std = r.get_or("price_std", cfg.price_std);
    cfg.discount = r.get_or("discount", cfg.discount);
    cfg.rounds = r.get_or("rounds", cfg.rounds);
    if (r.has("states")) {
        auto sts = r.objects("states");
        if (sts.size() != static_cast<std::size_t>(kGameStates))
            throw ConfigError(r.path() + ".states: expected " + std::to_string(kGameStates) +
                              " entries");
        for (int s = 0; s < kGameStates; ++s) {
            auto& st = sts[s];
            cfg.states[s] = {st.get<double>("mean_high"), st.get<double>("mean_low"),
                             st.get<double>("prob_high")};
            st.finish();
        }
    }
    r.finish();
    return cfg;
}

Mdp parse_mdp(const Json& j, const fs::path& base, std::string path) {
    if (j.is_string()) return load_mdp(base / j.get<std::string>());
    ObjectReader r(j, path);
    std::optional<Mdp> mdp;
    if (r.has("investment_game")) {
        if (r.has("states")) throw ConfigError(path + ": give either 'investment_game' or 'states'");
        try {
            mdp = build_investment_game(parse_game(r.object("investment_game")));
        } catch (const DomainError& e) {
            throw ConfigError(path + ".investment_game: " + e.what());
        }
        if (r.has("discount")) mdp = mdp->with_discount(r.get<double>("discount"));
    } else {
        Json copy = j;
        copy.erase("discretize");
        mdp = parse_explicit(ObjectReader(copy, path));
        r.raw("states");
        r.raw("discount");
    }
    if (r.has("discretize")) {
        const int q = r.get<int>("discretize");
        if (q < 1) throw ConfigError(path + ".discretize: must be >= 1");
        mdp = discretize_rewards(*mdp, q);
    }
    r.finish();
    require_valid(*mdp);
    return std::move(*mdp);
}

Mdp load_mdp(const fs::path& path) {
    return parse_mdp(load_json(path), path.parent_path(), path.filename().string());
}

// ---------------------------------------------------------------------------
// Valuation and learner configs

UtilityFunction parse_utility(ObjectReader r) {
    const auto family = r.get<std::string>("family");
    auto wrap = [&](auto make) {
        try {
            return make();
        } catch (const DomainError& e) {
            throw ConfigError(r.path() + ": " + e.what());
        }
    };
    UtilityFunction u = UtilityFunction::linear();
    if (family == "linear") {
    } else if (family == "entropic") {
        u = wrap([&] { return UtilityFunction::entropic(r.get<double>("lambda")); });
    } else if (family == "exponential") {
        u = wrap([&] { return UtilityFunction::exponential(r.get<double>("lambda")); });
    } else if (family == "piecewise_linear") {
        u = wrap([&] { return UtilityFunction::piecewise_linear(r.get<double>("kappa")); });
    } else if (family == "polynomial_mixed") {
        u = wrap([&] {
            return UtilityFunction::polynomial_mixed(
                r.get<double>("k_plus"), r.get<double>("l_plus"), r.get<double>("k_minus"),
                r.get<double>("l_minus"), r.get_or("shift", 0.0));
        });
    } else {
        throw ConfigError(r.path() + ": unknown utility family '" + family + "'");
    }
    r.finish();
    return u;
}

Shortfall parse_shortfall(ObjectReader r) {
    UtilityFunction u = parse_utility(r.object("utility"));
    if (r.has("linearize")) {
        auto lin = r.object("linearize");
        const double phi = lin.get_or("phi", kDefaultLinearizationPhi);
        const auto scheme = lin.get_or<std::string>("scheme", "linear");
        lin.finish();
        if (scheme != "linear" && scheme != "shift")
            throw ConfigError(lin.path() + ".scheme: expected 'linear' or 'shift'");
        try {
            u = linearize_near_zero(u, phi,
                                    scheme == "linear" ? LinearizationScheme::Linear
                                                       : LinearizationScheme::Shift);
        } catch (const std::logic_error& e) {
            throw ConfigError(lin.path() + ": " + e.what());
        }
    }
    const double x0 = r.get_or("x0", 0.0);
    r.finish();
    try {
        return Shortfall(std::move(u), x0);
    } catch (const DomainError& e) {
        throw ConfigError(r.path() + ": " + e.what());
    }
}

LearnerConfig parse_learner(ObjectReader r, const Mdp& mdp) {
    LearnerConfig cfg;
    cfg.algorithm = parse_algorithm(r.get_or<std::string>("algorithm", "rsql"));
    if (r.has("shortfall")) cfg.shortfall = parse_shortfall(r.object("shortfall"));
    cfg.gamma = r.get_or("gamma", mdp.discount());
    if (r.has("schedule")) {
        auto sch = r.object("schedule");
        const auto type = sch.get<std::string>("type");
        if (type == "inverse_visit") cfg.schedule = Schedule::inverse_visit();
        else if (type == "constant") cfg.schedule = Schedule::constant(sch.get<double>("alpha"));
        else throw ConfigError(sch.path() + ".type: unknown schedule '" + type + "'");
        sch.finish();
    }
    cfg.beta = r.get_or("beta", cfg.beta);
    cfg.steps = r.get_or("steps", cfg.steps);
    cfg.seed = r.get_or<std::uint64_t>("seed", cfg.seed);
    cfg.start_state = r.get_or("start_state", cfg.start_state);
    cfg.q_init = r.get_or("q_init", cfg.q_init);
    if (r.has("truncation")) {
        auto tr = r.object("truncation");
        cfg.truncation.reward_bound = tr.optional<double>("reward_bound");
        cfg.truncation.slope = tr.optional<double>("slope");
        cfg.truncation.clamp_q = tr.get_or("clamp_q", false);
        tr.finish();
    }
    cfg.record_trace = r.get_or("trace", false);
    cfg.snapshot_every = r.get_or("snapshot_every", 0L);
    r.finish();
    validate_config(cfg, mdp);
    return cfg;
}

ModelParams parse_params(ObjectReader r) {
    ModelParams p;
    p.beta = r.get_or("beta", p.beta);
    p.gamma = r.get_or("gamma", p.gamma);
    p.k_plus = r.get_or("k_plus", p.k_plus);
    p.l_plus = r.get_or("l_plus", p.l_plus);
    p.k_minus = r.get_or("k_minus", p.k_minus);
    p.l_minus = r.get_or("l_minus", p.l_minus);
    p.alpha = r.get_or("alpha", p.alpha);
    r.finish();
    return p;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const fs::path& path, std::initializer_list<std::string_view> header)
    : out_(path), path_(path) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    for (auto h : header) cell(h);
    end_row();
}

void CsvWriter::sep() {
    if (!first_) out_ << ',';
    first_ = false;
}

CsvWriter& CsvWriter::cell(double v) {
    sep();
    out_ << format_double(v);
    return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
    sep();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::cell(std::string_view v) {
    sep();
    if (v.find_first_of(",\"\n") == std::string_view::npos) {
        out_ << v;
    } else {
        out_ << '"';
        for (char c : v) out_ << (c == '"' ? "\"\"" : std::string(1, c));
        out_ << '"';
    }
    return *this;
}

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
    if (!out_) throw std::runtime_error("write to '" + path_.string() + "' failed");
}

void write_trajectory_csv(const fs::path& path, const std::vector<Transition>& ts) {
    CsvWriter w(path, {"round", "t", "state", "action", "reward", "next_state"});
    for (const auto& t : ts) {
        w.cell(t.t / kGameDecisionsPerRound).cell(t.t).cell(t.state).cell(t.action).cell(t.reward)
            .cell(t.next_state);
        w.end_row();
    }
}

SubjectData read_trajectory_csv(const fs::path& path, std::string id) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    SubjectData data{std::move(id), {}};
    std::string line;
    long lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kTrajectoryHeader)
                throw ConfigError(path.string() + ": expected header '" +
                                  std::string(kTrajectoryHeader) + "'");
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string f[6];
        for (int i = 0; i < 6; ++i)
            if (!std::getline(row, f[i], ','))
                throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected 6 columns");
        try {
            std::size_t used = 0;
            auto whole = [&](const std::string& s) {
                if (used != s.size()) throw std::invalid_argument("trailing characters");
            };
            Transition t{};
            t.t = std::stol(f[1], &used); whole(f[1]);
            t.state = std::stoi(f[2], &used); whole(f[2]);
            t.action = std::stoi(f[3], &used); whole(f[3]);
            t.reward = std::stod(f[4], &used); whole(f[4]);
            t.next_state = std::stoi(f[5], &used); whole(f[5]);
            data.transitions.push_back(t);
        } catch (const std::logic_error&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
    }
    for (std::size_t i = 1; i < data.transitions.size(); ++i)
        if (data.transitions[i].t <= data.transitions[i - 1].t)
            throw ConfigError(path.string() + ": rows are not ordered by t");
    return data;
}

} // namespace rsrl::io
