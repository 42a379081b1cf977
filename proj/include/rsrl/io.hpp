#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rsrl/fitting.hpp"
#include "rsrl/learner.hpp"
#include "rsrl/mdp.hpp"
#include "rsrl/valuation.hpp"

namespace rsrl::io {

using Json = nlohmann::json;

/// Read access to a JSON object that remembers which keys were used.
/// finish() throws ConfigError naming every key that was never read.
class ObjectReader {
public:
    ObjectReader(const Json& obj, std::string path);

    bool has(const std::string& key) const;
    const Json& raw(const std::string& key);

    template <class T>
    T get(const std::string& key) {
        return convert<T>(raw(key), key);
    }

    template <class T>
    T get_or(const std::string& key, T fallback) {
        return has(key) ? get<T>(key) : fallback;
    }

    template <class T>
    std::optional<T> optional(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return get<T>(key);
    }

    ObjectReader object(const std::string& key);
    std::vector<ObjectReader> objects(const std::string& key);

    const std::string& path() const noexcept { return path_; }
    void finish() const;

private:
    template <class T>
    T convert(const Json& v, const std::string& key) const {
        try {
            return v.get<T>();
        } catch (const nlohmann::json::exception&) {
            throw_type(key);
        }
    }
    [[noreturn]] void throw_type(const std::string& key) const;

    const Json* obj_;
    std::string path_;
    std::vector<std::string> used_;
};

Json load_json(const std::filesystem::path& path);

/// Either an inline {"investment_game": ...} / explicit model, or a string
/// naming a file relative to `base`.
Mdp parse_mdp(const Json& j, const std::filesystem::path& base, std::string path = "mdp");
Mdp load_mdp(const std::filesystem::path& path);

InvestmentGameConfig parse_game(ObjectReader r);

/// {"family": ..., parameters...}
UtilityFunction parse_utility(ObjectReader r);

/// {"utility": {...}, "x0": 0, "linearize": {"phi": 1e-4, "scheme": "linear"}}
Shortfall parse_shortfall(ObjectReader r);

/// gamma defaults to the mdp discount.
LearnerConfig parse_learner(ObjectReader r, const Mdp& mdp);

ModelParams parse_params(ObjectReader r);

// ---------------------------------------------------------------------------
// CSV

/// 17 significant digits.
std::string format_double(double v);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(long v) { return cell(static_cast<long long>(v)); }
    CsvWriter& cell(std::string_view v);
    void end_row();

private:
    void sep();
    std::ofstream out_;
    bool first_ = true;
    std::filesystem::path path_;
};

inline constexpr std::string_view kTrajectoryHeader = "round,t,state,action,reward,next_state";

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<Transition>& ts);

/// Empty files and header-only files give zero transitions.
SubjectData read_trajectory_csv(const std::filesystem::path& path, std::string id);

} // namespace rsrl::io
