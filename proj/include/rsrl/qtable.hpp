#pragma once

#include <span>
#include <vector>

#include "rsrl/mdp.hpp"

namespace rsrl {

/// Values on the admissible pairs of an Mdp, laid out per state in the
/// Mdp's action order. Argmax ties go to the lowest action id.
class QTable {
public:
    QTable() = default;
    explicit QTable(const Mdp& mdp, double init = 0.0);

    int n_states() const noexcept { return static_cast<int>(values_.size()); }
    const std::vector<int>& action_ids(int s) const { return ids_.at(s); }

    std::span<const double> row(int s) const { return values_.at(s); }
    std::span<double> row(int s) { return values_.at(s); }

    /// Value at action id `a`; throws DomainError when inadmissible.
    double operator()(int s, int a) const;
    double& at(int s, int a);

    /// Position of action id `a` within row(s), or -1.
    int index_of(int s, int a) const noexcept;

    double max(int s) const;
    int argmax(int s) const;

    double sup_distance(const QTable& other) const;

    bool operator==(const QTable&) const = default;

private:
    std::vector<std::vector<int>> ids_;
    std::vector<std::vector<double>> values_;
};

} // namespace rsrl
