#include "rsrl/qtable.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rsrl {

QTable::QTable(const Mdp& mdp, double init) {
    ids_.resize(mdp.n_states());
    values_.resize(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
        for (const auto& act : mdp.actions(s)) ids_[s].push_back(act.id);
        values_[s].assign(ids_[s].size(), init);
    }
}

int QTable::index_of(int s, int a) const noexcept {
    if (s < 0 || s >= n_states()) return -1;
    const auto& ids = ids_[s];
    const auto it = std::find(ids.begin(), ids.end(), a);
    return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}

double QTable::operator()(int s, int a) const {
    const int i = index_of(s, a);
    if (i < 0)
        throw DomainError("Q lookup at inadmissible pair (s=" + std::to_string(s) +
                          ", a=" + std::to_string(a) + ")");
    return values_[s][i];
}

double& QTable::at(int s, int a) {
    const int i = index_of(s, a);
    if (i < 0)
        throw DomainError("Q lookup at inadmissible pair (s=" + std::to_string(s) +
                          ", a=" + std::to_string(a) + ")");
    return values_[s][i];
}

double QTable::max(int s) const {
    const auto& row = values_.at(s);
    return *std::max_element(row.begin(), row.end());
}

int QTable::argmax(int s) const {
    const auto& row = values_.at(s);
    const auto& ids = ids_.at(s);
    std::size_t best = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
        if (row[i] > row[best] || (row[i] == row[best] && ids[i] < ids[best])) best = i;
    }
    return ids[best];
}

double QTable::sup_distance(const QTable& other) const {
    if (ids_ != other.ids_) throw DomainError("Q tables have different shapes");
    double d = 0.0;
    for (std::size_t s = 0; s < values_.size(); ++s)
        for (std::size_t i = 0; i < values_[s].size(); ++i)
            d = std::max(d, std::abs(values_[s][i] - other.values_[s][i]));
    return d;
}

} // namespace rsrl
