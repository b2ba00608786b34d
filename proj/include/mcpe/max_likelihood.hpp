#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/linalg.hpp"
#include "mcpe/sampling.hpp"
#include "mcpe/value_vector.hpp"

namespace mcpe {

/// Visit and transition counts for the maximum-likelihood model.
struct MlModel {
    std::vector<std::map<StateIndex, std::uint64_t>> transition_counts;
    std::vector<std::uint64_t> state_counts;
    std::vector<double> reward_sums;

    MlModel() = default;
    explicit MlModel(std::size_t n) : transition_counts(n), state_counts(n, 0), reward_sums(n, 0.0) {}

    std::size_t size() const noexcept { return state_counts.size(); }

    /// Estimated transition row of a visited state; empty when unvisited.
    std::map<StateIndex, double> transition_row(StateIndex s) const {
        std::map<StateIndex, double> row;
        if (state_counts[s] == 0) return row;
        const double total = static_cast<double>(state_counts[s]);
        for (auto [m, c] : transition_counts[s]) row[m] = static_cast<double>(c) / total;
        return row;
    }

    /// Estimated mean reward of a visited state.
    double mean_reward(StateIndex s) const { return reward_sums[s] / static_cast<double>(state_counts[s]); }
};

inline void ml_update(MlModel& model, const StepRecord& step) {
    if (step.state >= model.size() || step.next_state >= model.size())
        throw ValidationError("ml_update: state index out of range");
    ++model.transition_counts[step.state][step.next_state];
    ++model.state_counts[step.state];
    model.reward_sums[step.state] += step.reward;
}

/// Plug-in value estimate: solves (I - gamma P_hat) v = r_hat.
///
/// Unvisited states are given a zero-reward self-loop, so their value is 0
/// and they drop out; the solve therefore runs only over visited states.
inline ValueVector ml_value(const MlModel& model, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("ml_value: gamma outside (0, 1)");
    const std::size_t n = model.size();
    std::vector<std::int64_t> pos(n, -1);
    std::vector<StateIndex> visited;
    for (StateIndex s = 0; s < n; ++s)
        if (model.state_counts[s] > 0) {
            pos[s] = static_cast<std::int64_t>(visited.size());
            visited.push_back(s);
        }
    if (visited.empty()) throw ValidationError("ml_value: model has no visited states");

    const auto m = static_cast<Eigen::Index>(visited.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd b(m);
    for (Eigen::Index p = 0; p < m; ++p) {
        const StateIndex s = visited[static_cast<std::size_t>(p)];
        const double total = static_cast<double>(model.state_counts[s]);
        for (auto [succ, c] : model.transition_counts[s]) {
            if (pos[succ] < 0) continue;
            a(p, pos[succ]) -= gamma * (static_cast<double>(c) / total);
        }
        b[p] = model.reward_sums[s] / total;
    }
    const Eigen::VectorXd x = solve_dense(a, b);
    ValueVector out(n);
    for (Eigen::Index p = 0; p < m; ++p) {
        const StateIndex s = visited[static_cast<std::size_t>(p)];
        out.values[s] = x[p];
        out.visited[s] = true;
    }
    return out;
}

/// Counts a whole stream into a fresh model.
inline MlModel ml_fit(std::span<const StepRecord> stream, std::size_t n) {
    MlModel model(n);
    for (const auto& s : stream) ml_update(model, s);
    return model;
}

} // namespace mcpe
