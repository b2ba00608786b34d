#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/rng.hpp"

namespace mcpe {

/// Anything that can simulate transitions and rewards of a reward process.
template <class S>
concept TransitionSampler = requires(const S& s, StateIndex i, Rng& rng) {
    { s.state_count() } -> std::convertible_to<std::size_t>;
    { s.next_state(i, rng) } -> std::same_as<StateIndex>;
    { s.reward(i, rng) } -> std::convertible_to<double>;
    { s.mean_reward(i) } -> std::convertible_to<double>;
    { s.is_absorbing(i) } -> std::convertible_to<bool>;
    { s.start_state(rng) } -> std::same_as<StateIndex>;
};

struct StepRecord {
    StateIndex state = 0;
    double reward = 0.0;
    StateIndex next_state = 0;
    std::uint64_t trajectory_id = 0;
    bool is_trajectory_end = false;

    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

enum class SamplingMode { absorbing_restarts, single_random_walk };

/// How trajectories are produced. Restarts are always uniform over start states.
struct SamplingStrategy {
    SamplingMode mode = SamplingMode::single_random_walk;
};

inline const char* to_string(SamplingMode m) {
    return m == SamplingMode::absorbing_restarts ? "absorbing_restarts" : "single_random_walk";
}

namespace detail {

// Strong connectivity of `nodes` under `succ`, ignoring absorbing nodes and
// edges that leave the node set.
template <class Succ, class IsAbsorbing>
bool strongly_connected(std::span<const StateIndex> nodes, Succ&& succ, IsAbsorbing&& absorbing) {
    std::unordered_map<StateIndex, std::size_t> pos;
    std::vector<StateIndex> live;
    for (StateIndex s : nodes) {
        if (absorbing(s)) continue;
        pos.emplace(s, live.size());
        live.push_back(s);
    }
    if (live.size() <= 1) return true;
    std::vector<std::vector<std::size_t>> fwd(live.size()), rev(live.size());
    for (std::size_t a = 0; a < live.size(); ++a) {
        for (StateIndex t : succ(live[a])) {
            auto it = pos.find(t);
            if (it == pos.end()) continue;
            fwd[a].push_back(it->second);
            rev[it->second].push_back(a);
        }
    }
    auto reaches_all = [&](const std::vector<std::vector<std::size_t>>& g) {
        std::vector<bool> seen(g.size(), false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t count = 1;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v : g[u])
                if (!seen[v]) {
                    seen[v] = true;
                    ++count;
                    stack.push_back(v);
                }
        }
        return count == g.size();
    };
    return reaches_all(fwd) && reaches_all(rev);
}

} // namespace detail

/// Throws ValidationError when `strategy` cannot be used with `mrp`.
///
/// Reaching an absorbing state in finite expected time is not checked;
/// that is the caller's responsibility.
inline void check_strategy(const Mrp& mrp, SamplingStrategy strategy) {
    const auto& tm = mrp.transitions();
    if (strategy.mode == SamplingMode::absorbing_restarts) {
        if (tm.absorbing_states().empty())
            throw ValidationError("absorbing_restarts requires at least one absorbing state");
        return;
    }
    std::vector<StateIndex> all(mrp.size());
    for (StateIndex i = 0; i < all.size(); ++i) all[i] = i;
    const bool ok = detail::strongly_connected(
        all, [&](StateIndex s) { return tm.targets(s); }, [&](StateIndex s) { return tm.is_absorbing(s); });
    if (!ok) throw ValidationError("single_random_walk requires a chain irreducible on its non-absorbing states");
}

/// Default strategy: restarts if any state absorbs, otherwise one long walk.
inline SamplingStrategy default_strategy(const Mrp& mrp) {
    return {mrp.transitions().absorbing_states().empty() ? SamplingMode::single_random_walk
                                                         : SamplingMode::absorbing_restarts};
}

/// Emits exactly `total_steps` step records.
///
/// absorbing_restarts: a trajectory ends on the step that enters an absorbing
/// state and the next one starts at a uniformly drawn state.
/// single_random_walk: one trajectory from a uniform start; its last record is
/// flagged as the end.
template <TransitionSampler S>
std::vector<StepRecord> sample_stream(const S& sampler, SamplingStrategy strategy, std::size_t total_steps, Rng& rng) {
    check_strategy(sampler, strategy);
    std::vector<StepRecord> out;
    out.reserve(total_steps);
    if (total_steps == 0) return out;
    std::uint64_t trajectory = 0;
    StateIndex state = sampler.start_state(rng);
    for (std::size_t t = 0; t < total_steps; ++t) {
        const StateIndex next = sampler.next_state(state, rng);
        const double reward = sampler.reward(state, rng);
        const bool end = strategy.mode == SamplingMode::absorbing_restarts && sampler.is_absorbing(next);
        out.push_back({state, reward, next, trajectory, end});
        if (end) {
            ++trajectory;
            state = sampler.start_state(rng);
        } else {
            state = next;
        }
    }
    out.back().is_trajectory_end = true;
    return out;
}

/// Throws ValidationError at the first chain break not preceded by an end flag.
inline void check_stream(std::span<const StepRecord> stream, std::size_t n) {
    for (std::size_t k = 0; k < stream.size(); ++k) {
        const auto& s = stream[k];
        if (s.state >= n || s.next_state >= n)
            throw ValidationError("malformed stream: state index out of range at record " + std::to_string(k));
        if (k + 1 < stream.size() && !s.is_trajectory_end && stream[k + 1].state != s.next_state)
            throw ValidationError("malformed stream: chain break without trajectory end at record " +
                                  std::to_string(k));
    }
}

} // namespace mcpe
