#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/rng.hpp"
#include "mcpe/sampling.hpp"
#include "mcpe/value_vector.hpp"

// Monte Carlo matrix inversion (MCMI) value estimation.
//
// Walks stop after each visit with probability 1 - gamma. Every visit inside
// a walk is treated as the start of its own sub-walk that ends where the
// whole walk ends, so each visited state is credited the terminal reward once
// per visit: s(n) counts sub-walk starts and v(n) sums their terminal
// rewards. The estimate is v(n) / ((1 - gamma) s(n)).
//
// Sample budget: a walk consumes one sample per transition, and at least one
// sample in total. Walks are atomic: the walk that crosses the budget runs to
// completion.

namespace mcpe {

/// Per-slot walk counters: t (visits in the current walk), s (sub-walk starts)
/// and v (terminal reward credit).
struct WalkAccumulators {
    std::vector<std::uint64_t> t;
    std::vector<std::uint64_t> s;
    std::vector<double> v;

    void ensure(std::size_t size) {
        if (t.size() < size) {
            t.resize(size, 0);
            s.resize(size, 0);
            v.resize(size, 0.0);
        }
    }
};

/// Slot mapping where every state owns slot == state index.
class DenseSlots {
public:
    explicit DenseSlots(std::size_t n) : n_(n) {}
    std::size_t slot(StateIndex s) { return static_cast<std::size_t>(s); }
    std::size_t size() const noexcept { return n_; }
    StateIndex state(std::size_t p) const noexcept { return p; }

private:
    std::size_t n_;
};

/// States touched during sampling, numbered 0..m-1 in first-touch order.
class VisitedSet {
public:
    /// Dense position of `s`, inserting it if new.
    std::size_t slot(StateIndex s) {
        auto [it, inserted] = index_.try_emplace(s, states_.size());
        if (inserted) states_.push_back(s);
        return it->second;
    }

    std::size_t size() const noexcept { return states_.size(); }
    StateIndex state(std::size_t p) const { return states_[p]; }
    const std::vector<StateIndex>& states() const noexcept { return states_; }

    bool contains(StateIndex s) const { return index_.contains(s); }
    std::size_t position(StateIndex s) const { return index_.at(s); }

private:
    std::vector<StateIndex> states_;
    std::unordered_map<StateIndex, std::size_t> index_;
};

struct WalkStats {
    std::uint64_t walks = 0;
    std::uint64_t transitions = 0;
    std::uint64_t consumed = 0;

    double mean_walk_length() const { return walks == 0 ? 0.0 : static_cast<double>(transitions) / static_cast<double>(walks); }
};

/// Called at each walk end with the slots visited in that walk, their t
/// counts, and the terminal reward credited to them.
struct NoWalkObserver {
    void operator()(std::span<const std::size_t>, std::span<const std::uint64_t>, double) const {}
};

namespace detail {

inline void check_gamma(double gamma, const char* who) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        std::ostringstream msg;
        msg << who << ": gamma " << gamma << " outside (0, 1)";
        throw ValidationError(msg.str());
    }
}

// Runs walks until `budget` samples are consumed. Absorbing states are
// recorded in `absorbing_slots` instead of being counted in t.
template <TransitionSampler S, class Slots, class Observer>
WalkStats run_mcmi_walks(const S& sampler, double gamma, std::uint64_t budget, Rng& rng, Slots& slots,
                         WalkAccumulators& acc, std::vector<std::size_t>& absorbing_slots, Observer&& observer) {
    WalkStats stats;
    std::vector<std::size_t> touched;
    std::vector<std::uint64_t> counts;
    std::vector<bool> absorbing_seen;
    auto note_absorbing = [&](StateIndex st) {
        const std::size_t p = slots.slot(st);
        acc.ensure(slots.size());
        if (absorbing_seen.size() <= p) absorbing_seen.resize(slots.size(), false);
        if (!absorbing_seen[p]) {
            absorbing_seen[p] = true;
            absorbing_slots.push_back(p);
        }
    };

    while (stats.consumed < budget) {
        StateIndex n = sampler.start_state(rng);
        std::uint64_t length = 0;
        touched.clear();
        for (;;) {
            if (sampler.is_absorbing(n)) {
                note_absorbing(n);
                break;
            }
            const std::size_t p = slots.slot(n);
            acc.ensure(slots.size());
            if (acc.t[p]++ == 0) touched.push_back(p);
            if (rng.uniform() <= gamma) {
                n = sampler.next_state(n, rng);
                ++length;
            } else {
                break;
            }
        }
        if (!touched.empty()) {
            const double r_term = sampler.reward(n, rng);
            counts.clear();
            for (std::size_t p : touched) {
                const std::uint64_t c = acc.t[p];
                counts.push_back(c);
                acc.s[p] += c;
                acc.v[p] += r_term * static_cast<double>(c);
                acc.t[p] = 0;
            }
            observer(std::span<const std::size_t>(touched), std::span<const std::uint64_t>(counts), r_term);
        }
        ++stats.walks;
        stats.transitions += length;
        stats.consumed += length == 0 ? 1 : length;
    }
    return stats;
}

} // namespace detail

struct McmiEstimate {
    ValueVector values;
    WalkStats stats;
};

/// MCMI estimate of every state's value from walks with uniform starts.
///
/// Absorbing states end a walk on entry; the pending visits are credited the
/// absorbing state's sampled reward and the absorbing state itself receives
/// r(abs) / (1 - gamma).
template <TransitionSampler S, class Observer = NoWalkObserver>
McmiEstimate mcmi_evaluate(const S& sampler, double gamma, std::uint64_t total_steps, Rng& rng,
                           Observer&& observer = {}) {
    detail::check_gamma(gamma, "mcmi_evaluate");
    if (total_steps == 0) throw ValidationError("mcmi_evaluate: total_steps must be positive");
    const std::size_t n = sampler.state_count();
    DenseSlots slots(n);
    WalkAccumulators acc;
    acc.ensure(n);
    std::vector<std::size_t> absorbing;
    McmiEstimate out;
    out.stats = detail::run_mcmi_walks(sampler, gamma, total_steps, rng, slots, acc, absorbing,
                                       std::forward<Observer>(observer));
    out.values = ValueVector(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (acc.s[i] == 0) continue;
        out.values.values[i] = acc.v[i] / ((1.0 - gamma) * static_cast<double>(acc.s[i]));
        out.values.visited[i] = true;
    }
    for (std::size_t p : absorbing) {
        out.values.values[p] = sampler.mean_reward(p) / (1.0 - gamma);
        out.values.visited[p] = true;
    }
    return out;
}

struct SingleStateEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t walks = 0;
};

/// Value of one state from walks that all start there; no other state's
/// estimate is touched. Equals the start row of (I - gamma P)^{-1} times r,
/// without forming the row.
template <TransitionSampler S>
SingleStateEstimate mcmi_single_state_stats(const S& sampler, StateIndex state, double gamma, std::uint64_t num_walks,
                                            Rng& rng) {
    detail::check_gamma(gamma, "mcmi_single_state");
    if (num_walks == 0) throw ValidationError("mcmi_single_state: num_walks must be positive");
    if (state >= sampler.state_count()) throw ValidationError("mcmi_single_state: state out of range");
    SingleStateEstimate out;
    out.walks = num_walks;
    if (sampler.is_absorbing(state)) {
        out.value = sampler.mean_reward(state) / (1.0 - gamma);
        return out;
    }
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::uint64_t w = 0; w < num_walks; ++w) {
        StateIndex n = state;
        while (!sampler.is_absorbing(n) && rng.uniform() <= gamma) n = sampler.next_state(n, rng);
        const double r = sampler.reward(n, rng);
        sum += r;
        sumsq += r * r;
    }
    const double nw = static_cast<double>(num_walks);
    const double mean = sum / nw;
    const double var = num_walks > 1 ? std::max(0.0, (sumsq - nw * mean * mean) / (nw - 1.0)) : 0.0;
    out.value = mean / (1.0 - gamma);
    out.std_error = std::sqrt(var / nw) / (1.0 - gamma);
    return out;
}

template <TransitionSampler S>
double mcmi_single_state(const S& sampler, StateIndex state, double gamma, std::uint64_t num_walks, Rng& rng) {
    return mcmi_single_state_stats(sampler, state, gamma, num_walks, rng).value;
}

/// Variance of the walk statistic for an entry x of (I - gamma P)^{-1}:
/// x / (1 - gamma) - x^2, which never exceeds 1 / (4 (1 - gamma)^2).
inline double mcmi_variance_pred(double inverse_entry, double gamma) {
    detail::check_gamma(gamma, "mcmi_variance_pred");
    const double upper = 1.0 / (1.0 - gamma);
    if (!(inverse_entry >= 0.0 && inverse_entry <= upper * (1.0 + 1e-12))) {
        std::ostringstream msg;
        msg << "mcmi_variance_pred: entry " << inverse_entry << " outside [0, " << upper << "]";
        throw ValidationError(msg.str());
    }
    return std::max(0.0, inverse_entry * upper - inverse_entry * inverse_entry);
}

} // namespace mcpe
