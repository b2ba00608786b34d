#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/rng.hpp"
#include "mcpe/sampling.hpp"

namespace mcpe {

/// A reward process over a nominal state space of size n whose rows are
/// generated on demand.
///
/// A designated subset of m states is closed under transitions: every row,
/// inside the subset or not, draws its successors from the subset. Starts are
/// uniform over the subset, so sampling never touches more than m distinct
/// states. Row contents depend only on (seed, state index); memory grows with
/// the number of rows actually queried.
class ProceduralMrp {
public:
    struct Row {
        std::vector<StateIndex> targets;
        std::vector<double> probs;
        std::vector<double> cdf;
        double reward_mean = 0.0;
        bool absorbing = false;
    };

    ProceduralMrp(std::uint64_t n, std::size_t reachable_size, std::size_t out_degree, RngStream seed,
                  double gamma = 0.8, RewardRange rewards = {})
        : n_(n), out_degree_(out_degree), seed_(seed), gamma_(gamma), reward_range_(rewards),
          cache_(std::make_unique<Cache>()) {
        if (n == 0 || reachable_size == 0) throw ValidationError("procedural_mrp: sizes must be positive");
        if (reachable_size > n) {
            std::ostringstream msg;
            msg << "procedural_mrp: reachable_size " << reachable_size << " exceeds n=" << n;
            throw ValidationError(msg.str());
        }
        if (out_degree == 0 || out_degree > reachable_size) {
            std::ostringstream msg;
            msg << "procedural_mrp: out_degree " << out_degree << " must lie in [1, m=" << reachable_size << "]";
            throw ValidationError(msg.str());
        }
        if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("procedural_mrp: gamma outside (0, 1)");

        // Floyd's sampling of m distinct indices from [0, n).
        Rng rng(seed.substream(kSubsetTag));
        std::unordered_set<StateIndex> chosen;
        chosen.reserve(reachable_size * 2);
        for (std::uint64_t j = n - reachable_size; j < n; ++j) {
            const StateIndex t = rng.below(j + 1);
            chosen.insert(chosen.contains(t) ? j : t);
        }
        subset_.assign(chosen.begin(), chosen.end());
        std::sort(subset_.begin(), subset_.end());
    }

    std::size_t state_count() const noexcept { return static_cast<std::size_t>(n_); }
    std::uint64_t nominal_size() const noexcept { return n_; }
    double gamma() const noexcept { return gamma_; }
    std::size_t out_degree() const noexcept { return out_degree_; }

    /// Sorted indices of the closed reachable subset.
    const std::vector<StateIndex>& reachable() const noexcept { return subset_; }

    bool is_reachable(StateIndex s) const { return std::binary_search(subset_.begin(), subset_.end(), s); }

    /// Row of `state`, generating and caching it on first use. Thread-safe.
    const Row& row(StateIndex state) const {
        if (state >= n_) throw ValidationError("procedural_mrp: state out of range");
        std::lock_guard lock(cache_->mutex);
        auto it = cache_->rows.find(state);
        if (it == cache_->rows.end()) it = cache_->rows.emplace(state, generate_row(state)).first;
        return it->second;
    }

    /// Number of rows materialized so far.
    std::size_t materialized_rows() const {
        std::lock_guard lock(cache_->mutex);
        return cache_->rows.size();
    }

    // Transition-sampler interface.
    bool is_absorbing(StateIndex i) const { return row(i).absorbing; }
    double mean_reward(StateIndex i) const { return row(i).reward_mean; }
    double reward(StateIndex i, Rng&) const { return row(i).reward_mean; }
    StateIndex start_state(Rng& rng) const { return subset_[rng.below(subset_.size())]; }

    StateIndex next_state(StateIndex i, Rng& rng) const {
        const Row& r = row(i);
        const double u = rng.uniform() * r.cdf.back();
        auto it = std::upper_bound(r.cdf.begin(), r.cdf.end(), u);
        if (it == r.cdf.end()) --it;
        return r.targets[static_cast<std::size_t>(it - r.cdf.begin())];
    }

    /// The closed subset as an explicit m-state Mrp; position p holds reachable()[p].
    Mrp reachable_mrp() const {
        std::vector<SparseRow> rows(subset_.size());
        std::vector<double> mean(subset_.size());
        for (std::size_t p = 0; p < subset_.size(); ++p) {
            const Row& r = row(subset_[p]);
            for (std::size_t k = 0; k < r.targets.size(); ++k) {
                const auto pos = static_cast<StateIndex>(
                    std::lower_bound(subset_.begin(), subset_.end(), r.targets[k]) - subset_.begin());
                rows[p].push_back({pos, r.probs[k]});
            }
            mean[p] = r.reward_mean;
        }
        return Mrp(TransitionMatrix(rows), RewardModel::deterministic(std::move(mean)), gamma_);
    }

private:
    static constexpr std::uint64_t kSubsetTag = 0x5eb5e7ULL;
    static constexpr std::uint64_t kRowTag = 0x40f5ULL;

    struct Cache {
        std::mutex mutex;
        std::unordered_map<StateIndex, Row> rows;
    };

    Row generate_row(StateIndex state) const {
        Rng rng(seed_.substream(kRowTag).substream(state));
        const std::size_t m = subset_.size();
        // Subset states always link to their ring successor so the subset is
        // irreducible; the other successors come from Floyd's sampling.
        const auto pos = std::lower_bound(subset_.begin(), subset_.end(), state);
        const bool inside = pos != subset_.end() && *pos == state;
        const std::size_t ring = inside ? (static_cast<std::size_t>(pos - subset_.begin()) + 1) % m : 0;
        const std::size_t pool = inside ? m - 1 : m;
        const std::size_t draws = inside ? out_degree_ - 1 : out_degree_;
        std::vector<std::size_t> picks;
        picks.reserve(out_degree_);
        for (std::size_t j = pool - draws; j < pool; ++j) {
            const std::size_t t = rng.below(j + 1);
            picks.push_back(std::find(picks.begin(), picks.end(), t) == picks.end() ? t : j);
        }
        if (inside) {
            for (auto& p : picks) p = (ring + 1 + p) % m;
            picks.push_back(ring);
        }
        std::sort(picks.begin(), picks.end());
        Row r;
        double total = 0.0;
        for (std::size_t p : picks) {
            const double w = 1.0 - rng.uniform();
            r.targets.push_back(subset_[p]);
            r.probs.push_back(w);
            total += w;
        }
        double run = 0.0;
        for (auto& p : r.probs) {
            p /= total;
            run += p;
            r.cdf.push_back(run);
        }
        r.reward_mean = rng.uniform(reward_range_.lo, reward_range_.hi);
        r.absorbing = r.targets.size() == 1 && r.targets.front() == state;
        return r;
    }

    std::uint64_t n_;
    std::size_t out_degree_;
    RngStream seed_;
    double gamma_;
    RewardRange reward_range_;
    std::vector<StateIndex> subset_;
    std::shared_ptr<Cache> cache_;
};

/// procedural_mrp(n, m, out_degree, seed)
inline ProceduralMrp procedural_mrp(std::uint64_t n, std::size_t reachable_size, std::size_t out_degree,
                                    RngStream seed, double gamma = 0.8) {
    return ProceduralMrp(n, reachable_size, out_degree, seed, gamma);
}

/// Strategy checks for a procedural process run over its reachable subset.
inline void check_strategy(const ProceduralMrp& mrp, SamplingStrategy strategy) {
    const auto& subset = mrp.reachable();
    if (strategy.mode == SamplingMode::absorbing_restarts) {
        for (StateIndex s : subset)
            if (mrp.is_absorbing(s)) return;
        throw ValidationError("absorbing_restarts requires at least one absorbing state");
    }
    const bool ok = detail::strongly_connected(
        subset, [&](StateIndex s) -> const std::vector<StateIndex>& { return mrp.row(s).targets; },
        [&](StateIndex s) { return mrp.is_absorbing(s); });
    if (!ok) throw ValidationError("single_random_walk requires a chain irreducible on its non-absorbing states");
}

inline SamplingStrategy default_strategy(const ProceduralMrp& mrp) {
    for (StateIndex s : mrp.reachable())
        if (mrp.is_absorbing(s)) return {SamplingMode::absorbing_restarts};
    return {SamplingMode::single_random_walk};
}

} // namespace mcpe
