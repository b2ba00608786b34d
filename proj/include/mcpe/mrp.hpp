#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/linalg.hpp"
#include "mcpe/rng.hpp"
#include "mcpe/value_vector.hpp"

namespace mcpe {

using StateIndex = std::uint64_t;

/// Largest state count the dense direct-solve oracle accepts.
inline constexpr std::size_t kOracleMaxStates = 5000;

/// Tolerance on |row sum - 1| for a stochastic row.
inline constexpr double kRowSumTolerance = 1e-12;

struct TransitionEntry {
    StateIndex target = 0;
    double prob = 0.0;

    friend bool operator==(const TransitionEntry&, const TransitionEntry&) = default;
};

using SparseRow = std::vector<TransitionEntry>;

/// Row-stochastic matrix in compressed sparse row form.
///
/// Each row also stores its running cumulative sum so that a successor can be
/// drawn with one uniform and a binary search.
class TransitionMatrix {
public:
    TransitionMatrix() = default;

    /// Validates and packs sparse rows. Throws ValidationError on a bad index,
    /// probability, duplicate target, or row sum (reporting the worst row).
    explicit TransitionMatrix(const std::vector<SparseRow>& rows) {
        n_ = rows.size();
        if (n_ == 0) throw ValidationError("transition matrix must have at least one state");
        offsets_.reserve(n_ + 1);
        offsets_.push_back(0);
        absorbing_.assign(n_, false);

        std::size_t worst_row = 0;
        double worst_dev = -1.0;
        double worst_sum = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            SparseRow row = rows[i];
            std::sort(row.begin(), row.end(), [](auto& a, auto& b) { return a.target < b.target; });
            double sum = 0.0;
            for (std::size_t k = 0; k < row.size(); ++k) {
                const auto& e = row[k];
                if (e.target >= n_) {
                    std::ostringstream msg;
                    msg << "row " << i << ": target " << e.target << " out of range [0, " << n_ << ")";
                    throw ValidationError(msg.str());
                }
                if (!(e.prob >= 0.0 && e.prob <= 1.0)) {
                    std::ostringstream msg;
                    msg << "row " << i << ": probability " << e.prob << " outside [0, 1]";
                    throw ValidationError(msg.str());
                }
                if (k > 0 && row[k - 1].target == e.target) {
                    std::ostringstream msg;
                    msg << "row " << i << ": duplicate target " << e.target;
                    throw ValidationError(msg.str());
                }
                if (e.prob == 0.0) continue;
                sum += e.prob;
                targets_.push_back(e.target);
                probs_.push_back(e.prob);
                cdf_.push_back(sum);
            }
            offsets_.push_back(targets_.size());
            const double dev = std::abs(sum - 1.0);
            if (dev > worst_dev) {
                worst_dev = dev;
                worst_row = i;
                worst_sum = sum;
            }
            const std::size_t len = offsets_[i + 1] - offsets_[i];
            absorbing_[i] = (len == 1 && targets_[offsets_[i]] == i);
        }
        if (worst_dev > kRowSumTolerance) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "row " << worst_row << " sums to " << worst_sum << " (must be 1 within "
                << kRowSumTolerance << ")";
            throw ValidationError(msg.str());
        }
    }

    /// Builds from a dense row-major matrix; zero entries are dropped.
    static TransitionMatrix from_dense(const std::vector<std::vector<double>>& dense) {
        std::vector<SparseRow> rows(dense.size());
        for (std::size_t i = 0; i < dense.size(); ++i) {
            if (dense[i].size() != dense.size())
                throw ValidationError("dense transition matrix must be square");
            for (std::size_t j = 0; j < dense[i].size(); ++j)
                if (dense[i][j] != 0.0) rows[i].push_back({j, dense[i][j]});
        }
        return TransitionMatrix(rows);
    }

    std::size_t size() const noexcept { return n_; }

    std::span<const StateIndex> targets(StateIndex i) const {
        return {targets_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    std::span<const double> probs(StateIndex i) const {
        return {probs_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    SparseRow row(StateIndex i) const {
        SparseRow out;
        for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) out.push_back({targets_[k], probs_[k]});
        return out;
    }

    bool is_absorbing(StateIndex i) const { return absorbing_[i]; }

    std::vector<StateIndex> absorbing_states() const {
        std::vector<StateIndex> out;
        for (std::size_t i = 0; i < n_; ++i)
            if (absorbing_[i]) out.push_back(i);
        return out;
    }

    std::size_t nonzeros() const noexcept { return targets_.size(); }

    /// Successor of `i` for a uniform draw u in [0, 1).
    StateIndex successor(StateIndex i, double u) const {
        const std::size_t lo = offsets_[i];
        const std::size_t hi = offsets_[i + 1];
        const auto first = cdf_.begin() + static_cast<std::ptrdiff_t>(lo);
        const auto last = cdf_.begin() + static_cast<std::ptrdiff_t>(hi);
        auto it = std::upper_bound(first, last, u * cdf_[hi - 1]);
        if (it == last) --it;
        return targets_[static_cast<std::size_t>(it - cdf_.begin())];
    }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k)
                p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(targets_[k])) = probs_[k];
        return p;
    }

    friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<StateIndex> targets_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
    std::vector<bool> absorbing_;
};

enum class RewardNoise { deterministic, gaussian };

/// Per-state reward distribution: mean r(i) and standard deviation sigma(i).
class RewardModel {
public:
    RewardModel() = default;

    RewardModel(std::vector<double> mean, std::vector<double> stddev) : mean_(std::move(mean)), stddev_(std::move(stddev)) {
        if (stddev_.empty()) stddev_.assign(mean_.size(), 0.0);
        if (stddev_.size() != mean_.size())
            throw ValidationError("reward mean and stddev lengths differ");
        noise_ = RewardNoise::deterministic;
        for (std::size_t i = 0; i < mean_.size(); ++i) {
            if (!std::isfinite(mean_[i])) throw ValidationError("reward mean must be finite");
            if (!(stddev_[i] >= 0.0) || !std::isfinite(stddev_[i]))
                throw ValidationError("reward stddev must be finite and nonnegative");
            if (stddev_[i] > 0.0) noise_ = RewardNoise::gaussian;
        }
    }

    static RewardModel deterministic(std::vector<double> mean) {
        const std::size_t n = mean.size();
        return RewardModel(std::move(mean), std::vector<double>(n, 0.0));
    }

    std::size_t size() const noexcept { return mean_.size(); }
    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& stddev() const noexcept { return stddev_; }
    RewardNoise noise() const noexcept { return noise_; }

    /// Draws a reward for state i. Deterministic rewards consume no randomness.
    double sample(StateIndex i, Rng& rng) const {
        if (noise_ == RewardNoise::deterministic || stddev_[i] == 0.0) return mean_[i];
        return mean_[i] + stddev_[i] * rng.normal();
    }

    friend bool operator==(const RewardModel&, const RewardModel&) = default;

private:
    std::vector<double> mean_;
    std::vector<double> stddev_;
    RewardNoise noise_ = RewardNoise::deterministic;
};

/// A discounted Markov reward process. Immutable once constructed.
class Mrp {
public:
    Mrp(TransitionMatrix transitions, RewardModel rewards, double gamma)
        : transitions_(std::move(transitions)), rewards_(std::move(rewards)), gamma_(gamma) {
        if (!(gamma_ > 0.0 && gamma_ < 1.0)) {
            std::ostringstream msg;
            msg << "gamma " << gamma_ << " outside (0, 1)";
            throw ValidationError(msg.str());
        }
        if (transitions_.size() != rewards_.size()) {
            std::ostringstream msg;
            msg << "dimension mismatch: " << transitions_.size() << " states but " << rewards_.size()
                << " reward entries";
            throw ValidationError(msg.str());
        }
    }

    std::size_t size() const noexcept { return transitions_.size(); }
    const TransitionMatrix& transitions() const noexcept { return transitions_; }
    const RewardModel& rewards() const noexcept { return rewards_; }
    double gamma() const noexcept { return gamma_; }

    // Transition-sampler interface.
    std::size_t state_count() const noexcept { return size(); }
    bool is_absorbing(StateIndex i) const { return transitions_.is_absorbing(i); }
    StateIndex next_state(StateIndex i, Rng& rng) const { return transitions_.successor(i, rng.uniform()); }
    double reward(StateIndex i, Rng& rng) const { return rewards_.sample(i, rng); }
    StateIndex start_state(Rng& rng) const { return rng.below(size()); }
    double mean_reward(StateIndex i) const { return rewards_.mean()[i]; }

    friend bool operator==(const Mrp&, const Mrp&) = default;

private:
    TransitionMatrix transitions_;
    RewardModel rewards_;
    double gamma_;
};

inline Mrp make_mrp(TransitionMatrix transitions, RewardModel rewards, double gamma) {
    return Mrp(std::move(transitions), std::move(rewards), gamma);
}

inline Mrp make_mrp(const std::vector<std::vector<double>>& dense_p, std::vector<double> reward_mean, double gamma) {
    return Mrp(TransitionMatrix::from_dense(dense_p), RewardModel::deterministic(std::move(reward_mean)), gamma);
}

struct RewardRange {
    double lo = 0.0;
    double hi = 1.0;
};

/// Random MRP: each state gets `out_degree` distinct successors drawn uniformly
/// without replacement, with normalized independent uniform weights. Reward
/// means are uniform on `range`; rewards are deterministic unless
/// `reward_stddev` is positive.
inline Mrp random_mrp(std::size_t n, std::size_t out_degree, RewardRange range, RngStream seed, double gamma = 0.8,
                      double reward_stddev = 0.0) {
    if (n == 0) throw ValidationError("random_mrp: n must be positive");
    if (out_degree == 0 || out_degree > n) {
        std::ostringstream msg;
        msg << "random_mrp: out_degree " << out_degree << " must lie in [1, n=" << n << "]";
        throw ValidationError(msg.str());
    }
    Rng rng(seed);
    std::vector<StateIndex> pool(n);
    std::iota(pool.begin(), pool.end(), StateIndex{0});
    std::vector<SparseRow> rows(n);
    std::vector<double> weights(out_degree);
    for (std::size_t i = 0; i < n; ++i) {
        // Partial Fisher-Yates: the first out_degree slots become a uniform subset.
        for (std::size_t k = 0; k < out_degree; ++k) {
            const std::size_t j = k + rng.below(n - k);
            std::swap(pool[k], pool[j]);
        }
        double total = 0.0;
        for (std::size_t k = 0; k < out_degree; ++k) {
            weights[k] = 1.0 - rng.uniform(); // (0, 1]
            total += weights[k];
        }
        auto& row = rows[i];
        row.reserve(out_degree);
        for (std::size_t k = 0; k < out_degree; ++k) row.push_back({pool[k], weights[k] / total});
    }
    std::vector<double> mean(n);
    for (auto& r : mean) r = rng.uniform(range.lo, range.hi);
    return Mrp(TransitionMatrix(rows), RewardModel(std::move(mean), std::vector<double>(n, reward_stddev)), gamma);
}

/// True values: solves (I - gamma P) v = r by dense LU with partial pivoting.
inline ValueVector exact_value(const Mrp& mrp) {
    const std::size_t n = mrp.size();
    if (n > kOracleMaxStates) {
        std::ostringstream msg;
        msg << "exact_value: " << n << " states exceeds the dense oracle limit of " << kOracleMaxStates;
        throw ValidationError(msg.str());
    }
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(ni, ni) - mrp.gamma() * mrp.transitions().to_dense();
    const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(mrp.rewards().mean().data(), ni);
    Eigen::VectorXd v;
    try {
        v = solve_dense(a, r);
    } catch (const SingularMatrixError& e) {
        throw SingularMatrixError(std::string("exact_value: internal error, ") + e.what());
    }
    return ValueVector::dense(std::vector<double>(v.data(), v.data() + v.size()));
}

/// max_i |((I - gamma P) v - r)_i|
inline double bellman_residual(const Mrp& mrp, std::span<const double> v) {
    double worst = 0.0;
    for (StateIndex i = 0; i < mrp.size(); ++i) {
        double pv = 0.0;
        const auto t = mrp.transitions().targets(i);
        const auto p = mrp.transitions().probs(i);
        for (std::size_t k = 0; k < t.size(); ++k) pv += p[k] * v[t[k]];
        worst = std::max(worst, std::abs(v[i] - mrp.gamma() * pv - mrp.rewards().mean()[i]));
    }
    return worst;
}

struct Step {
    StateIndex next_state;
    double reward;
};

/// One transition from `state`: the successor is drawn first, then the reward.
inline Step sample_step(const Mrp& mrp, StateIndex state, Rng& rng) {
    if (state >= mrp.size()) throw ValidationError("sample_step: state out of range");
    const StateIndex next = mrp.next_state(state, rng);
    return {next, mrp.reward(state, rng)};
}

} // namespace mcpe
