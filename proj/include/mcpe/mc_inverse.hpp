#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/mrp.hpp"
#include "mcpe/rng.hpp"

// Random-walk estimation of entries of (I - M)^{-1}.
//
// M is split elementwise as M = P' o V, where P' is substochastic (row sums
// p_i < 1). A walk from i moves to k with probability P'_ik and stops with
// probability 1 - p_i. Its weight is the product of the V entries along the
// traversed edges divided by (1 - p_terminal). The expected weight credited
// to terminal j equals ((I - M)^{-1})_ij.

namespace mcpe {

struct SplitEntry {
    StateIndex target = 0;
    double prob = 0.0;  // P'_ik
    double value = 1.0; // V_ik
};

/// Substochastic walk matrix P' paired entry-for-entry with weights V.
class SplitMatrix {
public:
    SplitMatrix() = default;

    explicit SplitMatrix(const std::vector<std::vector<SplitEntry>>& rows) {
        n_ = rows.size();
        offsets_.push_back(0);
        for (std::size_t i = 0; i < n_; ++i) {
            double sum = 0.0;
            for (const auto& e : rows[i]) {
                if (e.target >= n_) throw ValidationError("split row " + std::to_string(i) + ": target out of range");
                if (!(e.prob >= 0.0) || !std::isfinite(e.value))
                    throw ValidationError("split row " + std::to_string(i) + ": invalid entry");
                if (e.prob == 0.0) continue;
                sum += e.prob;
                entries_.push_back(e);
                cdf_.push_back(sum);
            }
            if (!(sum < 1.0)) {
                std::ostringstream msg;
                msg.precision(17);
                msg << "split row " << i << " has walk probability sum " << sum << " (must be < 1)";
                throw ValidationError(msg.str());
            }
            offsets_.push_back(entries_.size());
            row_sum_.push_back(sum);
        }
    }

    std::size_t size() const noexcept { return n_; }

    /// p_i = sum_j P'_ij
    double continue_prob(StateIndex i) const { return row_sum_[i]; }

    std::span<const SplitEntry> row(StateIndex i) const {
        return {entries_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    /// Reconstructs M = P' o V densely.
    Eigen::MatrixXd product() const {
        const auto n = static_cast<Eigen::Index>(n_);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (std::size_t i = 0; i < n_; ++i)
            for (const auto& e : row(i))
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.target)) += e.prob * e.value;
        return m;
    }

    /// Index into row(i) chosen by a uniform draw u, or -1 for stop.
    std::ptrdiff_t choose(StateIndex i, double u) const {
        const std::size_t lo = offsets_[i];
        const std::size_t hi = offsets_[i + 1];
        if (lo == hi || u >= cdf_[hi - 1]) return -1;
        const auto first = cdf_.begin() + static_cast<std::ptrdiff_t>(lo);
        const auto last = cdf_.begin() + static_cast<std::ptrdiff_t>(hi);
        return std::upper_bound(first, last, u) - first;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<SplitEntry> entries_;
    std::vector<double> cdf_;
    std::vector<double> row_sum_;
};

/// P'_ij = |M_ij|, V_ij = sign(M_ij). Requires sum_j |M_ij| < 1 for every row.
inline SplitMatrix default_split(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ValidationError("default_split: matrix must be square");
    std::vector<std::vector<SplitEntry>> rows(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double abs_sum = m.row(i).cwiseAbs().sum();
        if (!(abs_sum < 1.0)) {
            std::ostringstream msg;
            msg.precision(17);
            msg << "default_split: row " << i << " has absolute sum " << abs_sum
                << " (must be < 1; supply a custom split)";
            throw ValidationError(msg.str());
        }
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const double x = m(i, j);
            if (x != 0.0)
                rows[static_cast<std::size_t>(i)].push_back(
                    {static_cast<StateIndex>(j), std::abs(x), x > 0.0 ? 1.0 : -1.0});
        }
    }
    return SplitMatrix(rows);
}

/// P' = gamma P with all V = 1, the split of (I - gamma P) used for value estimation.
inline SplitMatrix discounted_split(const TransitionMatrix& p, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("discounted_split: gamma outside (0, 1)");
    std::vector<std::vector<SplitEntry>> rows(p.size());
    for (StateIndex i = 0; i < p.size(); ++i) {
        const auto t = p.targets(i);
        const auto pr = p.probs(i);
        for (std::size_t k = 0; k < t.size(); ++k) rows[i].push_back({t[k], gamma * pr[k], 1.0});
    }
    return SplitMatrix(rows);
}

inline SplitMatrix discounted_split(const Mrp& mrp) { return discounted_split(mrp.transitions(), mrp.gamma()); }

struct WalkOutcome {
    StateIndex start = 0;
    StateIndex terminal = 0;
    double weight = 1.0;
    std::uint64_t length = 0;
};

/// One terminating walk. A single uniform per step selects either a successor
/// or the stop event. A walk with no transitions has an empty product, so its
/// weight is 1 / (1 - p_start).
inline WalkOutcome run_walk(const SplitMatrix& split, StateIndex start, Rng& rng) {
    WalkOutcome out{start, start, 1.0, 0};
    StateIndex cur = start;
    double product = 1.0;
    for (;;) {
        const std::ptrdiff_t k = split.choose(cur, rng.uniform());
        if (k < 0) break;
        const auto& e = split.row(cur)[static_cast<std::size_t>(k)];
        product *= e.value;
        cur = e.target;
        ++out.length;
    }
    out.terminal = cur;
    out.weight = product / (1.0 - split.continue_prob(cur));
    return out;
}

struct EntryEstimate {
    double mean = 0.0;
    double variance = 0.0; // sample variance of the per-walk statistic
    double std_error = 0.0;
    std::uint64_t walks = 0;
};

/// Mean, variance and standard error of weight * [terminal == j] over walks from i.
inline EntryEstimate estimate_entry_stats(const SplitMatrix& split, StateIndex i, StateIndex j,
                                          std::uint64_t num_walks, Rng& rng) {
    if (num_walks == 0) throw ValidationError("estimate_entry: num_walks must be positive");
    if (i >= split.size() || j >= split.size()) throw ValidationError("estimate_entry: index out of range");
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::uint64_t w = 0; w < num_walks; ++w) {
        const WalkOutcome o = run_walk(split, i, rng);
        if (o.terminal == j) {
            sum += o.weight;
            sumsq += o.weight * o.weight;
        }
    }
    EntryEstimate e;
    e.walks = num_walks;
    const double nw = static_cast<double>(num_walks);
    e.mean = sum / nw;
    if (num_walks > 1) e.variance = std::max(0.0, (sumsq - nw * e.mean * e.mean) / (nw - 1.0));
    e.std_error = std::sqrt(e.variance / nw);
    return e;
}

/// Unbiased estimate of ((I - M)^{-1})_ij from num_walks walks.
inline double estimate_entry(const SplitMatrix& split, StateIndex i, StateIndex j, std::uint64_t num_walks, Rng& rng) {
    return estimate_entry_stats(split, i, j, num_walks, rng).mean;
}

struct RowEstimate {
    std::vector<double> mean;
    std::vector<double> variance;
    std::uint64_t walks = 0;
    std::uint64_t total_length = 0;
};

/// Estimates a whole row from one set of walks started at i.
inline RowEstimate estimate_row_stats(const SplitMatrix& split, StateIndex i, std::uint64_t num_walks, Rng& rng) {
    if (num_walks == 0) throw ValidationError("estimate_row: num_walks must be positive");
    if (i >= split.size()) throw ValidationError("estimate_row: index out of range");
    const std::size_t n = split.size();
    std::vector<double> sum(n, 0.0), sumsq(n, 0.0);
    RowEstimate out;
    for (std::uint64_t w = 0; w < num_walks; ++w) {
        const WalkOutcome o = run_walk(split, i, rng);
        sum[o.terminal] += o.weight;
        sumsq[o.terminal] += o.weight * o.weight;
        out.total_length += o.length;
    }
    const double nw = static_cast<double>(num_walks);
    out.walks = num_walks;
    out.mean.resize(n);
    out.variance.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        out.mean[j] = sum[j] / nw;
        if (num_walks > 1) out.variance[j] = std::max(0.0, (sumsq[j] - nw * out.mean[j] * out.mean[j]) / (nw - 1.0));
    }
    return out;
}

inline std::vector<double> estimate_row(const SplitMatrix& split, StateIndex i, std::uint64_t num_walks, Rng& rng) {
    return estimate_row_stats(split, i, num_walks, rng).mean;
}

struct NeumannResult {
    Eigen::MatrixXd inverse;
    int terms = 0; // K: the sum covers powers 0..K
};

/// Partial Neumann sum sum_{k=0}^{K} M^k, stopping at the first K whose tail
/// bound ||M^{K+1}||_inf / (1 - ||M||_inf) is at most tol.
inline NeumannResult neumann_reference(const Eigen::MatrixXd& m, double tol) {
    if (m.rows() != m.cols()) throw ValidationError("neumann_reference: matrix must be square");
    const double norm = m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(norm < 1.0)) {
        std::ostringstream msg;
        msg << "neumann_reference: ||M||_inf = " << norm << " must be < 1";
        throw ValidationError(msg.str());
    }
    const auto n = m.rows();
    NeumannResult out{Eigen::MatrixXd::Identity(n, n), 0};
    Eigen::MatrixXd power = m;
    const double scale = 1.0 / (1.0 - norm);
    for (;;) {
        const double tail = n == 0 ? 0.0 : power.cwiseAbs().rowwise().sum().maxCoeff() * scale;
        if (tail <= tol) break;
        out.inverse += power;
        ++out.terms;
        power = power * m;
    }
    return out;
}

} // namespace mcpe
