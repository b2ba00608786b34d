#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/features.hpp"
#include "mcpe/lstd.hpp"
#include "mcpe/mcmi.hpp"

namespace mcpe {

struct FitResult {
    WeightVector weights;
    Eigen::VectorXd residual; // v_M - Phi_M w
    long rank = 0;
};

/// Least-squares weights min_w || D^{1/2} (Phi_M w - v_M) ||_2 through the
/// normal equations (Phi_M^T D Phi_M) w = Phi_M^T D v_M. D is the identity
/// unless `row_weights` is given.
inline FitResult fit_weights(const Eigen::MatrixXd& phi_m, const Eigen::VectorXd& v_m,
                             const std::optional<Eigen::VectorXd>& row_weights = std::nullopt) {
    if (phi_m.rows() != v_m.size()) throw ValidationError("fit_weights: Phi_M rows and v_M length differ");
    if (row_weights && row_weights->size() != v_m.size()) throw ValidationError("fit_weights: weight length mismatch");
    const Eigen::Index k = phi_m.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi_m);
    const long rank = phi_m.rows() == 0 ? 0 : static_cast<long>(qr.rank());
    if (rank < k) {
        std::ostringstream msg;
        msg << "fit_weights: feature rows of visited states have effective rank " << rank << " < k = " << k;
        throw RankDeficientError(msg.str(), rank, static_cast<long>(k));
    }
    Eigen::MatrixXd gram;
    Eigen::VectorXd rhs;
    if (row_weights) {
        gram = phi_m.transpose() * row_weights->asDiagonal() * phi_m;
        rhs = phi_m.transpose() * row_weights->cwiseProduct(v_m);
    } else {
        gram = phi_m.transpose() * phi_m;
        rhs = phi_m.transpose() * v_m;
    }
    const Eigen::VectorXd w = detail::solve_full_rank(gram, rhs, "fit_weights");
    FitResult out;
    out.weights.w.assign(w.data(), w.data() + w.size());
    out.residual = v_m - phi_m * w;
    out.rank = rank;
    return out;
}

struct LsMcmiOptions {
    /// When positive, states with fewer than this many sub-walk starts are
    /// down-weighted in the fit by s(n) / floor. Zero disables weighting.
    double start_floor = 0.0;
};

struct LsMcmiEstimate {
    WeightVector weights;
    VisitedSet visited;
    std::vector<double> v_m;          // MCMI estimate per visited position
    std::vector<std::uint64_t> starts; // s(n) per visited position
    Eigen::VectorXd residual;
    WalkStats stats;

    double value(const FeatureMatrix& phi, StateIndex s) const { return weights.value(phi, s); }
};

/// Least-squares MCMI. Phase 1 runs the MCMI walks with accumulators keyed by
/// the visited set, so storage is proportional to the m states touched.
/// Phase 2 fits feature weights to the visited-state estimates.
template <TransitionSampler S>
LsMcmiEstimate ls_mcmi_evaluate(const S& sampler, const FeatureMatrix& features, double gamma,
                                std::uint64_t total_steps, Rng& rng, LsMcmiOptions options = {}) {
    detail::check_gamma(gamma, "ls_mcmi_evaluate");
    if (total_steps == 0) throw ValidationError("ls_mcmi_evaluate: total_steps must be positive");
    LsMcmiEstimate out;
    WalkAccumulators acc;
    std::vector<std::size_t> absorbing;
    out.stats = detail::run_mcmi_walks(sampler, gamma, total_steps, rng, out.visited, acc, absorbing, NoWalkObserver{});

    const std::size_t m = out.visited.size();
    acc.ensure(m);
    out.v_m.assign(m, 0.0);
    out.starts.assign(acc.s.begin(), acc.s.begin() + static_cast<std::ptrdiff_t>(m));
    for (std::size_t p = 0; p < m; ++p)
        if (acc.s[p] > 0) out.v_m[p] = acc.v[p] / ((1.0 - gamma) * static_cast<double>(acc.s[p]));
    std::vector<bool> is_abs(m, false);
    for (std::size_t p : absorbing) {
        out.v_m[p] = sampler.mean_reward(out.visited.state(p)) / (1.0 - gamma);
        is_abs[p] = true;
    }

    const std::size_t k = features.k();
    Eigen::MatrixXd phi_m(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    std::vector<double> buf(k);
    for (std::size_t p = 0; p < m; ++p) {
        features.row(out.visited.state(p), buf);
        for (std::size_t j = 0; j < k; ++j) phi_m(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = buf[j];
    }
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(out.v_m.data(), static_cast<Eigen::Index>(m));

    std::optional<Eigen::VectorXd> weights;
    if (options.start_floor > 0.0) {
        weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
        for (std::size_t p = 0; p < m; ++p)
            if (!is_abs[p])
                (*weights)[static_cast<Eigen::Index>(p)] =
                    std::min(1.0, static_cast<double>(acc.s[p]) / options.start_floor);
    }
    FitResult fit = fit_weights(phi_m, v, weights);
    out.weights = std::move(fit.weights);
    out.residual = std::move(fit.residual);
    return out;
}

} // namespace mcpe
