#pragma once

#include <Eigen/Dense>

#include <span>
#include <sstream>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/features.hpp"
#include "mcpe/linalg.hpp"
#include "mcpe/sampling.hpp"

namespace mcpe {

/// Sampled realization of Phi^T (I - gamma P) Phi w = Phi^T r with
/// eligibility vector z.
struct LstdAccumulators {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::VectorXd z;

    explicit LstdAccumulators(std::size_t k)
        : a(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))),
          b(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k))),
          z(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k))) {}
};

struct LstdEstimate {
    WeightVector weights;
    LstdAccumulators acc;

    double value(const FeatureMatrix& phi, StateIndex s) const { return weights.value(phi, s); }
};

namespace detail {

inline Eigen::VectorXd solve_full_rank(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const char* who) {
    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(a);
    const auto rank = rank_check.rank();
    if (rank < a.cols()) {
        std::ostringstream msg;
        msg << who << ": system is rank deficient (rank " << rank << " of " << a.cols()
            << "); reduce the feature count or extend sampling";
        throw RankDeficientError(msg.str(), static_cast<long>(rank), static_cast<long>(a.cols()));
    }
    try {
        return solve_dense(a, b);
    } catch (const SingularMatrixError&) {
        std::ostringstream msg;
        msg << who << ": zero pivot in a system of nominal rank " << rank;
        throw RankDeficientError(msg.str(), static_cast<long>(rank), static_cast<long>(a.cols()));
    }
}

} // namespace detail

/// LSTD(lambda). Per step (s -> s', reward r):
///   z = gamma lambda z + phi(s);  A += z (phi(s) - gamma phi(s'))^T;  b += z r.
/// z is cleared after a trajectory end. The absorbing successor's own feature
/// row is used as phi(s') with no special casing. Solves A w = b.
inline LstdEstimate lstd_evaluate(std::span<const StepRecord> stream, const FeatureMatrix& features, double gamma,
                                  double lambda) {
    if (stream.empty()) throw ValidationError("lstd_evaluate: empty stream");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("lstd_evaluate: gamma outside (0, 1)");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lstd_evaluate: lambda outside [0, 1]");
    const std::size_t k = features.k();
    const auto ki = static_cast<Eigen::Index>(k);
    LstdAccumulators acc(k);
    Eigen::VectorXd phi(ki), phi_next(ki), diff(ki);
    const double decay = gamma * lambda;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const StepRecord& step = stream[t];
        // Consecutive records chain inside a trajectory, so phi(s') is reused as the next phi(s).
        if (t == 0 || stream[t - 1].next_state != step.state)
            features.row(step.state, std::span<double>(phi.data(), k));
        else
            phi.swap(phi_next);
        features.row(step.next_state, std::span<double>(phi_next.data(), k));
        acc.z = decay * acc.z + phi;
        diff = phi - gamma * phi_next;
        acc.a.noalias() += acc.z * diff.transpose();
        acc.b += step.reward * acc.z;
        if (step.is_trajectory_end) acc.z.setZero();
    }
    const Eigen::VectorXd w = detail::solve_full_rank(acc.a, acc.b, "lstd_evaluate");
    return {WeightVector{std::vector<double>(w.data(), w.data() + w.size())}, std::move(acc)};
}

} // namespace mcpe
