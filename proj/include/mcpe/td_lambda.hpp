#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mcpe/error.hpp"
#include "mcpe/sampling.hpp"
#include "mcpe/value_vector.hpp"

namespace mcpe {

/// Step-size rule for TD. `fixed` uses alpha every step; `harmonic` uses
/// alpha / k on the k-th processed step (k starting at 1).
struct AlphaSchedule {
    enum class Kind { fixed, harmonic };
    Kind kind = Kind::fixed;
    double alpha = 0.5;

    static AlphaSchedule fixed(double a) { return {Kind::fixed, a}; }
    static AlphaSchedule harmonic(double a0 = 1.0) { return {Kind::harmonic, a0}; }

    double at(std::uint64_t k) const { return kind == Kind::fixed ? alpha : alpha / static_cast<double>(k); }
};

/// Online TD(lambda) with accumulating eligibility traces.
///
/// Per step (n -> m, reward r):
///   delta = r + gamma v(m) - v(n);  e(n) += 1;
///   for every state l: v(l) += alpha delta e(l);  e(l) *= gamma lambda.
/// Traces are cleared after a record flagged as a trajectory end, and traces
/// that decay below the smallest normal double are flushed to zero. Estimates
/// start at zero.
class TdLambda {
public:
    TdLambda(std::size_t n, double gamma, double lambda, AlphaSchedule schedule)
        : estimates_(n), traces_(n, 0.0), gamma_(gamma), lambda_(lambda), schedule_(schedule) {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("td_lambda: gamma outside (0, 1)");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("td_lambda: lambda outside [0, 1]");
        if (!(schedule.alpha > 0.0 && schedule.alpha <= 1.0)) throw ValidationError("td_lambda: alpha outside (0, 1]");
    }

    void observe(const StepRecord& step) {
        auto& v = estimates_.values;
        const double alpha = schedule_.at(++steps_);
        delta_last_ = step.reward + gamma_ * v[step.next_state] - v[step.state];
        traces_[step.state] += 1.0;
        estimates_.visited[step.state] = true;
        const double decay = gamma_ * lambda_;
        const double scaled = alpha * delta_last_;
        for (std::size_t l = 0; l < v.size(); ++l) {
            v[l] += scaled * traces_[l];
            traces_[l] *= decay;
            if (traces_[l] < kTiny) traces_[l] = 0.0;
        }
        if (step.is_trajectory_end) std::fill(traces_.begin(), traces_.end(), 0.0);
    }

    const ValueVector& estimates() const noexcept { return estimates_; }
    const std::vector<double>& traces() const noexcept { return traces_; }
    double delta_last() const noexcept { return delta_last_; }
    std::uint64_t steps() const noexcept { return steps_; }

private:
    static constexpr double kTiny = std::numeric_limits<double>::min();

    ValueVector estimates_;
    std::vector<double> traces_;
    double gamma_;
    double lambda_;
    AlphaSchedule schedule_;
    double delta_last_ = 0.0;
    std::uint64_t steps_ = 0;
};

inline ValueVector td_lambda(std::span<const StepRecord> stream, std::size_t n, double gamma, double lambda,
                             AlphaSchedule schedule) {
    check_stream(stream, n);
    TdLambda td(n, gamma, lambda, schedule);
    for (const auto& s : stream) td.observe(s);
    return td.estimates();
}

} // namespace mcpe
