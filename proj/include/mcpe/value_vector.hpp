#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mcpe/error.hpp"

namespace mcpe {

/// State values, true or estimated. `visited[i]` is true where an estimate exists.
struct ValueVector {
    std::vector<double> values;
    std::vector<bool> visited;

    ValueVector() = default;
    explicit ValueVector(std::size_t n, double fill = 0.0) : values(n, fill), visited(n, false) {}

    /// A fully defined vector, e.g. an oracle solution.
    static ValueVector dense(std::vector<double> v) {
        ValueVector out;
        out.visited.assign(v.size(), true);
        out.values = std::move(v);
        return out;
    }

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    std::size_t visited_count() const noexcept {
        std::size_t c = 0;
        for (bool b : visited) c += b ? 1 : 0;
        return c;
    }
};

/// ||v_est - v_true||_2 / ||v_true||_2 over all states.
/// Entries of v_est without an estimate count as 0.
inline double rel_residual_error(const ValueVector& v_est, const ValueVector& v_true) {
    if (v_est.size() != v_true.size())
        throw ValidationError("rel_residual_error: length mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < v_true.size(); ++i) {
        const double est = v_est.visited[i] ? v_est.values[i] : 0.0;
        const double d = est - v_true.values[i];
        num += d * d;
        den += v_true.values[i] * v_true.values[i];
    }
    if (den == 0.0) throw ValidationError("rel_residual_error: true value vector has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

} // namespace mcpe
