#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "mcpe/error.hpp"

namespace mcpe {

/// Solves A x = b by LU elimination with partial pivoting.
/// Throws SingularMatrixError when elimination meets a zero pivot.
inline Eigen::VectorXd solve_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    if (a.rows() != a.cols() || a.rows() != b.size())
        throw ValidationError("solve_dense: dimension mismatch");
    if (a.rows() == 0) return Eigen::VectorXd();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const auto diag = lu.matrixLU().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
        if (diag[i] == 0.0 || !std::isfinite(diag[i]))
            throw SingularMatrixError("zero pivot at elimination step " + std::to_string(i));
    }
    return lu.solve(b);
}

} // namespace mcpe
