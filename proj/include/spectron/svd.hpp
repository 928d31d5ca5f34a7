#ifndef SPECTRON_SVD_HPP
#define SPECTRON_SVD_HPP

#include <vector>

#include "spectron/matrix.hpp"

namespace spectron {

/// Thin singular value decomposition a = u * diag(s) * v^T with
/// k = min(rows, cols) columns in u and v.
struct SvdResult {
    DenseMatrix u;          ///< rows x k, orthonormal columns
    std::vector<double> s;  ///< k singular values, descending, non-negative
    DenseMatrix v;          ///< cols x k, orthonormal columns

    /// u * diag(s) * v^T, for reconstruction checks.
    DenseMatrix reconstruct() const;
};

/// Exact SVD by one-sided Jacobi rotations. Reference implementation for
/// tests and telemetry -- accurate and deterministic, not fast. Orthonormal
/// columns are guaranteed even for rank-deficient or zero input (missing
/// directions are filled with an orthonormal completion). Throws
/// std::runtime_error if the sweep limit is exhausted before convergence.
SvdResult svd_oracle(const DenseMatrix& a);

} // namespace spectron

#endif // SPECTRON_SVD_HPP
