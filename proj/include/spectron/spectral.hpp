#ifndef SPECTRON_SPECTRAL_HPP
#define SPECTRON_SPECTRAL_HPP

#include <vector>

#include "spectron/matrix.hpp"

namespace spectron {

/// Spectral-norm estimate plus the iteration vector that produced it,
/// returned so callers can warm-start the next call.
struct SpectralEstimate {
    double sigma = 0.0;
    std::vector<double> u;
};

/// Coefficients and iteration count for the odd-polynomial orthogonalizer.
/// The quintic (a, b, c) tuple is tuned so that five applications push
/// singular values into a band around 1 instead of converging slowly to 1.
struct NewtonSchulzConfig {
    int iters = 5;
    double eps = 1e-7;
    double a = 3.4445;
    double b = -4.7750;
    double c = 2.0315;
};

/// Approximate orthogonalization by iterated odd polynomials.
///
/// The input is scaled by 1/(frobenius_norm + eps) so all singular values
/// land in (0, 1], then `iters` rounds of X <- a*X + (b*(X X^T) +
/// c*(X X^T)^2) * X are applied in the wide orientation (tall inputs are
/// transposed in and back out). Maps singular values s to p(p(...p(s)))
/// for the quintic p(s) = a*s + b*s^3 + c*s^5 while leaving singular
/// vectors untouched. For inputs whose normalized singular values exceed
/// about 1e-3, five iterations land every singular value in [0.5, 1.5].
DenseMatrix ortho_newton_schulz(const DenseMatrix& g, const NewtonSchulzConfig& cfg = {});

/// Exact polar-factor orthogonalization u * v^T from the SVD. Reference
/// path for tests; throws std::runtime_error on zero or numerically
/// rank-deficient input (min singular value below 1e-10 * max).
DenseMatrix exact_orthogonalize(const DenseMatrix& g);

/// k rounds of alternating power iteration for the top singular pair,
/// warm-started from u0. The estimate is the Rayleigh quotient u^T W v
/// with unit u, v, so it never exceeds the true spectral norm. A zero
/// matrix (or an iterate that annihilates) yields sigma = 0 with the
/// last vector passed through. Throws if u0 has the wrong length or is
/// the zero vector.
SpectralEstimate power_iter(const DenseMatrix& w, const std::vector<double>& u0, int k);

/// True spectral norm via the SVD oracle. Test/telemetry path only.
double exact_spectral_norm(const DenseMatrix& w);

} // namespace spectron

#endif // SPECTRON_SPECTRAL_HPP
