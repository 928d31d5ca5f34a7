#include "spectron/spectral.hpp"

#include <cmath>
#include <stdexcept>

#include "spectron/svd.hpp"

namespace spectron {

DenseMatrix ortho_newton_schulz(const DenseMatrix& g, const NewtonSchulzConfig& cfg) {
    if (g.rows() == 0 || g.cols() == 0)
        throw std::invalid_argument("ortho_newton_schulz: empty matrix");
    const bool transposed = g.rows() > g.cols();
    DenseMatrix x = transposed ? transpose(g) : g;
    const double s = 1.0 / (frobenius_norm(x) + cfg.eps);
    x = scale(x, s);

    // Wide orientation: the Gram matrix X X^T is square on the short side,
    // and a*X + (b*G + c*G^2) * X applies the quintic to the singular values.
    for (int i = 0; i < cfg.iters; ++i) {
        DenseMatrix gram = matmul_t(x, false, x, true);
        DenseMatrix poly = add(scale(gram, cfg.b), scale(matmul(gram, gram), cfg.c));
        x = add(scale(x, cfg.a), matmul(poly, x));
    }
    return transposed ? transpose(x) : x;
}

DenseMatrix exact_orthogonalize(const DenseMatrix& g) {
    SvdResult svd = svd_oracle(g);
    const double smax = svd.s.front();
    const double smin = svd.s.back();
    if (smax == 0.0)
        throw std::runtime_error("exact_orthogonalize: zero matrix has no polar factor");
    if (smin < 1e-10 * smax)
        throw std::runtime_error("exact_orthogonalize: rank-deficient input (sigma_min/sigma_max = " +
                                 std::to_string(smin / smax) + ")");
    return matmul_t(svd.u, false, svd.v, true);
}

SpectralEstimate power_iter(const DenseMatrix& w, const std::vector<double>& u0, int k) {
    if (u0.size() != w.rows())
        throw std::invalid_argument("power_iter: u0 length " + std::to_string(u0.size()) +
                                    " does not match rows of " + shape_str(w));
    const double n0 = norm2(u0);
    if (n0 == 0.0) throw std::invalid_argument("power_iter: u0 is the zero vector");
    if (k < 1) throw std::invalid_argument("power_iter: k must be >= 1");

    const std::size_t m = w.rows();
    const std::size_t n = w.cols();
    std::vector<double> u(m), v(n);
    for (std::size_t i = 0; i < m; ++i) u[i] = u0[i] / n0;

    double sigma = 0.0;
    for (int it = 0; it < k; ++it) {
        // v <- normalize(W^T u)
        for (std::size_t j = 0; j < n; ++j) v[j] = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double ui = u[i];
            if (ui == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) v[j] += w(i, j) * ui;
        }
        const double nv = norm2(v);
        if (nv == 0.0) return SpectralEstimate{0.0, u};
        for (double& x : v) x /= nv;

        // u <- normalize(W v); the pre-normalization norm is the Rayleigh
        // quotient u^T W v for the updated u, which lower-bounds sigma_max.
        std::vector<double> wu(m);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += w(i, j) * v[j];
            wu[i] = acc;
        }
        const double nu = norm2(wu);
        if (nu == 0.0) return SpectralEstimate{0.0, u};
        for (std::size_t i = 0; i < m; ++i) u[i] = wu[i] / nu;
        sigma = nu;
    }
    return SpectralEstimate{sigma, u};
}

double exact_spectral_norm(const DenseMatrix& w) {
    return svd_oracle(w).s.front();
}

} // namespace spectron
