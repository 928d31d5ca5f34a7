#include "spectron/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spectron {

DenseMatrix SvdResult::reconstruct() const {
    DenseMatrix us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s[j];
    return matmul_t(us, false, v, true);
}

namespace {

// One-sided Jacobi (Hestenes): rotate column pairs of the working copy of A
// until all pairs are orthogonal; singular values are then column norms and
// V accumulates the rotations.
struct JacobiResult {
    DenseMatrix w; // rotated copy of A, columns mutually orthogonal
    DenseMatrix v; // accumulated rotations, exactly orthogonal product
};

JacobiResult hestenes_sweep(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    JacobiResult r{a, DenseMatrix::identity(n)};
    const double tol = 1e-15;
    const int max_sweeps = 60;

    double worst = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        worst = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = r.w(i, p);
                    const double xq = r.w(i, q);
                    app += xp * xp;
                    aqq += xq * xq;
                    apq += xp * xq;
                }
                if (app == 0.0 || aqq == 0.0) continue;
                const double rel = std::abs(apq) / std::sqrt(app * aqq);
                worst = std::max(worst, rel);
                if (rel <= tol) continue;

                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = r.w(i, p);
                    const double xq = r.w(i, q);
                    r.w(i, p) = cs * xp - sn * xq;
                    r.w(i, q) = sn * xp + cs * xq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = r.v(i, p);
                    const double vq = r.v(i, q);
                    r.v(i, p) = cs * vp - sn * vq;
                    r.v(i, q) = sn * vp + cs * vq;
                }
                rotated = true;
            }
        }
        if (!rotated) return r;
    }
    throw std::runtime_error("svd_oracle: Jacobi sweeps did not converge for " + shape_str(a) +
                             " (worst off-diagonal " + std::to_string(worst) + ")");
}

// Orthonormal completion: replace column j of u with a unit vector orthogonal
// to every other column. Candidates are standard basis vectors; the one with
// the largest residual after projection wins, which is deterministic.
void fill_orthonormal_column(DenseMatrix& u, std::size_t j) {
    const std::size_t m = u.rows();
    const std::size_t k = u.cols();
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
        std::vector<double> w(m, 0.0);
        w[cand] = 1.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (c == j) continue;
            double proj = 0.0;
            for (std::size_t i = 0; i < m; ++i) proj += w[i] * u(i, c);
            for (std::size_t i = 0; i < m; ++i) w[i] -= proj * u(i, c);
        }
        const double nw = norm2(w);
        if (nw > best_norm) {
            best_norm = nw;
            best = std::move(w);
        }
        if (best_norm > 0.9) break; // good enough, keep the scan deterministic
    }
    if (best_norm <= 0.0)
        throw std::runtime_error("svd_oracle: failed to complete orthonormal basis");
    // One re-orthogonalization pass tightens the result to working precision.
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < k; ++c) {
            if (c == j) continue;
            double proj = 0.0;
            for (std::size_t i = 0; i < m; ++i) proj += best[i] * u(i, c);
            for (std::size_t i = 0; i < m; ++i) best[i] -= proj * u(i, c);
        }
        const double nw = norm2(best);
        for (double& x : best) x /= nw;
    }
    for (std::size_t i = 0; i < m; ++i) u(i, j) = best[i];
}

SvdResult svd_tall(const DenseMatrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    JacobiResult jr = hestenes_sweep(a);

    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += jr.w(i, j) * jr.w(i, j);
        norms[j] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    SvdResult out;
    out.s.resize(n);
    out.u = DenseMatrix(m, n);
    out.v = DenseMatrix(n, n);
    const double sigma_max = norms[order[0]];
    const double cutoff = sigma_max * static_cast<double>(std::max(m, n)) * 1e-14;

    std::vector<std::size_t> deficient;
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        out.s[j] = norms[src];
        for (std::size_t i = 0; i < n; ++i) out.v(i, j) = jr.v(i, src);
        if (norms[src] > cutoff && norms[src] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, j) = jr.w(i, src) / norms[src];
        } else {
            deficient.push_back(j);
        }
    }
    for (std::size_t j : deficient) fill_orthonormal_column(out.u, j);
    return out;
}

} // namespace

SvdResult svd_oracle(const DenseMatrix& a) {
    if (a.rows() == 0 || a.cols() == 0)
        throw std::invalid_argument("svd_oracle: empty matrix");
    if (a.rows() >= a.cols()) return svd_tall(a);
    // Wide input: decompose the transpose and swap the roles of u and v.
    SvdResult t = svd_tall(transpose(a));
    SvdResult out;
    out.u = std::move(t.v);
    out.v = std::move(t.u);
    out.s = std::move(t.s);
    return out;
}

} // namespace spectron
