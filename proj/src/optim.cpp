#include "spectron/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace spectron {

std::string variant_name(OptimizerVariant v) {
    switch (v) {
    case OptimizerVariant::Spectron: return "spectron";
    case OptimizerVariant::OrthoOnly: return "ortho_only";
    case OptimizerVariant::SpecNormOnly: return "specnorm_only";
    case OptimizerVariant::NaiveMomentum: return "naive_momentum";
    case OptimizerVariant::AdaptiveMoments: return "adaptive_moments";
    }
    throw std::logic_error("variant_name: unknown variant");
}

OptimizerVariant parse_variant(const std::string& name) {
    if (name == "spectron") return OptimizerVariant::Spectron;
    if (name == "ortho_only") return OptimizerVariant::OrthoOnly;
    if (name == "specnorm_only") return OptimizerVariant::SpecNormOnly;
    if (name == "naive_momentum") return OptimizerVariant::NaiveMomentum;
    if (name == "adaptive_moments") return OptimizerVariant::AdaptiveMoments;
    throw std::invalid_argument("unknown optimizer variant '" + name +
                                "' (expected spectron, ortho_only, specnorm_only, "
                                "naive_momentum, or adaptive_moments)");
}

SpectronState SpectronState::init(const FactorizedWeight& w, Rng& rng) {
    SpectronState s;
    s.m_a = DenseMatrix(w.a.rows(), w.a.cols());
    s.m_b = DenseMatrix(w.b.rows(), w.b.cols());
    s.v_a = DenseMatrix(w.a.rows(), w.a.cols());
    s.v_b = DenseMatrix(w.b.rows(), w.b.cols());
    Rng ra = rng.split("power_u_a");
    Rng rb = rng.split("power_u_b");
    Rng rma = rng.split("power_u_ma");
    Rng rmb = rng.split("power_u_mb");
    auto unit_gaussian = [](Rng& r, std::size_t n) {
        std::vector<double> u(n);
        for (double& x : u) x = r.gaussian();
        const double nu = norm2(u);
        if (nu > 0.0)
            for (double& x : u) x /= nu;
        else
            u[0] = 1.0;
        return u;
    };
    s.u_a = unit_gaussian(ra, w.a.rows());
    s.u_b = unit_gaussian(rb, w.b.rows());
    s.u_ma = unit_gaussian(rma, w.a.rows());
    s.u_mb = unit_gaussian(rmb, w.b.rows());
    return s;
}

double rho_bound(double sigma_a, double sigma_b, double eta) {
    if (sigma_a < 0.0 || sigma_b < 0.0)
        throw std::invalid_argument("rho_bound: negative spectral norm");
    return eta / (sigma_a + sigma_b + 1.0);
}

DenseMatrix composite_update(const DenseMatrix& a, const DenseMatrix& b,
                             const DenseMatrix& da, const DenseMatrix& db) {
    DenseMatrix dw = matmul_t(da, false, b, true);
    DenseMatrix cross = matmul_t(a, false, db, true);
    DenseMatrix second = matmul_t(da, false, db, true);
    for (std::size_t i = 0; i < dw.size(); ++i)
        dw.data()[i] += cross.data()[i] + second.data()[i];
    return dw;
}

namespace {

void check_grad(const FactorizedWeight& w, const DenseMatrix& grad_a, const DenseMatrix& grad_b) {
    if (grad_a.rows() != w.a.rows() || grad_a.cols() != w.a.cols() ||
        grad_b.rows() != w.b.rows() || grad_b.cols() != w.b.cols())
        throw std::invalid_argument("optimizer step: gradient shape mismatch for weight '" +
                                    w.name + "'");
    if (!grad_a.all_finite() || !grad_b.all_finite())
        throw std::runtime_error("optimizer step: non-finite gradient for weight '" + w.name +
                                 "'");
}

void ema_update(DenseMatrix& m, const DenseMatrix& g, double beta) {
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = beta * m.data()[i] + (1.0 - beta) * g.data()[i];
}

double measure_sigma(const DenseMatrix& w, std::vector<double>& u, const SpectronState& s) {
    if (s.exact_sigma) return exact_spectral_norm(w);
    SpectralEstimate est = power_iter(w, u, s.k_power);
    u = est.u;
    return est.sigma;
}

DenseMatrix orthogonalize(const DenseMatrix& m, const SpectronState& s) {
    return s.exact_ortho ? exact_orthogonalize(m) : ortho_newton_schulz(m, s.ns);
}

} // namespace

void spectron_step(FactorizedWeight& w, const DenseMatrix& grad_a, const DenseMatrix& grad_b,
                   SpectronState& s) {
    check_grad(w, grad_a, grad_b);
    ema_update(s.m_a, grad_a, s.beta);
    ema_update(s.m_b, grad_b, s.beta);

    DenseMatrix o_a = orthogonalize(s.m_a, s);
    DenseMatrix o_b = orthogonalize(s.m_b, s);

    // Spectral norms of the factors as they are *before* this update; the
    // constraint radius must bound the step taken from the current point.
    s.sigma_a = measure_sigma(w.a, s.u_a, s);
    s.sigma_b = measure_sigma(w.b, s.u_b, s);
    s.rho = s.force_unit_denominator ? s.eta : rho_bound(s.sigma_a, s.sigma_b, s.eta);

    axpy(w.a, -s.rho, o_a);
    axpy(w.b, -s.rho, o_b);
    ++s.t;
}

namespace {

void ortho_only_step(FactorizedWeight& w, const DenseMatrix& grad_a, const DenseMatrix& grad_b,
                     SpectronState& s) {
    ema_update(s.m_a, grad_a, s.beta);
    ema_update(s.m_b, grad_b, s.beta);
    DenseMatrix o_a = orthogonalize(s.m_a, s);
    DenseMatrix o_b = orthogonalize(s.m_b, s);
    s.sigma_a = 0.0;
    s.sigma_b = 0.0;
    s.rho = s.eta;
    axpy(w.a, -s.eta, o_a);
    axpy(w.b, -s.eta, o_b);
    ++s.t;
}

void specnorm_only_step(FactorizedWeight& w, const DenseMatrix& grad_a,
                        const DenseMatrix& grad_b, SpectronState& s) {
    ema_update(s.m_a, grad_a, s.beta);
    ema_update(s.m_b, grad_b, s.beta);

    // Normalize the momentum to unit spectral norm (no orthogonalization).
    const double sm_a = measure_sigma(s.m_a, s.u_ma, s);
    const double sm_b = measure_sigma(s.m_b, s.u_mb, s);

    s.sigma_a = measure_sigma(w.a, s.u_a, s);
    s.sigma_b = measure_sigma(w.b, s.u_b, s);
    s.rho = rho_bound(s.sigma_a, s.sigma_b, s.eta);

    if (sm_a > 0.0) axpy(w.a, -s.rho / sm_a, s.m_a);
    if (sm_b > 0.0) axpy(w.b, -s.rho / sm_b, s.m_b);
    ++s.t;
}

/// Classical stochastic-gradient momentum: the buffer accumulates raw
/// gradients (m <- beta*m + g) rather than averaging them, so the step
/// eta*m carries up to 1/(1-beta) times the gradient magnitude. This is
/// the conventional SGD-with-momentum baseline; the constrained variants
/// above use the averaged form their update rule is defined with.
void naive_momentum_step(FactorizedWeight& w, const DenseMatrix& grad_a,
                         const DenseMatrix& grad_b, SpectronState& s) {
    for (std::size_t i = 0; i < s.m_a.size(); ++i)
        s.m_a.data()[i] = s.beta * s.m_a.data()[i] + grad_a.data()[i];
    for (std::size_t i = 0; i < s.m_b.size(); ++i)
        s.m_b.data()[i] = s.beta * s.m_b.data()[i] + grad_b.data()[i];
    s.sigma_a = 0.0;
    s.sigma_b = 0.0;
    s.rho = s.eta;
    axpy(w.a, -s.eta, s.m_a);
    axpy(w.b, -s.eta, s.m_b);
    ++s.t;
}

void adaptive_moments_factor(DenseMatrix& w, const DenseMatrix& g, DenseMatrix& m, DenseMatrix& v,
                             const SpectronState& s, std::int64_t t) {
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = g.data()[i];
        m.data()[i] = s.beta1 * m.data()[i] + (1.0 - s.beta1) * gi;
        v.data()[i] = s.beta2 * v.data()[i] + (1.0 - s.beta2) * gi * gi;
        const double mhat = m.data()[i] / bc1;
        const double vhat = v.data()[i] / bc2;
        w.data()[i] -= s.eta * mhat / (std::sqrt(vhat) + s.adam_eps);
    }
}

void adaptive_moments_step(FactorizedWeight& w, const DenseMatrix& grad_a,
                           const DenseMatrix& grad_b, SpectronState& s) {
    const std::int64_t t = s.t + 1;
    adaptive_moments_factor(w.a, grad_a, s.m_a, s.v_a, s, t);
    adaptive_moments_factor(w.b, grad_b, s.m_b, s.v_b, s, t);
    s.sigma_a = 0.0;
    s.sigma_b = 0.0;
    s.rho = s.eta;
    s.t = t;
}

} // namespace

void variant_step(OptimizerVariant variant, FactorizedWeight& w, const DenseMatrix& grad_a,
                  const DenseMatrix& grad_b, SpectronState& s) {
    check_grad(w, grad_a, grad_b);
    switch (variant) {
    case OptimizerVariant::Spectron: spectron_step(w, grad_a, grad_b, s); return;
    case OptimizerVariant::OrthoOnly: ortho_only_step(w, grad_a, grad_b, s); return;
    case OptimizerVariant::SpecNormOnly: specnorm_only_step(w, grad_a, grad_b, s); return;
    case OptimizerVariant::NaiveMomentum: naive_momentum_step(w, grad_a, grad_b, s); return;
    case OptimizerVariant::AdaptiveMoments: adaptive_moments_step(w, grad_a, grad_b, s); return;
    }
    throw std::logic_error("variant_step: unknown variant");
}

void apply_weight_decay(DenseMatrix& factor, double lambda, double eta) {
    if (lambda == 0.0) return;
    const double shrink = 1.0 - eta * lambda;
    for (double& v : factor.data()) v *= shrink;
}

DenseAdamState DenseAdamState::init(const DenseMatrix& w) {
    DenseAdamState s;
    s.m = DenseMatrix(w.rows(), w.cols());
    s.v = DenseMatrix(w.rows(), w.cols());
    return s;
}

void adamw_step(DenseMatrix& w, const DenseMatrix& grad, DenseAdamState& s, double lr) {
    if (grad.rows() != w.rows() || grad.cols() != w.cols())
        throw std::invalid_argument("adamw_step: gradient shape mismatch");
    if (!grad.all_finite()) throw std::runtime_error("adamw_step: non-finite gradient");
    const std::int64_t t = ++s.t;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double gi = grad.data()[i];
        s.m.data()[i] = s.beta1 * s.m.data()[i] + (1.0 - s.beta1) * gi;
        s.v.data()[i] = s.beta2 * s.v.data()[i] + (1.0 - s.beta2) * gi * gi;
        const double mhat = s.m.data()[i] / bc1;
        const double vhat = s.v.data()[i] / bc2;
        w.data()[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
}

} // namespace spectron
