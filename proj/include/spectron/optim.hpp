#ifndef SPECTRON_OPTIM_HPP
#define SPECTRON_OPTIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spectron/matrix.hpp"
#include "spectron/rng.hpp"
#include "spectron/spectral.hpp"

namespace spectron {

/// A weight stored natively as the product W = A * B^T, never materialized
/// on the training path. A is out_dim x rank, B is in_dim x rank, where
/// rank = max(1, round(rank_ratio * in_dim)) for genuinely low-rank layers.
struct FactorizedWeight {
    std::string name;
    DenseMatrix a; ///< out_dim x rank
    DenseMatrix b; ///< in_dim x rank
    double rank_ratio = 0.25;

    std::size_t out_dim() const { return a.rows(); }
    std::size_t in_dim() const { return b.rows(); }
    std::size_t rank() const { return a.cols(); }

    /// A * B^T. Telemetry/test path only.
    DenseMatrix materialize() const { return matmul_t(a, false, b, true); }
};

/// Update rules for the factors. Spectron is the full method; the others
/// are its ablations and the adaptive-moments baseline.
enum class OptimizerVariant {
    Spectron,        ///< orthogonalized momentum, step radius eta/(sigma_a+sigma_b+1)
    OrthoOnly,       ///< orthogonalized momentum, fixed step eta
    SpecNormOnly,    ///< momentum divided by its spectral norm, constrained radius
    NaiveMomentum,   ///< classical SGD momentum (accumulated gradients) times eta
    AdaptiveMoments, ///< per-entry adaptive scaling with decoupled decay
};

std::string variant_name(OptimizerVariant v);
OptimizerVariant parse_variant(const std::string& name);

/// Per-weight optimizer state shared by all variants. Momentum buffers
/// match the factor shapes; the u vectors warm-start power iteration from
/// one step to the next. Hyperparameters live here so a (weight, state)
/// pair fully determines the update.
struct SpectronState {
    // Buffers.
    DenseMatrix m_a, m_b;          ///< first-moment (momentum) per factor
    DenseMatrix v_a, v_b;          ///< second-moment, AdaptiveMoments only
    std::vector<double> u_a, u_b;  ///< power-iteration carriers for the factors
    std::vector<double> u_ma, u_mb; ///< carriers for the momentum, SpecNormOnly
    std::int64_t t = 0;            ///< completed steps

    // Hyperparameters.
    double eta = 0.01;             ///< learning rate (callers set the scheduled value)
    double beta = 0.95;            ///< momentum decay
    NewtonSchulzConfig ns{};       ///< orthogonalizer settings
    int k_power = 1;               ///< power-iteration rounds per step
    double beta1 = 0.9;            ///< AdaptiveMoments first-moment decay
    double beta2 = 0.95;           ///< AdaptiveMoments second-moment decay
    double adam_eps = 1e-8;
    bool exact_ortho = false;      ///< use the SVD polar factor instead of the iteration
    bool exact_sigma = false;      ///< use exact spectral norms instead of power iteration
    /// Ablation seam: pretend sigma_a + sigma_b + 1 == 1, so the step
    /// degenerates to the plain orthogonalized-momentum rule. Used to test
    /// that the constrained step composes from its two components.
    bool force_unit_denominator = false;

    // Telemetry taps from the most recent step.
    double rho = 0.0;
    double sigma_a = 0.0;
    double sigma_b = 0.0;

    static SpectronState init(const FactorizedWeight& w, Rng& rng);
};

/// Constraint radius eta / (sigma_a + sigma_b + 1).
double rho_bound(double sigma_a, double sigma_b, double eta);

/// Exact change of the product under factor updates:
/// dW = dA * B^T + A * dB^T + dA * dB^T.
DenseMatrix composite_update(const DenseMatrix& a, const DenseMatrix& b,
                             const DenseMatrix& da, const DenseMatrix& db);

/// One Spectron update on both factors: momentum, orthogonalization,
/// spectral measurement of the pre-update factors, then a step of radius
/// rho_bound on each factor. Throws on shape mismatch or non-finite
/// gradients, naming the weight.
void spectron_step(FactorizedWeight& w, const DenseMatrix& grad_a, const DenseMatrix& grad_b,
                   SpectronState& s);

/// One update under the given variant (Spectron dispatches to
/// spectron_step). All variants consume the same state struct.
void variant_step(OptimizerVariant variant, FactorizedWeight& w, const DenseMatrix& grad_a,
                  const DenseMatrix& grad_b, SpectronState& s);

/// Decoupled weight decay: factor <- factor * (1 - eta * lambda), applied
/// before the optimizer delta.
void apply_weight_decay(DenseMatrix& factor, double lambda, double eta);

/// Adaptive-moments state and update for ordinary dense tensors
/// (embeddings, norm gains, readout). Used for the non-factorized
/// parameters under every variant.
struct DenseAdamState {
    DenseMatrix m, v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;

    static DenseAdamState init(const DenseMatrix& w);
};

void adamw_step(DenseMatrix& w, const DenseMatrix& grad, DenseAdamState& s, double lr);

} // namespace spectron

#endif // SPECTRON_OPTIM_HPP
