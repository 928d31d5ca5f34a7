#ifndef SPECTRON_MODEL_HPP
#define SPECTRON_MODEL_HPP

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spectron/matrix.hpp"
#include "spectron/optim.hpp"
#include "spectron/rng.hpp"
#include "spectron/tape.hpp"

namespace spectron {

/// Architecture of the desk-scale factorized transformer.
struct ModelConfig {
    std::size_t vocab = 64;
    std::size_t d_model = 32;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    double rank_ratio = 0.25;
    std::size_t seq_len = 32;
    /// When true only the feedforward matrices are factorized; the four
    /// attention projections stay dense.
    bool factorize_ffn_only = false;
    /// When true the output head reuses the token embedding table instead of
    /// owning its own matrix. Default untied.
    bool tie_head = false;

    std::size_t d_ff() const { return 4 * d_model; }
    std::size_t head_dim() const { return d_model / n_heads; }

    /// Throws std::invalid_argument on non-positive sizes, heads not
    /// dividing d_model, or rank_ratio outside (0, 1].
    void validate() const;
};

/// Rank rule: a fraction of the layer's input dimension, at least 1, and
/// never more than min(out_dim, in_dim) so the truncated-SVD initializer
/// stays well defined.
std::size_t pick_rank(std::size_t out_dim, std::size_t in_dim, double rank_ratio);

/// Draw a dense m x n Gaussian matrix with entry variance 1/n, take its
/// rank-r truncated SVD, and split the singular values evenly between the
/// factors: A = U_r * sqrt(S_r), B = V_r * sqrt(S_r). The product A*B^T is
/// then the best rank-r approximation of the drawn matrix.
FactorizedWeight spectral_init(std::size_t m, std::size_t n, std::size_t r, Rng& rng);

/// One linear map of the network: factorized W = A*B^T or plain dense,
/// chosen per layer by the config. Forward always computes y = A*(B^T x)
/// in the factorized case -- two skinny products, W never materialized.
struct LinearLayer {
    std::string layer_id;
    bool factorized = true;
    FactorizedWeight fw;  ///< used when factorized
    DenseMatrix dense;    ///< out_dim x in_dim, used when not factorized

    std::size_t out_dim() const { return factorized ? fw.out_dim() : dense.rows(); }
    std::size_t in_dim() const { return factorized ? fw.in_dim() : dense.cols(); }
    std::size_t param_count() const {
        return factorized ? fw.a.size() + fw.b.size() : dense.size();
    }
};

struct TransformerBlock {
    LinearLayer q, k, v, o;     ///< attention projections, d_model -> d_model
    LinearLayer ffn1, ffn2;     ///< d_model -> d_ff -> d_model
    DenseMatrix norm1_gain;     ///< 1 x d_model
    DenseMatrix norm2_gain;     ///< 1 x d_model
};

/// Pre-norm transformer over token ids: learned positional embedding,
/// RMS-normalized residual blocks, causal multi-head attention, GELU
/// feedforward, RMS-normalized dense output head.
class TransformerModel {
public:
    /// Initializes every tensor from per-tensor splits of `rng`, so the
    /// parameters depend only on (seed, tensor name), not on construction
    /// order. Factorized layers use spectral_init; dense maps use Gaussian
    /// entries with variance 1/in_dim; gains start at one.
    TransformerModel(const ModelConfig& config, const Rng& rng);

    const ModelConfig& config() const { return config_; }

    DenseMatrix tok_embed;   ///< vocab x d_model
    DenseMatrix pos_embed;   ///< seq_len x d_model
    DenseMatrix head;        ///< vocab x d_model; empty when tie_head
    DenseMatrix final_gain;  ///< 1 x d_model
    std::vector<TransformerBlock> blocks;

    /// Every trainable tensor as (name, pointer), canonical order. Factor
    /// tensors appear as "<layer>.A" / "<layer>.B".
    std::vector<std::pair<std::string, DenseMatrix*>> named_params();
    std::vector<std::pair<std::string, const DenseMatrix*>> named_params() const;

    /// The factorized weights, in layer order (the unit the optimizer steps).
    std::vector<FactorizedWeight*> factorized_weights();

    /// The non-factor tensors: embeddings, head, gains, and any layers kept
    /// dense by factorize_ffn_only.
    std::vector<std::pair<std::string, DenseMatrix*>> dense_params();

    std::size_t param_count() const;

    /// Record one forward pass for a batch of same-length sequences.
    /// Registers every parameter as a named leaf on `tape`, then returns one
    /// logits node (seq_len x vocab) per batch entry. Throws on empty input,
    /// ragged lengths, sequences longer than config.seq_len, or token ids
    /// outside the vocabulary.
    std::vector<Tape::NodeId> forward(Tape& tape,
                                      const std::vector<std::vector<int>>& batch) const;

    /// Forward over training windows of length T+1: position t predicts
    /// token t+1. Builds the batched logits, stacks them, and returns the
    /// mean cross-entropy node (targets of -1 are ignored).
    Tape::NodeId forward_loss(Tape& tape,
                              const std::vector<std::vector<int>>& windows) const;

private:
    Tape::NodeId linear(Tape& tape, const std::map<std::string, Tape::NodeId>& leaves,
                        const LinearLayer& layer, Tape::NodeId x) const;
    std::map<std::string, Tape::NodeId> register_leaves(Tape& tape) const;

    ModelConfig config_;
};

/// Dense-guided counterpart of one factorized layer: a full matrix W and the
/// factor pair, blended by a decaying coefficient. W equals A*B^T at
/// construction so training starts behaviorally identical.
struct SelfGuidedLinear {
    DenseMatrix w;       ///< out_dim x in_dim dense guide
    FactorizedWeight fw; ///< the surviving factorized parameterization

    /// Builds the factors with spectral_init and materializes W from them.
    static SelfGuidedLinear init(std::size_t out_dim, std::size_t in_dim, std::size_t rank,
                                 Rng& rng);
};

/// Blended forward for a batch of column vectors stored as rows (x is
/// batch x in_dim). Deterministic mode (rng == nullptr):
///   out = alpha * x*W^T + (1 - alpha) * (x*B)*A^T.
/// Stochastic mode draws p ~ Uniform(0,1) once per call and returns the
/// blended output when p < alpha, otherwise the pure factorized output.
/// Throws when alpha is outside [0, 1].
DenseMatrix self_guided_forward(const SelfGuidedLinear& layer, const DenseMatrix& x,
                                double alpha, Rng* rng = nullptr);

/// Cosine decay of the guide coefficient from 1 to 0 across the guided
/// fraction of training: alpha(t) = 0.5*(1 + cos(pi * t / (fraction * total)))
/// until the guided phase ends, 0 afterwards.
double self_guided_alpha(std::int64_t step, std::int64_t total_steps, double guided_fraction);

} // namespace spectron

#endif // SPECTRON_MODEL_HPP
