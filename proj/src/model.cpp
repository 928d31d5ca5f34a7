#include "spectron/model.hpp"

#include <cmath>
#include <stdexcept>

#include "spectron/svd.hpp"

namespace spectron {

namespace {

std::string layer_prefix(std::size_t i) { return "layers." + std::to_string(i); }

} // namespace

void ModelConfig::validate() const {
    if (vocab < 2) throw std::invalid_argument("model config: vocab must be >= 2");
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || seq_len == 0)
        throw std::invalid_argument("model config: sizes must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("model config: n_heads must divide d_model");
    if (!(rank_ratio > 0.0) || rank_ratio > 1.0)
        throw std::invalid_argument("model config: rank_ratio must be in (0, 1]");
}

std::size_t pick_rank(std::size_t out_dim, std::size_t in_dim, double rank_ratio) {
    const double raw = rank_ratio * static_cast<double>(in_dim);
    std::size_t r = static_cast<std::size_t>(std::llround(raw));
    if (r < 1) r = 1;
    const std::size_t cap = std::min(out_dim, in_dim);
    return std::min(r, cap);
}

FactorizedWeight spectral_init(std::size_t m, std::size_t n, std::size_t r, Rng& rng) {
    if (r < 1 || r > std::min(m, n))
        throw std::invalid_argument("spectral_init: rank " + std::to_string(r) +
                                    " out of range for " + std::to_string(m) + "x" +
                                    std::to_string(n));
    const DenseMatrix w0 = gaussian_matrix(rng, m, n, 1.0 / std::sqrt(static_cast<double>(n)));
    const SvdResult svd = svd_oracle(w0);
    FactorizedWeight fw;
    fw.a = DenseMatrix(m, r);
    fw.b = DenseMatrix(n, r);
    for (std::size_t j = 0; j < r; ++j) {
        const double root = std::sqrt(svd.s[j]);
        for (std::size_t i = 0; i < m; ++i) fw.a(i, j) = svd.u(i, j) * root;
        for (std::size_t i = 0; i < n; ++i) fw.b(i, j) = svd.v(i, j) * root;
    }
    return fw;
}

namespace {

LinearLayer make_linear(const std::string& layer_id, std::size_t out_dim, std::size_t in_dim,
                        bool factorized, double rank_ratio, const Rng& rng) {
    LinearLayer layer;
    layer.layer_id = layer_id;
    layer.factorized = factorized;
    Rng child = rng.split(layer_id);
    if (factorized) {
        layer.fw = spectral_init(out_dim, in_dim, pick_rank(out_dim, in_dim, rank_ratio), child);
        layer.fw.name = layer_id;
        layer.fw.rank_ratio = rank_ratio;
    } else {
        layer.dense =
            gaussian_matrix(child, out_dim, in_dim, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    }
    return layer;
}

DenseMatrix ones_row(std::size_t n) {
    DenseMatrix g(1, n);
    for (double& v : g.data()) v = 1.0;
    return g;
}

} // namespace

TransformerModel::TransformerModel(const ModelConfig& config, const Rng& rng)
    : config_(config) {
    config_.validate();
    const std::size_t d = config_.d_model;
    const double embed_std = 1.0 / std::sqrt(static_cast<double>(d));

    Rng tok_rng = rng.split("tok_embed");
    tok_embed = gaussian_matrix(tok_rng, config_.vocab, d, embed_std);
    Rng pos_rng = rng.split("pos_embed");
    pos_embed = gaussian_matrix(pos_rng, config_.seq_len, d, embed_std);
    if (!config_.tie_head) {
        Rng head_rng = rng.split("head");
        head = gaussian_matrix(head_rng, config_.vocab, d, embed_std);
    }
    final_gain = ones_row(d);

    const bool attn_factorized = !config_.factorize_ffn_only;
    blocks.reserve(config_.n_layers);
    for (std::size_t i = 0; i < config_.n_layers; ++i) {
        const std::string p = layer_prefix(i);
        TransformerBlock block;
        block.q = make_linear(p + ".attn.q", d, d, attn_factorized, config_.rank_ratio, rng);
        block.k = make_linear(p + ".attn.k", d, d, attn_factorized, config_.rank_ratio, rng);
        block.v = make_linear(p + ".attn.v", d, d, attn_factorized, config_.rank_ratio, rng);
        block.o = make_linear(p + ".attn.o", d, d, attn_factorized, config_.rank_ratio, rng);
        block.ffn1 = make_linear(p + ".ffn.w1", config_.d_ff(), d, true, config_.rank_ratio, rng);
        block.ffn2 = make_linear(p + ".ffn.w2", d, config_.d_ff(), true, config_.rank_ratio, rng);
        block.norm1_gain = ones_row(d);
        block.norm2_gain = ones_row(d);
        blocks.push_back(std::move(block));
    }
}

namespace {

template <typename Model, typename MatrixPtr>
std::vector<std::pair<std::string, MatrixPtr>> collect_params(Model& model) {
    std::vector<std::pair<std::string, MatrixPtr>> out;
    out.emplace_back("tok_embed", &model.tok_embed);
    out.emplace_back("pos_embed", &model.pos_embed);
    if (!model.config().tie_head) out.emplace_back("head", &model.head);
    out.emplace_back("final_gain", &model.final_gain);
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        auto& block = model.blocks[i];
        const std::string p = layer_prefix(i);
        out.emplace_back(p + ".norm1.gain", &block.norm1_gain);
        out.emplace_back(p + ".norm2.gain", &block.norm2_gain);
        for (auto* layer : {&block.q, &block.k, &block.v, &block.o, &block.ffn1, &block.ffn2}) {
            if (layer->factorized) {
                out.emplace_back(layer->layer_id + ".A", &layer->fw.a);
                out.emplace_back(layer->layer_id + ".B", &layer->fw.b);
            } else {
                out.emplace_back(layer->layer_id, &layer->dense);
            }
        }
    }
    return out;
}

} // namespace

std::vector<std::pair<std::string, DenseMatrix*>> TransformerModel::named_params() {
    return collect_params<TransformerModel, DenseMatrix*>(*this);
}

std::vector<std::pair<std::string, const DenseMatrix*>> TransformerModel::named_params() const {
    return collect_params<const TransformerModel, const DenseMatrix*>(*this);
}

std::vector<FactorizedWeight*> TransformerModel::factorized_weights() {
    std::vector<FactorizedWeight*> out;
    for (auto& block : blocks)
        for (auto* layer : {&block.q, &block.k, &block.v, &block.o, &block.ffn1, &block.ffn2})
            if (layer->factorized) out.push_back(&layer->fw);
    return out;
}

std::vector<std::pair<std::string, DenseMatrix*>> TransformerModel::dense_params() {
    std::vector<std::pair<std::string, DenseMatrix*>> out;
    for (auto& [name, mat] : named_params())
        if (name.size() < 2 || (name.compare(name.size() - 2, 2, ".A") != 0 &&
                                name.compare(name.size() - 2, 2, ".B") != 0))
            out.emplace_back(name, mat);
    return out;
}

std::size_t TransformerModel::param_count() const {
    std::size_t total = 0;
    for (const auto& [name, mat] : named_params()) total += mat->size();
    return total;
}

std::map<std::string, Tape::NodeId> TransformerModel::register_leaves(Tape& tape) const {
    std::map<std::string, Tape::NodeId> leaves;
    for (const auto& [name, mat] : named_params()) leaves.emplace(name, tape.leaf(*mat, name));
    return leaves;
}

Tape::NodeId TransformerModel::linear(Tape& tape,
                                      const std::map<std::string, Tape::NodeId>& leaves,
                                      const LinearLayer& layer, Tape::NodeId x) const {
    if (layer.factorized) {
        const Tape::NodeId xb = tape.matmul(x, leaves.at(layer.layer_id + ".B"));
        return tape.matmul(xb, leaves.at(layer.layer_id + ".A"), false, true);
    }
    return tape.matmul(x, leaves.at(layer.layer_id), false, true);
}

std::vector<Tape::NodeId>
TransformerModel::forward(Tape& tape, const std::vector<std::vector<int>>& batch) const {
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");
    const std::size_t t_len = batch.front().size();
    if (t_len == 0) throw std::invalid_argument("forward: empty sequence");
    if (t_len > config_.seq_len)
        throw std::invalid_argument("forward: sequence length " + std::to_string(t_len) +
                                    " exceeds configured " + std::to_string(config_.seq_len));
    for (const auto& seq : batch) {
        if (seq.size() != t_len)
            throw std::invalid_argument("forward: ragged batch");
        for (int id : seq)
            if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab)
                throw std::invalid_argument("forward: token id " + std::to_string(id) +
                                            " outside vocab " + std::to_string(config_.vocab));
    }

    const auto leaves = register_leaves(tape);
    const std::size_t dh = config_.head_dim();
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Tape::NodeId pos = tape.slice_rows(leaves.at("pos_embed"), 0, t_len);
    const Tape::NodeId head_leaf =
        config_.tie_head ? leaves.at("tok_embed") : leaves.at("head");

    std::vector<Tape::NodeId> logits;
    logits.reserve(batch.size());
    for (const auto& seq : batch) {
        Tape::NodeId x = tape.add(tape.embed(leaves.at("tok_embed"), seq), pos);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const TransformerBlock& block = blocks[i];
            const std::string p = layer_prefix(i);
            const Tape::NodeId h1 = tape.rms_norm(x, leaves.at(p + ".norm1.gain"));
            const Tape::NodeId q = linear(tape, leaves, block.q, h1);
            const Tape::NodeId k = linear(tape, leaves, block.k, h1);
            const Tape::NodeId v = linear(tape, leaves, block.v, h1);
            std::vector<Tape::NodeId> heads;
            heads.reserve(config_.n_heads);
            for (std::size_t h = 0; h < config_.n_heads; ++h) {
                const std::size_t lo = h * dh;
                const std::size_t hi = lo + dh;
                const Tape::NodeId qh = tape.slice_cols(q, lo, hi);
                const Tape::NodeId kh = tape.slice_cols(k, lo, hi);
                const Tape::NodeId vh = tape.slice_cols(v, lo, hi);
                const Tape::NodeId scores =
                    tape.scale(tape.matmul(qh, kh, false, true), score_scale);
                heads.push_back(tape.matmul(tape.causal_softmax(scores), vh));
            }
            const Tape::NodeId attn = linear(tape, leaves, block.o, tape.concat_cols(heads));
            x = tape.add(x, attn);
            const Tape::NodeId h2 = tape.rms_norm(x, leaves.at(p + ".norm2.gain"));
            const Tape::NodeId ffn =
                linear(tape, leaves, block.ffn2, tape.gelu(linear(tape, leaves, block.ffn1, h2)));
            x = tape.add(x, ffn);
        }
        const Tape::NodeId final_h = tape.rms_norm(x, leaves.at("final_gain"));
        logits.push_back(tape.matmul(final_h, head_leaf, false, true));
    }
    return logits;
}

Tape::NodeId TransformerModel::forward_loss(Tape& tape,
                                            const std::vector<std::vector<int>>& windows) const {
    if (windows.empty()) throw std::invalid_argument("forward_loss: empty batch");
    if (windows.front().size() < 2)
        throw std::invalid_argument("forward_loss: windows need at least 2 tokens");
    std::vector<std::vector<int>> inputs;
    std::vector<int> targets;
    inputs.reserve(windows.size());
    for (const auto& w : windows) {
        if (w.size() != windows.front().size())
            throw std::invalid_argument("forward_loss: ragged batch");
        inputs.emplace_back(w.begin(), w.end() - 1);
        targets.insert(targets.end(), w.begin() + 1, w.end());
    }
    const std::vector<Tape::NodeId> logits = forward(tape, inputs);
    const Tape::NodeId stacked = logits.size() == 1 ? logits.front() : tape.concat_rows(logits);
    return tape.cross_entropy(stacked, targets);
}

SelfGuidedLinear SelfGuidedLinear::init(std::size_t out_dim, std::size_t in_dim,
                                        std::size_t rank, Rng& rng) {
    SelfGuidedLinear layer;
    layer.fw = spectral_init(out_dim, in_dim, rank, rng);
    layer.w = layer.fw.materialize();
    return layer;
}

DenseMatrix self_guided_forward(const SelfGuidedLinear& layer, const DenseMatrix& x,
                                double alpha, Rng* rng) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("self_guided_forward: alpha must be in [0, 1]");
    const DenseMatrix factorized =
        matmul_t(matmul_t(x, false, layer.fw.b, false), false, layer.fw.a, true);
    if (rng != nullptr && !(rng->uniform() < alpha)) return factorized;
    DenseMatrix blended = scale(matmul_t(x, false, layer.w, true), alpha);
    axpy(blended, 1.0 - alpha, factorized);
    return blended;
}

double self_guided_alpha(std::int64_t step, std::int64_t total_steps, double guided_fraction) {
    if (total_steps <= 0) throw std::invalid_argument("self_guided_alpha: total_steps must be positive");
    if (!(guided_fraction > 0.0) || guided_fraction > 1.0)
        throw std::invalid_argument("self_guided_alpha: guided_fraction must be in (0, 1]");
    const double horizon = guided_fraction * static_cast<double>(total_steps);
    if (static_cast<double>(step) >= horizon) return 0.0;
    const double phase = 3.14159265358979323846 * static_cast<double>(step) / horizon;
    return 0.5 * (1.0 + std::cos(phase));
}

} // namespace spectron
