#include "spectron/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

#include "spectron/optim.hpp"
#include "spectron/tape.hpp"

namespace spectron {

namespace {

constexpr std::size_t kProbeRows = 64;
constexpr std::size_t kCorpusCap = std::size_t{1} << 18;

[[noreturn]] void unknown_layer(const std::string& layer,
                                const std::vector<std::string>& valid) {
    std::string message = "unknown layer '" + layer + "'; valid layers:";
    for (const std::string& id : valid) message += " " + id;
    throw std::invalid_argument(message);
}

} // namespace

double scheduled_lr(const OptimizerConfig& optimizer, double warmup_frac, std::int64_t step,
                    std::int64_t total_steps) {
    if (total_steps <= 0 || step < 0 || step >= total_steps)
        throw std::invalid_argument("scheduled_lr: step " + std::to_string(step) +
                                    " outside [0, " + std::to_string(total_steps) + ")");
    if (optimizer.schedule == "constant") return optimizer.eta;
    const std::int64_t warmup =
        std::llround(warmup_frac * static_cast<double>(total_steps));
    if (step < warmup)
        return optimizer.eta * static_cast<double>(step + 1) / static_cast<double>(warmup);
    const std::int64_t span = std::max<std::int64_t>(1, total_steps - warmup);
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
    return optimizer.eta * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::vector<std::string> factorized_layer_ids(const ModelConfig& config) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < config.n_layers; ++i) {
        const std::string prefix = "layers." + std::to_string(i) + ".";
        if (!config.factorize_ffn_only)
            for (const char* proj : {"q", "k", "v", "o"})
                ids.push_back(prefix + "attn." + proj);
        ids.push_back(prefix + "ffn.w1");
        ids.push_back(prefix + "ffn.w2");
    }
    return ids;
}

std::vector<std::uint16_t> training_corpus(const RunConfig& config) {
    const std::size_t window = config.model.seq_len + 1;
    const std::size_t needed =
        static_cast<std::size_t>(std::max<std::int64_t>(config.steps, 1)) *
        static_cast<std::size_t>(config.batch) * window;
    const std::size_t length = std::max(window + 1, std::min(needed, kCorpusCap));
    return synth_corpus(config.seed, config.model.vocab, length);
}

TrainResult train_run(const RunConfig& config) {
    return train_run(config, training_corpus(config));
}

TrainResult train_run(const RunConfig& config, const std::vector<std::uint16_t>& tokens) {
    config.validate();
    const std::size_t window = config.model.seq_len + 1;
    if (tokens.size() < window + 1)
        throw std::invalid_argument("train_run: corpus of " + std::to_string(tokens.size()) +
                                    " tokens cannot fill a window of " +
                                    std::to_string(window));

    const Rng root(config.seed);
    TransformerModel model(config.model, root.split("model"));

    const std::vector<std::string> valid_layers = factorized_layer_ids(config.model);
    for (const std::string& layer : config.telemetry_layers)
        if (std::find(valid_layers.begin(), valid_layers.end(), layer) == valid_layers.end())
            unknown_layer(layer, valid_layers);

    // Per-factor optimizer state, keyed off the weight name so rng use is
    // independent of layer count or iteration order.
    std::vector<FactorizedWeight*> factors = model.factorized_weights();
    const Rng optim_rng = root.split("optim");
    std::vector<SpectronState> states;
    states.reserve(factors.size());
    for (FactorizedWeight* w : factors) {
        Rng r = optim_rng.split(w->name);
        SpectronState s = SpectronState::init(*w, r);
        s.eta = config.optimizer.eta;
        s.beta = config.optimizer.beta;
        s.ns.iters = config.optimizer.k_ns;
        s.k_power = config.optimizer.k_power;
        states.push_back(std::move(s));
    }
    std::vector<std::pair<std::string, DenseMatrix*>> dense = model.dense_params();
    std::vector<DenseAdamState> dense_states;
    dense_states.reserve(dense.size());
    for (const auto& [name, tensor] : dense) dense_states.push_back(DenseAdamState::init(*tensor));

    // Frozen probe batches for the telemetry layers.
    const Rng probe_rng = root.split("probes");
    std::map<std::string, DenseMatrix> probes;
    for (const std::string& layer : config.telemetry_layers) {
        for (FactorizedWeight* w : factors)
            if (w->name == layer) {
                Rng r = probe_rng.split(layer);
                probes.emplace(layer, make_probe_batch(kProbeRows, w->in_dim(), r));
                break;
            }
    }

    TrainResult result;
    const std::size_t start_span = tokens.size() - config.model.seq_len;
    for (std::int64_t step = 0; step < config.steps; ++step) {
        const double lr = scheduled_lr(config.optimizer, config.warmup_frac, step, config.steps);

        std::vector<std::vector<int>> windows(static_cast<std::size_t>(config.batch));
        for (std::int64_t b = 0; b < config.batch; ++b) {
            const std::size_t global =
                static_cast<std::size_t>(step) * static_cast<std::size_t>(config.batch) +
                static_cast<std::size_t>(b);
            const std::size_t start = (global * window) % start_span;
            std::vector<int>& w = windows[static_cast<std::size_t>(b)];
            w.resize(window);
            for (std::size_t t = 0; t < window; ++t) w[t] = static_cast<int>(tokens[start + t]);
        }

        Tape tape;
        const Tape::NodeId loss_id = model.forward_loss(tape, windows);
        const double loss = tape.value(loss_id)(0, 0);
        result.steps.push_back({step, loss, lr});
        if (step == 0) result.initial_loss = loss;
        result.final_loss = loss;
        if (!std::isfinite(loss)) {
            result.diverged = true;
            break;
        }

        const std::map<std::string, DenseMatrix> grads = tape.backward(loss_id);
        bool finite_grads = true;
        for (const auto& [name, grad] : grads)
            if (!grad.all_finite()) {
                finite_grads = false;
                break;
            }
        if (!finite_grads) {
            result.diverged = true;
            break;
        }

        for (std::size_t i = 0; i < factors.size(); ++i) {
            FactorizedWeight& w = *factors[i];
            SpectronState& s = states[i];
            const auto probe_it = probes.find(w.name);
            FactorizedWeight before;
            if (probe_it != probes.end()) before = w;

            s.eta = lr;
            if (config.optimizer.weight_decay > 0.0) {
                apply_weight_decay(w.a, config.optimizer.weight_decay, lr);
                apply_weight_decay(w.b, config.optimizer.weight_decay, lr);
            }
            variant_step(config.optimizer.variant, w, grads.at(w.name + ".A"),
                         grads.at(w.name + ".B"), s);

            if (probe_it != probes.end()) {
                const TelemetryRecord record =
                    record_step(step, before, w, s, probe_it->second);
                result.max_dw_spec = std::max(result.max_dw_spec, record.dw_spec);
                result.telemetry.push_back(record);
            }
        }

        for (std::size_t j = 0; j < dense.size(); ++j) {
            DenseMatrix& tensor = *dense[j].second;
            if (config.optimizer.weight_decay > 0.0)
                apply_weight_decay(tensor, config.optimizer.weight_decay, lr);
            adamw_step(tensor, grads.at(dense[j].first), dense_states[j], lr);
        }
    }

    for (const auto& [name, tensor] : model.named_params())
        result.parameters.emplace_back(name, *tensor);
    return result;
}

} // namespace spectron
