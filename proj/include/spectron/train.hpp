#ifndef SPECTRON_TRAIN_HPP
#define SPECTRON_TRAIN_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "spectron/checkpoint.hpp"
#include "spectron/config.hpp"
#include "spectron/corpus.hpp"
#include "spectron/model.hpp"
#include "spectron/telemetry.hpp"

namespace spectron {

/// One logged optimizer step.
struct StepLog {
    std::int64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
};

/// In-memory outcome of a training run.
struct TrainResult {
    std::vector<StepLog> steps;            ///< one entry per executed step
    std::vector<TelemetryRecord> telemetry; ///< for the configured layers
    double initial_loss = std::numeric_limits<double>::quiet_NaN(); ///< loss at step 0
    double final_loss = std::numeric_limits<double>::quiet_NaN();   ///< last recorded loss
    /// True when a non-finite loss or gradient stopped the run early.
    bool diverged = false;
    /// Largest product-space update norm seen across telemetry records.
    double max_dw_spec = 0.0;
    /// Final parameters in canonical order (the checkpoint contents).
    TensorList parameters;
};

/// Learning rate for `step` in [0, total_steps). "constant" returns eta;
/// "warmup_cosine" ramps linearly over round(warmup_frac * total_steps)
/// steps, then follows a half cosine from eta toward zero. Throws
/// std::invalid_argument on an out-of-range step.
double scheduled_lr(const OptimizerConfig& optimizer, double warmup_frac, std::int64_t step,
                    std::int64_t total_steps);

/// Layer ids carrying factorized weights under this config, in model order.
/// These are the valid telemetry and trace targets.
std::vector<std::string> factorized_layer_ids(const ModelConfig& config);

/// The deterministic training stream for a config: enough tokens for every
/// (step, batch) window, capped so long runs cycle through a fixed corpus.
std::vector<std::uint16_t> training_corpus(const RunConfig& config);

/// Runs the full training loop in memory: deterministic corpus windows,
/// factor updates under the configured variant, adaptive-moment updates
/// with decoupled decay for the dense tensors, telemetry on the configured
/// layers. A non-finite loss or gradient marks the run diverged and stops
/// it after logging the offending step. Throws std::invalid_argument on an
/// invalid config or an unknown telemetry layer (listing the valid ids).
TrainResult train_run(const RunConfig& config);

/// Same, over a caller-provided token stream (must hold at least one
/// window of seq_len + 1 tokens).
TrainResult train_run(const RunConfig& config, const std::vector<std::uint16_t>& tokens);

} // namespace spectron

#endif // SPECTRON_TRAIN_HPP
