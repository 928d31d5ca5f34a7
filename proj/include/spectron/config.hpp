#ifndef SPECTRON_CONFIG_HPP
#define SPECTRON_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spectron/model.hpp"
#include "spectron/optim.hpp"

namespace spectron {

/// Optimizer selection and hyperparameters, as read from the run config.
struct OptimizerConfig {
    OptimizerVariant variant = OptimizerVariant::Spectron;
    double eta = 0.01;         ///< peak learning rate
    double beta = 0.95;        ///< momentum decay
    int k_ns = 5;              ///< orthogonalizer iterations
    int k_power = 1;           ///< power-iteration rounds per step
    double weight_decay = 0.0; ///< decoupled decay coefficient
    /// "warmup_cosine": linear warmup over warmup_frac of the run, then
    /// cosine decay to zero. "constant": eta at every step.
    std::string schedule = "warmup_cosine";
};

/// Everything that determines a training run. Two runs from the same config
/// produce byte-identical artifacts.
struct RunConfig {
    std::uint64_t seed = 42;
    ModelConfig model;
    OptimizerConfig optimizer;
    std::int64_t steps = 500;
    std::int64_t batch = 8;
    double warmup_frac = 0.05;
    std::vector<std::string> telemetry_layers;
    std::string output_dir = "run_out";

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// The documented small-scale default: the RunConfig above with telemetry
/// on the first attention output projection.
RunConfig default_desk_config();

/// Parses a JSON config document. Every field is optional and falls back to
/// the default_desk_config value; unknown fields are rejected. Errors throw
/// std::invalid_argument with a line number (syntax) or field path.
RunConfig parse_run_config(const std::string& json_text);

/// Reads and parses a config file; error messages include the path.
RunConfig load_run_config(const std::string& path);

/// Canonical JSON form (fixed key order, two-space indent). Feeding the
/// result back through parse_run_config reproduces the config exactly; this
/// is what run manifests contain.
std::string run_config_to_json(const RunConfig& config);

} // namespace spectron

#endif // SPECTRON_CONFIG_HPP
