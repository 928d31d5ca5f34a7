#ifndef SPECTRON_COMMANDS_HPP
#define SPECTRON_COMMANDS_HPP

#include <string>
#include <vector>

#include "spectron/config.hpp"
#include "spectron/scaling.hpp"
#include "spectron/train.hpp"

namespace spectron {

/// Trains one run and writes its artifacts into config.output_dir:
/// corpus.sptk (token cache), loss.csv (step,loss,lr), telemetry.csv,
/// checkpoint.spck (final parameters), manifest.json (the resolved config,
/// re-ingestable as a config file). Returns the in-memory result.
TrainResult cmd_train(const RunConfig& config);

/// One row of the ablation summary.
struct AblationCell {
    std::string variant;
    double eta = 0.0;
    double final_loss = 0.0;
    double max_dw_spec = 0.0;
    bool diverged = false;
};

/// Runs every optimizer variant at learning rates 0.001 and 0.01 from the
/// same seed (identical initialization per cell). Requires at least one
/// telemetry layer so update norms are comparable across cells.
std::vector<AblationCell> run_ablation(const RunConfig& base);

/// run_ablation plus artifacts in base.output_dir: ablation.csv (rows
/// ranked by final loss, diverged cells last) and manifest.json.
std::vector<AblationCell> cmd_ablate(const RunConfig& base);

/// Parses a runs CSV with header "n_params,tokens,loss". Throws
/// std::invalid_argument with a row number on any malformed content, and
/// when no data rows are present.
std::vector<RunPoint> read_runs_csv(const std::string& path);

/// Fits the runs in `input_csv` and writes fit.json plus one
/// scatter-with-fit SVG per compute budget into out_dir. Mode "isoflop"
/// fits a quadratic per budget and a power law through the minima; mode
/// "parametric" fits the full loss surface.
void cmd_fit(const std::string& input_csv, const std::string& mode, const std::string& out_dir);

/// Telemetry traces for one layer under the Spectron and NaiveMomentum
/// rules on the same seed. Writes trace.csv (one row per step and variant),
/// trace.svg (update norm, activation change, weight norm vs. step), and
/// manifest.json into config.output_dir. Throws std::invalid_argument for
/// an unknown layer, listing the valid ids.
void cmd_spectral_trace(const RunConfig& config, const std::string& layer_id);

} // namespace spectron

#endif // SPECTRON_COMMANDS_HPP
