#ifndef SPECTRON_TELEMETRY_HPP
#define SPECTRON_TELEMETRY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spectron/matrix.hpp"
#include "spectron/optim.hpp"
#include "spectron/rng.hpp"

namespace spectron {

/// Spectral diagnostics for one layer at one optimizer step.
struct TelemetryRecord {
    std::int64_t step = 0;
    std::string layer_id;
    double dw_spec = 0.0;      ///< spectral norm of the product-space update
    double w_spec = 0.0;       ///< spectral norm of the post-step weight
    double dy_rms = 0.0;       ///< mean rms activation change on the probe batch
    double dy_rms_bound = 0.0; ///< sqrt(in/out) * dw_spec, the rms-to-rms cap
    double rho = 0.0;          ///< constraint radius used by the step
    double sigma_a = 0.0;      ///< factor spectral estimate backing rho
    double sigma_b = 0.0;
};

/// Fixed probe inputs for activation-change measurement: n_probes rows of
/// dimension `dim`, each normalized to unit rms. Drawn once per layer and
/// frozen for the whole run so dy_rms is comparable across steps.
DenseMatrix make_probe_batch(std::size_t n_probes, std::size_t dim, Rng& rng);

/// Diagnostics for the step that moved `before` to `after`. Norms come from
/// the exact oracle (desk-scale matrices are small), never from the
/// optimizer's own estimates, so telemetry cannot perturb the unit it
/// observes. rho/sigma taps are copied from the state of the step.
/// Throws std::invalid_argument when factor or probe shapes disagree.
TelemetryRecord record_step(std::int64_t step, const FactorizedWeight& before,
                            const FactorizedWeight& after, const SpectronState& state,
                            const DenseMatrix& probes);

/// Writes records sorted by (step, layer_id) as CSV with 17-significant-
/// digit floats. Creates the file with a header when absent or empty,
/// appends otherwise. Throws std::runtime_error on I/O failure.
void write_telemetry_csv(const std::vector<TelemetryRecord>& records, const std::string& path);

/// Reads a telemetry CSV back. Throws std::runtime_error on malformed
/// header or rows.
std::vector<TelemetryRecord> read_telemetry_csv(const std::string& path);

} // namespace spectron

#endif // SPECTRON_TELEMETRY_HPP
