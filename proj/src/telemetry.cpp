#include "spectron/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "spectron/spectral.hpp"

namespace spectron {

namespace {

const char* kHeader = "step,layer_id,dw_spec,w_spec,dy_rms,dy_rms_bound,rho,sigma_a,sigma_b";

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

DenseMatrix make_probe_batch(std::size_t n_probes, std::size_t dim, Rng& rng) {
    if (n_probes == 0 || dim == 0)
        throw std::invalid_argument("make_probe_batch: sizes must be positive");
    DenseMatrix probes = gaussian_matrix(rng, n_probes, dim, 1.0);
    for (std::size_t i = 0; i < n_probes; ++i) {
        double sum_sq = 0.0;
        for (std::size_t j = 0; j < dim; ++j) sum_sq += probes(i, j) * probes(i, j);
        const double rms = std::sqrt(sum_sq / static_cast<double>(dim));
        if (rms == 0.0) throw std::runtime_error("make_probe_batch: degenerate zero probe");
        for (std::size_t j = 0; j < dim; ++j) probes(i, j) /= rms;
    }
    return probes;
}

TelemetryRecord record_step(std::int64_t step, const FactorizedWeight& before,
                            const FactorizedWeight& after, const SpectronState& state,
                            const DenseMatrix& probes) {
    if (before.a.rows() != after.a.rows() || before.a.cols() != after.a.cols() ||
        before.b.rows() != after.b.rows() || before.b.cols() != after.b.cols())
        throw std::invalid_argument("record_step: factor shapes changed across the step for " +
                                    before.name);
    if (probes.cols() != before.in_dim())
        throw std::invalid_argument("record_step: probes are " + shape_str(probes) +
                                    " but layer input dimension is " +
                                    std::to_string(before.in_dim()));

    const DenseMatrix da = sub(after.a, before.a);
    const DenseMatrix db = sub(after.b, before.b);
    const DenseMatrix dw = composite_update(before.a, before.b, da, db);
    const DenseMatrix w_after = after.materialize();

    TelemetryRecord rec;
    rec.step = step;
    rec.layer_id = after.name.empty() ? before.name : after.name;
    rec.rho = state.rho;
    rec.sigma_a = state.sigma_a;
    rec.sigma_b = state.sigma_b;

    // An overflowed step leaves non-finite factor entries; the spectral norm
    // of such a matrix is unbounded and the SVD routine cannot process it, so
    // report infinity and let the training loop flag divergence on the next
    // forward pass.
    if (!dw.all_finite() || !w_after.all_finite()) {
        const double inf = std::numeric_limits<double>::infinity();
        rec.dw_spec = inf;
        rec.w_spec = inf;
        rec.dy_rms = inf;
        rec.dy_rms_bound = inf;
        return rec;
    }

    rec.dw_spec = exact_spectral_norm(dw);
    rec.w_spec = exact_spectral_norm(w_after);

    // Activation change per probe row x: dy = dW * x, reported as the mean
    // rms over the batch.
    const DenseMatrix dy = matmul_t(probes, false, dw, true); // n_probes x out_dim
    const std::size_t out_dim = dw.rows();
    double mean_rms = 0.0;
    for (std::size_t i = 0; i < dy.rows(); ++i) {
        double sum_sq = 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) sum_sq += dy(i, j) * dy(i, j);
        mean_rms += std::sqrt(sum_sq / static_cast<double>(out_dim));
    }
    rec.dy_rms = mean_rms / static_cast<double>(dy.rows());
    rec.dy_rms_bound = std::sqrt(static_cast<double>(before.in_dim()) /
                                 static_cast<double>(out_dim)) *
                       rec.dw_spec;
    return rec;
}

void write_telemetry_csv(const std::vector<TelemetryRecord>& records, const std::string& path) {
    std::vector<TelemetryRecord> sorted = records;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TelemetryRecord& x, const TelemetryRecord& y) {
                         if (x.step != y.step) return x.step < y.step;
                         return x.layer_id < y.layer_id;
                     });

    bool need_header = true;
    {
        std::ifstream probe(path, std::ios::binary | std::ios::ate);
        if (probe && probe.tellg() > 0) need_header = false;
    }
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("write_telemetry_csv: cannot open " + path);
    if (need_header) out << kHeader << "\n";
    for (const TelemetryRecord& r : sorted) {
        out << r.step << ',' << r.layer_id << ',' << format_double(r.dw_spec) << ','
            << format_double(r.w_spec) << ',' << format_double(r.dy_rms) << ','
            << format_double(r.dy_rms_bound) << ',' << format_double(r.rho) << ','
            << format_double(r.sigma_a) << ',' << format_double(r.sigma_b) << "\n";
    }
    out.flush();
    if (!out) throw std::runtime_error("write_telemetry_csv: write failed for " + path);
}

std::vector<TelemetryRecord> read_telemetry_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_telemetry_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw std::runtime_error("read_telemetry_csv: bad header in " + path);

    std::vector<TelemetryRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 9)
            throw std::runtime_error("read_telemetry_csv: line " + std::to_string(line_no) +
                                     " has " + std::to_string(fields.size()) + " fields");
        TelemetryRecord r;
        try {
            r.step = std::stoll(fields[0]);
            r.layer_id = fields[1];
            r.dw_spec = std::stod(fields[2]);
            r.w_spec = std::stod(fields[3]);
            r.dy_rms = std::stod(fields[4]);
            r.dy_rms_bound = std::stod(fields[5]);
            r.rho = std::stod(fields[6]);
            r.sigma_a = std::stod(fields[7]);
            r.sigma_b = std::stod(fields[8]);
        } catch (const std::exception&) {
            throw std::runtime_error("read_telemetry_csv: malformed line " +
                                     std::to_string(line_no));
        }
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace spectron
