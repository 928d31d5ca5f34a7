#include "spectron/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "spectron/corpus.hpp"
#include "spectron/svg.hpp"
#include "spectron/telemetry.hpp"

namespace spectron {

namespace fs = std::filesystem;

namespace {

using nlohmann::ordered_json;

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_loss_csv(const std::string& path, const std::vector<StepLog>& steps) {
    std::string text = "step,loss,lr\n";
    for (const StepLog& s : steps)
        text += std::to_string(s.step) + "," + g17(s.loss) + "," + g17(s.lr) + "\n";
    write_text_file(path, text);
}

/// Clusters points by compute budget (relative tolerance 1e-6), ascending.
std::vector<std::vector<RunPoint>> group_by_budget(std::vector<RunPoint> points) {
    std::sort(points.begin(), points.end(), [](const RunPoint& a, const RunPoint& b) {
        if (a.flops != b.flops) return a.flops < b.flops;
        if (a.n_params != b.n_params) return a.n_params < b.n_params;
        return a.tokens < b.tokens;
    });
    std::vector<std::vector<RunPoint>> groups;
    for (const RunPoint& p : points) {
        if (groups.empty() ||
            std::fabs(p.flops - groups.back().front().flops) >
                1e-6 * groups.back().front().flops)
            groups.emplace_back();
        groups.back().push_back(p);
    }
    return groups;
}

SvgPanel budget_panel(const std::vector<RunPoint>& group, const std::string& fit_label,
                      const std::vector<std::pair<double, double>>& fit_curve) {
    char budget_text[64];
    std::snprintf(budget_text, sizeof(budget_text), "%.3g", group.front().flops);
    SvgPanel panel;
    panel.title = std::string("compute budget ") + budget_text;
    panel.x_label = "model size";
    panel.y_label = "loss";
    panel.log_x = true;

    SvgSeries runs;
    runs.label = "runs";
    runs.line = false;
    runs.markers = true;
    runs.color = "#c24a1e";
    for (const RunPoint& p : group) runs.points.emplace_back(p.n_params, p.loss);

    SvgSeries fit;
    fit.label = fit_label;
    fit.points = fit_curve;
    panel.series = {fit, runs};
    return panel;
}

std::vector<std::pair<double, double>> sample_curve(double n_lo, double n_hi,
                                                    const std::function<double(double)>& f) {
    std::vector<std::pair<double, double>> pts;
    const double x_lo = std::log(n_lo), x_hi = std::log(n_hi);
    for (int k = 0; k < 64; ++k) {
        const double x = x_lo + (x_hi - x_lo) * static_cast<double>(k) / 63.0;
        const double n = std::exp(x);
        pts.emplace_back(n, f(n));
    }
    return pts;
}

} // namespace

TrainResult cmd_train(const RunConfig& config) {
    config.validate();
    fs::create_directories(config.output_dir);
    const fs::path dir(config.output_dir);

    const std::vector<std::uint16_t> tokens = training_corpus(config);
    write_token_file((dir / "corpus.sptk").string(), config.model.vocab, tokens);

    const TrainResult result = train_run(config, tokens);

    write_loss_csv((dir / "loss.csv").string(), result.steps);
    const std::string telemetry_path = (dir / "telemetry.csv").string();
    fs::remove(telemetry_path); // always a fresh file, never an append
    write_telemetry_csv(result.telemetry, telemetry_path);
    write_checkpoint((dir / "checkpoint.spck").string(), result.parameters);
    write_text_file((dir / "manifest.json").string(), run_config_to_json(config));
    return result;
}

std::vector<AblationCell> run_ablation(const RunConfig& base) {
    base.validate();
    if (base.telemetry_layers.empty())
        throw std::invalid_argument(
            "ablation needs at least one telemetry layer to compare update norms");

    const OptimizerVariant variants[] = {
        OptimizerVariant::Spectron, OptimizerVariant::OrthoOnly, OptimizerVariant::SpecNormOnly,
        OptimizerVariant::NaiveMomentum, OptimizerVariant::AdaptiveMoments};
    std::vector<RunConfig> grid;
    for (const OptimizerVariant variant : variants)
        for (const double eta : {0.001, 0.01}) {
            RunConfig config = base;
            config.optimizer.variant = variant;
            config.optimizer.eta = eta;
            grid.push_back(config);
        }

    // Cells are independent runs with isolated state, so they can train in
    // parallel; results are collected in grid order, keeping output
    // deterministic regardless of completion order.
    std::vector<std::future<TrainResult>> futures;
    futures.reserve(grid.size());
    for (const RunConfig& config : grid)
        futures.push_back(
            std::async(std::launch::async, [config]() { return train_run(config); }));

    std::vector<AblationCell> cells;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const TrainResult r = futures[i].get();
        AblationCell cell;
        cell.variant = variant_name(grid[i].optimizer.variant);
        cell.eta = grid[i].optimizer.eta;
        cell.final_loss = r.final_loss;
        cell.max_dw_spec = r.max_dw_spec;
        cell.diverged = r.diverged;
        cells.push_back(cell);
    }
    return cells;
}

std::vector<AblationCell> cmd_ablate(const RunConfig& base) {
    std::vector<AblationCell> cells = run_ablation(base);

    // Rank by final loss; runs that diverged (or ended non-finite) sort last.
    std::stable_sort(cells.begin(), cells.end(), [](const AblationCell& a, const AblationCell& b) {
        const bool a_ok = std::isfinite(a.final_loss) && !a.diverged;
        const bool b_ok = std::isfinite(b.final_loss) && !b.diverged;
        if (a_ok != b_ok) return a_ok;
        if (!a_ok) return false;
        return a.final_loss < b.final_loss;
    });

    fs::create_directories(base.output_dir);
    const fs::path dir(base.output_dir);
    std::string text = "rank,variant,eta,final_loss,max_dw_spec,diverged\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const AblationCell& c = cells[i];
        text += std::to_string(i + 1) + "," + c.variant + "," + g17(c.eta) + "," +
                g17(c.final_loss) + "," + g17(c.max_dw_spec) + "," + (c.diverged ? "1" : "0") +
                "\n";
    }
    write_text_file((dir / "ablation.csv").string(), text);
    write_text_file((dir / "manifest.json").string(), run_config_to_json(base));
    return cells;
}

std::vector<RunPoint> read_runs_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("fit input '" + path + "': cannot open");
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("fit input '" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "n_params,tokens,loss")
        throw std::invalid_argument("fit input '" + path +
                                    "' row 1: expected header 'n_params,tokens,loss', got '" +
                                    line + "'");
    std::vector<RunPoint> points;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        double values[3];
        std::string field;
        for (int i = 0; i < 3; ++i) {
            if (!std::getline(fields, field, ','))
                throw std::invalid_argument("fit input '" + path + "' row " +
                                            std::to_string(row) + ": expected 3 fields");
            std::size_t used = 0;
            try {
                values[i] = std::stod(field, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != field.size() || field.empty())
                throw std::invalid_argument("fit input '" + path + "' row " +
                                            std::to_string(row) + ": '" + field +
                                            "' is not a number");
        }
        if (std::getline(fields, field, ','))
            throw std::invalid_argument("fit input '" + path + "' row " + std::to_string(row) +
                                        ": expected 3 fields");
        try {
            points.push_back(RunPoint::from_nd(values[0], values[1], values[2]));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("fit input '" + path + "' row " + std::to_string(row) +
                                        ": " + e.what());
        }
    }
    if (points.empty())
        throw std::invalid_argument("fit input '" + path + "': no data rows");
    return points;
}

void cmd_fit(const std::string& input_csv, const std::string& mode, const std::string& out_dir) {
    if (mode != "isoflop" && mode != "parametric")
        throw std::invalid_argument("fit mode must be 'isoflop' or 'parametric', got '" + mode +
                                    "'");
    const std::vector<RunPoint> points = read_runs_csv(input_csv);
    const std::vector<std::vector<RunPoint>> groups = group_by_budget(points);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    ordered_json doc;
    doc["mode"] = mode;
    std::vector<SvgPanel> panels(groups.size());

    if (mode == "isoflop") {
        ordered_json curves = ordered_json::array();
        std::vector<std::pair<double, double>> budget_vs_nopt;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const std::vector<RunPoint>& group = groups[gi];
            std::vector<std::pair<double, double>> samples;
            for (const RunPoint& p : group) samples.emplace_back(p.n_params, p.loss);
            const IsoflopCurve curve = isoflop_fit(group.front().flops, samples);
            curves.push_back({{"budget", curve.budget},
                              {"qa", curve.qa},
                              {"qb", curve.qb},
                              {"qc", curve.qc},
                              {"n_opt", curve.n_opt},
                              {"loss_min", curve.loss_min}});
            budget_vs_nopt.emplace_back(curve.budget, curve.n_opt);

            const auto [n_lo, n_hi] = std::minmax_element(
                group.begin(), group.end(),
                [](const RunPoint& a, const RunPoint& b) { return a.n_params < b.n_params; });
            panels[gi] = budget_panel(
                group, "quadratic fit",
                sample_curve(n_lo->n_params, n_hi->n_params, [&](double n) {
                    const double x = std::log(n);
                    return curve.qa * x * x + curve.qb * x + curve.qc;
                }));
        }
        doc["curves"] = curves;
        if (budget_vs_nopt.size() >= 2) {
            const PowerLaw law = powerlaw_fit(budget_vs_nopt);
            doc["n_opt_power_law"] = {{"exponent", law.exponent},
                                      {"prefactor", law.prefactor}};
        } else {
            doc["n_opt_power_law"] = nullptr;
        }
    } else {
        const ScalingFit fit = parametric_fit(points);
        const OptimalAllocation alloc = compute_optimal(fit.alpha, fit.beta);
        doc["coefA"] = fit.coefA;
        doc["coefB"] = fit.coefB;
        doc["irreducible"] = fit.irreducible;
        doc["alpha"] = fit.alpha;
        doc["beta"] = fit.beta;
        doc["objective"] = fit.objective;
        doc["on_boundary"] = fit.on_boundary;
        doc["allocation"] = {{"a_n", alloc.a_n}, {"a_d", alloc.a_d}};
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const std::vector<RunPoint>& group = groups[gi];
            const double budget = group.front().flops;
            const auto [n_lo, n_hi] = std::minmax_element(
                group.begin(), group.end(),
                [](const RunPoint& a, const RunPoint& b) { return a.n_params < b.n_params; });
            panels[gi] = budget_panel(
                group, "surface fit",
                sample_curve(n_lo->n_params, n_hi->n_params,
                             [&](double n) { return fit.predict(n, budget / (6.0 * n)); }));
        }
    }

    write_text_file((dir / "fit.json").string(), doc.dump(2) + "\n");
    for (std::size_t gi = 0; gi < panels.size(); ++gi)
        write_text_file((dir / ("fit_budget_" + std::to_string(gi + 1) + ".svg")).string(),
                        render_svg({panels[gi]}));
}

void cmd_spectral_trace(const RunConfig& config, const std::string& layer_id) {
    config.validate();
    const std::vector<std::string> valid = factorized_layer_ids(config.model);
    if (std::find(valid.begin(), valid.end(), layer_id) == valid.end()) {
        std::string message = "unknown layer '" + layer_id + "'; valid layers:";
        for (const std::string& id : valid) message += " " + id;
        throw std::invalid_argument(message);
    }

    struct TraceRow {
        std::int64_t step;
        std::string variant;
        TelemetryRecord rec;
    };
    std::vector<TraceRow> rows;
    std::vector<SvgSeries> dw_series, dy_series, w_series;
    for (const OptimizerVariant variant :
         {OptimizerVariant::NaiveMomentum, OptimizerVariant::Spectron}) {
        RunConfig cell = config;
        cell.optimizer.variant = variant;
        cell.telemetry_layers = {layer_id};
        const TrainResult r = train_run(cell);
        const std::string name = variant_name(variant);
        SvgSeries dw{name, {}, "", true, false};
        SvgSeries dy{name, {}, "", true, false};
        SvgSeries ws{name, {}, "", true, false};
        const std::string color =
            variant == OptimizerVariant::Spectron ? "#00589c" : "#c24a1e";
        dw.color = dy.color = ws.color = color;
        for (const TelemetryRecord& rec : r.telemetry) {
            rows.push_back({rec.step, name, rec});
            dw.points.emplace_back(static_cast<double>(rec.step), rec.dw_spec);
            dy.points.emplace_back(static_cast<double>(rec.step), rec.dy_rms);
            ws.points.emplace_back(static_cast<double>(rec.step), rec.w_spec);
        }
        dw_series.push_back(std::move(dw));
        dy_series.push_back(std::move(dy));
        w_series.push_back(std::move(ws));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) {
        if (a.step != b.step) return a.step < b.step;
        return a.variant < b.variant;
    });

    fs::create_directories(config.output_dir);
    const fs::path dir(config.output_dir);
    std::string text = "step,variant,dw_spec,w_spec,dy_rms,dy_rms_bound,rho\n";
    for (const TraceRow& row : rows)
        text += std::to_string(row.step) + "," + row.variant + "," + g17(row.rec.dw_spec) +
                "," + g17(row.rec.w_spec) + "," + g17(row.rec.dy_rms) + "," +
                g17(row.rec.dy_rms_bound) + "," + g17(row.rec.rho) + "\n";
    write_text_file((dir / "trace.csv").string(), text);

    SvgPanel p1{"update spectral norm: " + layer_id, "step", "dw_spec", dw_series, false, true};
    SvgPanel p2{"probe activation rms change", "step", "dy_rms", dy_series, false, true};
    SvgPanel p3{"weight spectral norm", "step", "w_spec", w_series, false, true};
    write_text_file((dir / "trace.svg").string(), render_svg({p1, p2, p3}));
    write_text_file((dir / "manifest.json").string(), run_config_to_json(config));
}

} // namespace spectron
