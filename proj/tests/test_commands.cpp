#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "spectron/commands.hpp"

using namespace spectron;
namespace fs = std::filesystem;

namespace {

/// Fresh scratch directory under the system temp dir, removed on scope exit.
struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (const char c : text) n += (c == '\n');
    return n;
}

/// A run that finishes in a fraction of a second.
RunConfig tiny_config(const std::string& out_dir) {
    RunConfig c;
    c.seed = 11;
    c.model.vocab = 8;
    c.model.d_model = 16;
    c.model.n_layers = 1;
    c.model.n_heads = 4;
    c.model.rank_ratio = 0.25;
    c.model.seq_len = 8;
    c.steps = 5;
    c.batch = 2;
    c.warmup_frac = 0.05;
    c.telemetry_layers = {"layers.0.attn.o"};
    c.output_dir = out_dir;
    return c;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

/// Noiseless loss surface used to plant recoverable scaling data.
struct PlantedSurface {
    double coefA = 1000.0, coefB = 1000.0, irreducible = 1.777;
    double alpha = 0.398, beta = 0.332;
    double loss(double n, double d) const {
        return irreducible + coefA / std::pow(n, alpha) + coefB / std::pow(d, beta);
    }
    double n_opt(double budget) const {
        const double ratio = alpha * coefA / (beta * coefB * std::pow(6.0 / budget, beta));
        return std::pow(ratio, 1.0 / (alpha + beta));
    }
};

/// CSV with 13 model sizes around the optimum at each of three budgets.
std::string planted_csv() {
    const PlantedSurface s;
    std::ostringstream out;
    out.precision(17);
    out << "n_params,tokens,loss\n";
    for (const double budget : {1e17, 1e19, 1e21}) {
        const double center = std::log(s.n_opt(budget));
        for (int i = -6; i <= 6; ++i) {
            const double n = std::exp(center + 0.2 * i);
            const double d = budget / (6.0 * n);
            out << n << "," << d << "," << s.loss(n, d) << "\n";
        }
    }
    return out.str();
}

} // namespace

TEST_CASE("cmd_train writes the full artifact set and reruns byte-identically") {
    TempDir dir("spectron_cmd_train_test");
    const RunConfig config = tiny_config(dir.str());
    const TrainResult result = cmd_train(config);

    for (const char* name :
         {"corpus.sptk", "loss.csv", "telemetry.csv", "checkpoint.spck", "manifest.json"})
        CHECK(fs::exists(dir.path / name));

    // loss.csv: header plus one row per step, lr column echoing the schedule.
    const std::string loss_csv = file_bytes(dir.sub("loss.csv"));
    CHECK(line_count(loss_csv) == 1 + 5);
    CHECK(loss_csv.rfind("step,loss,lr\n", 0) == 0);

    // telemetry.csv: header plus one row per (step, layer).
    CHECK(line_count(file_bytes(dir.sub("telemetry.csv"))) == 1 + 5);

    // The checkpoint holds exactly the final parameters.
    const TensorList reloaded = read_checkpoint(dir.sub("checkpoint.spck"));
    REQUIRE(reloaded.size() == result.parameters.size());
    for (std::size_t i = 0; i < reloaded.size(); ++i) {
        CHECK(reloaded[i].first == result.parameters[i].first);
        CHECK(reloaded[i].second.data()[0] == result.parameters[i].second.data()[0]);
    }

    // The manifest is the canonical form of the config it ran with.
    const std::string manifest = file_bytes(dir.sub("manifest.json"));
    CHECK(manifest == run_config_to_json(config));

    SUBCASE("a rerun of the same config reproduces every artifact byte") {
        std::map<std::string, std::string> before;
        for (const auto& entry : fs::directory_iterator(dir.path))
            before[entry.path().filename().string()] = file_bytes(entry.path().string());
        (void)cmd_train(config);
        for (const auto& [name, bytes] : before)
            CHECK(file_bytes(dir.sub(name)) == bytes);
    }

    SUBCASE("the manifest re-ingests to the identical run") {
        const RunConfig back = load_run_config(dir.sub("manifest.json"));
        const std::string loss_before = file_bytes(dir.sub("loss.csv"));
        (void)cmd_train(back);
        CHECK(file_bytes(dir.sub("loss.csv")) == loss_before);
    }
}

TEST_CASE("a zero-step cmd_train leaves header-only CSVs and the initialization") {
    TempDir dir("spectron_cmd_train_zero");
    RunConfig config = tiny_config(dir.str());
    config.steps = 0;
    const TrainResult result = cmd_train(config);

    CHECK(file_bytes(dir.sub("loss.csv")) == "step,loss,lr\n");
    const std::string telemetry = file_bytes(dir.sub("telemetry.csv"));
    CHECK(line_count(telemetry) == 1); // header only

    const TensorList reloaded = read_checkpoint(dir.sub("checkpoint.spck"));
    REQUIRE(!reloaded.empty());
    REQUIRE(reloaded.size() == result.parameters.size());
    // Same seed, zero steps: the checkpoint is the untouched initialization.
    const TrainResult again = train_run(config);
    for (std::size_t i = 0; i < reloaded.size(); ++i) {
        const DenseMatrix& a = reloaded[i].second;
        const DenseMatrix& b = again.parameters[i].second;
        REQUIRE(a.size() == b.size());
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a.data()[j] == b.data()[j]);
    }
}

TEST_CASE("cmd_ablate ranks ten cells and is deterministic") {
    TempDir dir("spectron_cmd_ablate_test");
    RunConfig base = tiny_config(dir.str());
    base.steps = 4;
    const std::vector<AblationCell> cells = cmd_ablate(base);

    REQUIRE(cells.size() == 10);

    // Every variant appears at both learning rates, exactly once.
    std::set<std::pair<std::string, double>> seen;
    for (const AblationCell& c : cells) seen.insert({c.variant, c.eta});
    CHECK(seen.size() == 10);
    for (const char* v :
         {"spectron", "ortho_only", "specnorm_only", "naive_momentum", "adaptive_moments"}) {
        CHECK(seen.count({v, 0.001}) == 1);
        CHECK(seen.count({v, 0.01}) == 1);
    }

    // Returned cells are ranked: finite, non-diverged losses ascending first.
    for (std::size_t i = 1; i < cells.size(); ++i) {
        const bool prev_ok = std::isfinite(cells[i - 1].final_loss) && !cells[i - 1].diverged;
        const bool cur_ok = std::isfinite(cells[i].final_loss) && !cells[i].diverged;
        CHECK(prev_ok >= cur_ok);
        if (prev_ok && cur_ok) CHECK(cells[i - 1].final_loss <= cells[i].final_loss);
    }

    const std::string csv = file_bytes(dir.sub("ablation.csv"));
    CHECK(csv.rfind("rank,variant,eta,final_loss,max_dw_spec,diverged\n", 0) == 0);
    CHECK(line_count(csv) == 1 + 10);
    // Rank column counts 1..10 in order.
    std::istringstream rows(csv);
    std::string line;
    std::getline(rows, line);
    for (int rank = 1; rank <= 10; ++rank) {
        REQUIRE(std::getline(rows, line));
        CHECK(line.rfind(std::to_string(rank) + ",", 0) == 0);
    }

    SUBCASE("the summary reproduces byte-for-byte") {
        (void)cmd_ablate(base);
        CHECK(file_bytes(dir.sub("ablation.csv")) == csv);
    }

    SUBCASE("ablation without telemetry layers is refused") {
        base.telemetry_layers.clear();
        CHECK_THROWS_AS((void)run_ablation(base), std::invalid_argument);
    }
}

TEST_CASE("runs CSVs parse strictly with row-numbered diagnostics") {
    TempDir dir("spectron_runs_csv_test");
    const std::string path = dir.sub("runs.csv");

    write_file(path, "n_params,tokens,loss\n1e8,2e10,3.5\n2e8,1e10,3.25\n");
    const std::vector<RunPoint> points = read_runs_csv(path);
    REQUIRE(points.size() == 2);
    CHECK(points[0].n_params == 1e8);
    CHECK(points[0].tokens == 2e10);
    CHECK(points[0].loss == 3.5);
    CHECK(points[0].flops == doctest::Approx(6.0 * 1e8 * 2e10).epsilon(1e-12));

    auto error_of = [&](const std::string& content) {
        write_file(path, content);
        try {
            (void)read_runs_csv(path);
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    };

    CHECK(error_of("n,d,l\n1,2,3\n").find("row 1") != std::string::npos);
    CHECK(error_of("n_params,tokens,loss\n1e8,2e10\n").find("row 2") != std::string::npos);
    CHECK(error_of("n_params,tokens,loss\n1e8,2e10,3.5\nx,2,3\n").find("row 3") !=
          std::string::npos);
    CHECK(error_of("n_params,tokens,loss\n1e8,2e10,3.5,9\n").find("row 2") != std::string::npos);
    CHECK(error_of("n_params,tokens,loss\n-1,2e10,3.5\n").find("row 2") != std::string::npos);
    CHECK(error_of("n_params,tokens,loss\n").find("no data rows") != std::string::npos);
    CHECK(error_of("").find("empty") != std::string::npos);

    // Windows line endings are tolerated.
    write_file(path, "n_params,tokens,loss\r\n1e8,2e10,3.5\r\n");
    CHECK(read_runs_csv(path).size() == 1);

    CHECK_THROWS_AS((void)read_runs_csv(dir.sub("absent.csv")), std::invalid_argument);
}

TEST_CASE("isoflop fitting recovers the planted minima and writes one figure per budget") {
    TempDir dir("spectron_fit_isoflop_test");
    const std::string csv_path = dir.sub("runs.csv");
    write_file(csv_path, planted_csv());
    const std::string out = dir.sub("fit_out");
    cmd_fit(csv_path, "isoflop", out);

    const nlohmann::json doc = nlohmann::json::parse(file_bytes(out + "/fit.json"));
    CHECK(doc.at("mode") == "isoflop");
    REQUIRE(doc.at("curves").size() == 3);
    const PlantedSurface surface;
    const double budgets[] = {1e17, 1e19, 1e21};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& curve = doc.at("curves")[i];
        const double budget = curve.at("budget").get<double>();
        CHECK(budget == doctest::Approx(budgets[i]).epsilon(1e-9));
        const double planted = surface.n_opt(budget);
        CHECK(curve.at("n_opt").get<double>() ==
              doctest::Approx(planted).epsilon(0.03));
        CHECK(fs::exists(fs::path(out) / ("fit_budget_" + std::to_string(i + 1) + ".svg")));
    }
    // Power law through the three minima recovers the allocation exponent.
    const double exponent = doc.at("n_opt_power_law").at("exponent").get<double>();
    CHECK(std::fabs(exponent - 0.4548) <= 0.03);

    // Figures are plausible SVG documents.
    const std::string svg = file_bytes(out + "/fit_budget_1.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);

    SUBCASE("fit artifacts reproduce byte-for-byte") {
        const std::string json_before = file_bytes(out + "/fit.json");
        const std::string svg_before = file_bytes(out + "/fit_budget_2.svg");
        cmd_fit(csv_path, "isoflop", out);
        CHECK(file_bytes(out + "/fit.json") == json_before);
        CHECK(file_bytes(out + "/fit_budget_2.svg") == svg_before);
    }
}

TEST_CASE("parametric fitting recovers the planted surface") {
    TempDir dir("spectron_fit_parametric_test");
    const std::string csv_path = dir.sub("runs.csv");
    write_file(csv_path, planted_csv());
    const std::string out = dir.sub("fit_out");
    cmd_fit(csv_path, "parametric", out);

    const nlohmann::json doc = nlohmann::json::parse(file_bytes(out + "/fit.json"));
    CHECK(doc.at("mode") == "parametric");
    CHECK(std::fabs(doc.at("alpha").get<double>() - 0.398) <= 0.02);
    CHECK(std::fabs(doc.at("beta").get<double>() - 0.332) <= 0.02);
    CHECK(std::fabs(doc.at("irreducible").get<double>() - 1.777) <= 0.01);
    CHECK(doc.at("on_boundary").get<bool>() == false);
    const double a_n = doc.at("allocation").at("a_n").get<double>();
    const double a_d = doc.at("allocation").at("a_d").get<double>();
    CHECK(a_n + a_d == 1.0);
    CHECK(std::fabs(a_n - 0.4548) <= 0.03);
    CHECK(fs::exists(fs::path(out) / "fit_budget_1.svg"));
}

TEST_CASE("fit refuses bad modes and empty inputs") {
    TempDir dir("spectron_fit_errors_test");
    const std::string csv_path = dir.sub("runs.csv");
    write_file(csv_path, "n_params,tokens,loss\n");
    CHECK_THROWS_AS(cmd_fit(csv_path, "isoflop", dir.sub("out")), std::invalid_argument);

    write_file(csv_path, planted_csv());
    CHECK_THROWS_AS(cmd_fit(csv_path, "quadratic", dir.sub("out")), std::invalid_argument);
}

TEST_CASE("spectral traces compare the two update rules on one layer") {
    TempDir dir("spectron_trace_test");
    RunConfig config = tiny_config(dir.str());
    config.steps = 40;
    cmd_spectral_trace(config, "layers.0.attn.o");

    for (const char* name : {"trace.csv", "trace.svg", "manifest.json"})
        CHECK(fs::exists(dir.path / name));

    // One row per (step, variant), sorted by step then variant name.
    const std::string csv = file_bytes(dir.sub("trace.csv"));
    CHECK(csv.rfind("step,variant,dw_spec,w_spec,dy_rms,dy_rms_bound,rho\n", 0) == 0);
    std::istringstream rows(csv);
    std::string line;
    std::getline(rows, line);
    std::vector<std::pair<int, std::string>> keys;
    std::map<std::string, std::vector<double>> w_spec_by_variant;
    while (std::getline(rows, line)) {
        std::istringstream fields(line);
        std::string step_text, variant, dw, wspec;
        std::getline(fields, step_text, ',');
        std::getline(fields, variant, ',');
        std::getline(fields, dw, ',');
        std::getline(fields, wspec, ',');
        keys.emplace_back(std::stoi(step_text), variant);
        w_spec_by_variant[variant].push_back(std::stod(wspec));
    }
    REQUIRE(keys.size() == 2 * 40);
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    REQUIRE(w_spec_by_variant.count("spectron") == 1);
    REQUIRE(w_spec_by_variant.count("naive_momentum") == 1);
    CHECK(w_spec_by_variant["spectron"].size() == 40);

    // The constrained rule keeps the weight's spectral norm in a band no
    // wider than the naive rule's on the same seed.
    auto band_ratio = [](const std::vector<double>& values) {
        double lo = values[0], hi = values[0];
        for (const double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return hi / lo;
    };
    CHECK(band_ratio(w_spec_by_variant["spectron"]) <=
          band_ratio(w_spec_by_variant["naive_momentum"]) + 1e-12);

    const std::string svg = file_bytes(dir.sub("trace.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("layers.0.attn.o") != std::string::npos);

    SUBCASE("unknown layers are listed against the valid ids") {
        std::string message;
        try {
            cmd_spectral_trace(config, "layers.7.ffn.w9");
        } catch (const std::invalid_argument& e) {
            message = e.what();
        }
        CHECK(message.find("layers.7.ffn.w9") != std::string::npos);
        CHECK(message.find("layers.0.attn.q") != std::string::npos);
    }

    SUBCASE("the trace reproduces byte-for-byte") {
        const std::string before = file_bytes(dir.sub("trace.csv"));
        cmd_spectral_trace(config, "layers.0.attn.o");
        CHECK(file_bytes(dir.sub("trace.csv")) == before);
    }
}
