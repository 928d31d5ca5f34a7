#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "doctest.h"
#include "spectron/config.hpp"

using namespace spectron;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

struct PathGuard {
    std::string path;
    explicit PathGuard(std::string p) : path(std::move(p)) {}
    ~PathGuard() { std::remove(path.c_str()); }
};

/// What a thrown invalid_argument said, or "" when nothing was thrown.
template <typename Fn> std::string error_text(Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        return e.what();
    }
    return "";
}

bool config_equal(const RunConfig& a, const RunConfig& b) {
    return run_config_to_json(a) == run_config_to_json(b);
}

} // namespace

TEST_CASE("desk defaults are the documented small-scale run") {
    const RunConfig c = default_desk_config();
    CHECK(c.seed == 42);
    CHECK(c.model.vocab == 8);
    CHECK(c.model.d_model == 32);
    CHECK(c.model.n_layers == 6);
    CHECK(c.model.n_heads == 4);
    CHECK(c.model.rank_ratio == 0.25);
    CHECK(c.model.seq_len == 32);
    CHECK(c.model.factorize_ffn_only == false);
    CHECK(c.model.tie_head == false);
    CHECK(c.optimizer.variant == OptimizerVariant::Spectron);
    CHECK(c.optimizer.eta == 0.01);
    CHECK(c.optimizer.beta == 0.95);
    CHECK(c.optimizer.k_ns == 5);
    CHECK(c.optimizer.k_power == 1);
    CHECK(c.optimizer.weight_decay == 0.0);
    CHECK(c.optimizer.schedule == "warmup_cosine");
    CHECK(c.steps == 1000);
    CHECK(c.batch == 8);
    CHECK(c.warmup_frac == 0.02);
    REQUIRE(c.telemetry_layers.size() == 1);
    CHECK(c.telemetry_layers[0] == "layers.0.attn.o");
    CHECK(c.output_dir == "run_out");
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("every field is optional and falls back to the desk default") {
    CHECK(config_equal(parse_run_config("{}"), default_desk_config()));

    // A partial document only overrides what it mentions.
    const RunConfig c = parse_run_config(R"({"model": {"n_layers": 3}, "batch": 2})");
    CHECK(c.model.n_layers == 3);
    CHECK(c.batch == 2);
    CHECK(c.model.vocab == 8);
    CHECK(c.steps == 1000);
}

TEST_CASE("canonical JSON round-trips a fully customized config") {
    RunConfig c;
    c.seed = 7;
    c.model.vocab = 11;
    c.model.d_model = 24;
    c.model.n_layers = 1;
    c.model.n_heads = 3;
    c.model.rank_ratio = 0.5;
    c.model.seq_len = 9;
    c.model.factorize_ffn_only = true;
    c.model.tie_head = true;
    c.optimizer.variant = OptimizerVariant::SpecNormOnly;
    c.optimizer.eta = 0.25;
    c.optimizer.beta = 0.5;
    c.optimizer.k_ns = 3;
    c.optimizer.k_power = 2;
    c.optimizer.weight_decay = 0.125;
    c.optimizer.schedule = "constant";
    c.steps = 17;
    c.batch = 3;
    c.warmup_frac = 0.75;
    c.telemetry_layers = {"layers.0.ffn.w1", "layers.0.ffn.w2"};
    c.output_dir = "elsewhere";

    const std::string text = run_config_to_json(c);
    const RunConfig back = parse_run_config(text);
    CHECK(run_config_to_json(back) == text);
    CHECK(back.seed == 7);
    CHECK(back.model.tie_head == true);
    CHECK(back.optimizer.variant == OptimizerVariant::SpecNormOnly);
    CHECK(back.telemetry_layers == c.telemetry_layers);

    // Serialization is stable: same config, same bytes.
    CHECK(run_config_to_json(c) == text);
}

TEST_CASE("every optimizer variant name parses and serializes") {
    for (const char* name :
         {"spectron", "ortho_only", "specnorm_only", "naive_momentum", "adaptive_moments"}) {
        const std::string doc = std::string(R"({"optimizer": {"variant": ")") + name + "\"}}";
        const RunConfig c = parse_run_config(doc);
        CHECK(variant_name(c.optimizer.variant) == name);
    }
    const std::string msg =
        error_text([] { (void)parse_run_config(R"({"optimizer": {"variant": "sgd"}})"); });
    CHECK(msg.find("sgd") != std::string::npos);
}

TEST_CASE("unknown fields are rejected with their full path") {
    const std::string top = error_text([] { (void)parse_run_config(R"({"stepz": 3})"); });
    CHECK(top.find("'stepz'") != std::string::npos);

    const std::string nested =
        error_text([] { (void)parse_run_config(R"({"model": {"width": 8}})"); });
    CHECK(nested.find("'model.width'") != std::string::npos);

    const std::string opt =
        error_text([] { (void)parse_run_config(R"({"optimizer": {"lr": 0.1}})"); });
    CHECK(opt.find("'optimizer.lr'") != std::string::npos);
}

TEST_CASE("type errors name the offending field") {
    CHECK(error_text([] { (void)parse_run_config(R"({"steps": "many"})"); }).find("'steps'") !=
          std::string::npos);
    CHECK(error_text([] { (void)parse_run_config(R"({"seed": -4})"); }).find("'seed'") !=
          std::string::npos);
    CHECK(error_text([] {
              (void)parse_run_config(R"({"model": {"vocab": 2.5}})");
          }).find("'model.vocab'") != std::string::npos);
    CHECK(error_text([] {
              (void)parse_run_config(R"({"optimizer": {"eta": "fast"}})");
          }).find("'optimizer.eta'") != std::string::npos);
    CHECK(error_text([] {
              (void)parse_run_config(R"({"telemetry_layers": "layers.0.attn.o"})");
          }).find("telemetry_layers") != std::string::npos);
    CHECK(error_text([] {
              (void)parse_run_config(R"({"telemetry_layers": [3]})");
          }).find("telemetry_layers") != std::string::npos);
}

TEST_CASE("syntax errors report the line number") {
    const std::string msg = error_text([] {
        (void)parse_run_config("{\n  \"steps\": 5,\n  \"batch\": oops\n}");
    });
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("not valid JSON") != std::string::npos);
}

TEST_CASE("validate rejects out-of-range hyperparameters by name") {
    auto broken = [](auto&& mutate) {
        RunConfig c = default_desk_config();
        mutate(c);
        return error_text([&] { c.validate(); });
    };
    CHECK(broken([](RunConfig& c) { c.optimizer.eta = 0.0; }).find("eta") != std::string::npos);
    CHECK(broken([](RunConfig& c) { c.optimizer.beta = 1.0; }).find("beta") != std::string::npos);
    CHECK(broken([](RunConfig& c) { c.optimizer.beta = -0.1; }).find("beta") != std::string::npos);
    CHECK(broken([](RunConfig& c) { c.optimizer.k_ns = 0; }).find("k_ns") != std::string::npos);
    CHECK(broken([](RunConfig& c) { c.optimizer.k_power = 0; }).find("k_power") !=
          std::string::npos);
    CHECK(broken([](RunConfig& c) { c.optimizer.weight_decay = -1e-9; }).find("weight_decay") !=
          std::string::npos);
    CHECK(broken([](RunConfig& c) { c.optimizer.schedule = "linear"; }).find("schedule") !=
          std::string::npos);
    CHECK(broken([](RunConfig& c) { c.steps = -1; }).find("steps") != std::string::npos);
    CHECK(broken([](RunConfig& c) { c.batch = 0; }).find("batch") != std::string::npos);
    CHECK(broken([](RunConfig& c) { c.warmup_frac = 1.5; }).find("warmup_frac") !=
          std::string::npos);
    CHECK(broken([](RunConfig& c) { c.telemetry_layers = {""}; }).find("telemetry_layers") !=
          std::string::npos);
    CHECK(broken([](RunConfig& c) { c.output_dir = ""; }).find("output_dir") !=
          std::string::npos);
    CHECK(broken([](RunConfig& c) { c.model.n_heads = 5; }).find("n_heads") != std::string::npos);
}

TEST_CASE("config files load with the path in any error") {
    const std::string path = temp_path("spectron_config_test.json");
    PathGuard guard(path);

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << R"({"seed": 9, "steps": 4})";
    }
    const RunConfig c = load_run_config(path);
    CHECK(c.seed == 9);
    CHECK(c.steps == 4);

    SUBCASE("missing file names the path") {
        const std::string missing = temp_path("no_such_config.json");
        const std::string msg = error_text([&] { (void)load_run_config(missing); });
        CHECK(msg.find(missing) != std::string::npos);
    }

    SUBCASE("parse errors carry the path too") {
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            out << R"({"bogus": 1})";
        }
        const std::string msg = error_text([&] { (void)load_run_config(path); });
        CHECK(msg.find("'bogus'") != std::string::npos);
        CHECK(msg.find(path) != std::string::npos);
    }
}
