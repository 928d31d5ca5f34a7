#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spectron/commands.hpp"
#include "spectron/config.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path,
                    "JSON run config; the built-in default config applies when omitted");
    cmd->add_option("--out", flags.out_dir, "output directory (overrides the config)");
    cmd->add_option("--seed", flags.seed, "seed (overrides the config)")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
}

spectron::RunConfig resolve_config(const CommonFlags& flags) {
    spectron::RunConfig config = flags.config_path.empty()
                                     ? spectron::default_desk_config()
                                     : spectron::load_run_config(flags.config_path);
    if (!flags.out_dir.empty()) config.output_dir = flags.out_dir;
    if (flags.seed_set) config.seed = flags.seed;
    config.validate();
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"training, ablation, telemetry, and scaling-fit runner for "
                 "spectrally constrained low-rank models"};
    app.require_subcommand(1);

    CommonFlags train_flags, ablate_flags, trace_flags;
    std::string trace_layer = "layers.0.attn.o";
    std::string fit_input, fit_mode, fit_out = "fit_out";

    CLI::App* train = app.add_subcommand("train", "train one run and write its artifacts");
    add_common_flags(train, train_flags);

    CLI::App* ablate =
        app.add_subcommand("ablate", "run every optimizer variant at two learning rates");
    add_common_flags(ablate, ablate_flags);

    CLI::App* trace = app.add_subcommand(
        "spectral-trace", "trace per-step spectral telemetry for one layer across variants");
    add_common_flags(trace, trace_flags);
    trace->add_option("--layer", trace_layer, "layer id to trace");

    CLI::App* fit = app.add_subcommand("fit", "fit scaling laws to a runs CSV");
    fit->add_option("input", fit_input, "CSV with header n_params,tokens,loss")->required();
    fit->add_option("--mode", fit_mode, "isoflop or parametric")
        ->required()
        ->check(CLI::IsMember({"isoflop", "parametric"}));
    fit->add_option("--out", fit_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train->parsed()) {
            spectron::cmd_train(resolve_config(train_flags));
        } else if (ablate->parsed()) {
            spectron::cmd_ablate(resolve_config(ablate_flags));
        } else if (trace->parsed()) {
            spectron::cmd_spectral_trace(resolve_config(trace_flags), trace_layer);
        } else if (fit->parsed()) {
            spectron::cmd_fit(fit_input, fit_mode, fit_out);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
