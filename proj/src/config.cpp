#include "spectron/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace spectron {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

/// Rejects keys outside `allowed`, naming the field path.
void check_known_fields(const ordered_json& obj, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* name : allowed)
            if (item.key() == name) {
                known = true;
                break;
            }
        if (!known) fail("config field '" + path + item.key() + "' is not recognized");
    }
}

double get_number(const ordered_json& obj, const char* key, const std::string& path,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_number()) fail("config field '" + path + key + "' must be a number");
    return v.get<double>();
}

std::int64_t get_integer(const ordered_json& obj, const char* key, const std::string& path,
                         std::int64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_number_integer()) fail("config field '" + path + key + "' must be an integer");
    return v.get<std::int64_t>();
}

std::uint64_t get_unsigned(const ordered_json& obj, const char* key, const std::string& path,
                           std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_number_integer())
        fail("config field '" + path + key + "' must be a non-negative integer");
    if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)
        fail("config field '" + path + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::size_t get_size(const ordered_json& obj, const char* key, const std::string& path,
                     std::size_t fallback) {
    const std::uint64_t v = get_unsigned(obj, key, path, fallback);
    return static_cast<std::size_t>(v);
}

bool get_bool(const ordered_json& obj, const char* key, const std::string& path, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_boolean()) fail("config field '" + path + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_string(const ordered_json& obj, const char* key, const std::string& path,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_string()) fail("config field '" + path + key + "' must be a string");
    return v.get<std::string>();
}

ModelConfig parse_model(const ordered_json& obj, const ModelConfig& defaults) {
    if (!obj.is_object()) fail("config field 'model' must be an object");
    check_known_fields(obj, "model.",
                       {"vocab", "d_model", "n_layers", "n_heads", "rank_ratio", "seq_len",
                        "factorize_ffn_only", "tie_head"});
    ModelConfig m = defaults;
    m.vocab = get_size(obj, "vocab", "model.", defaults.vocab);
    m.d_model = get_size(obj, "d_model", "model.", defaults.d_model);
    m.n_layers = get_size(obj, "n_layers", "model.", defaults.n_layers);
    m.n_heads = get_size(obj, "n_heads", "model.", defaults.n_heads);
    m.rank_ratio = get_number(obj, "rank_ratio", "model.", defaults.rank_ratio);
    m.seq_len = get_size(obj, "seq_len", "model.", defaults.seq_len);
    m.factorize_ffn_only =
        get_bool(obj, "factorize_ffn_only", "model.", defaults.factorize_ffn_only);
    m.tie_head = get_bool(obj, "tie_head", "model.", defaults.tie_head);
    return m;
}

OptimizerConfig parse_optimizer(const ordered_json& obj, const OptimizerConfig& defaults) {
    if (!obj.is_object()) fail("config field 'optimizer' must be an object");
    check_known_fields(obj, "optimizer.",
                       {"variant", "eta", "beta", "k_ns", "k_power", "weight_decay", "schedule"});
    OptimizerConfig o = defaults;
    const std::string variant =
        get_string(obj, "variant", "optimizer.", variant_name(defaults.variant));
    o.variant = parse_variant(variant);
    o.eta = get_number(obj, "eta", "optimizer.", defaults.eta);
    o.beta = get_number(obj, "beta", "optimizer.", defaults.beta);
    o.k_ns = static_cast<int>(get_integer(obj, "k_ns", "optimizer.", defaults.k_ns));
    o.k_power = static_cast<int>(get_integer(obj, "k_power", "optimizer.", defaults.k_power));
    o.weight_decay = get_number(obj, "weight_decay", "optimizer.", defaults.weight_decay);
    o.schedule = get_string(obj, "schedule", "optimizer.", defaults.schedule);
    return o;
}

std::size_t line_of_offset(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

} // namespace

void RunConfig::validate() const {
    model.validate();
    if (optimizer.eta <= 0.0) fail("config field 'optimizer.eta' must be positive");
    if (!(optimizer.beta >= 0.0 && optimizer.beta < 1.0))
        fail("config field 'optimizer.beta' must lie in [0, 1)");
    if (optimizer.k_ns < 1) fail("config field 'optimizer.k_ns' must be at least 1");
    if (optimizer.k_power < 1) fail("config field 'optimizer.k_power' must be at least 1");
    if (optimizer.weight_decay < 0.0)
        fail("config field 'optimizer.weight_decay' must be non-negative");
    if (optimizer.schedule != "warmup_cosine" && optimizer.schedule != "constant")
        fail("config field 'optimizer.schedule' must be 'warmup_cosine' or 'constant'");
    if (steps < 0) fail("config field 'steps' must be non-negative");
    if (batch < 1) fail("config field 'batch' must be at least 1");
    if (!(warmup_frac >= 0.0 && warmup_frac <= 1.0))
        fail("config field 'warmup_frac' must lie in [0, 1]");
    for (const std::string& layer : telemetry_layers)
        if (layer.empty()) fail("config field 'telemetry_layers' must not contain empty names");
    if (output_dir.empty()) fail("config field 'output_dir' must not be empty");
}

RunConfig default_desk_config() {
    RunConfig config;
    // Small enough that the synthetic task is learnable in about a minute on
    // one core, large enough that divergence contrasts are visible: six
    // layers give unconstrained optimizers room to compound per-layer
    // overshoot, and the short warmup (20 of 1000 steps) stops the schedule
    // from hiding the early momentum transient that the spectral telemetry
    // is meant to expose.
    config.model.vocab = 8;
    config.model.n_layers = 6;
    config.steps = 1000;
    config.warmup_frac = 0.02;
    config.telemetry_layers = {"layers.0.attn.o"};
    return config;
}

RunConfig parse_run_config(const std::string& json_text) {
    ordered_json doc;
    try {
        doc = ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        fail("config is not valid JSON (line " +
             std::to_string(line_of_offset(json_text, e.byte > 0 ? e.byte - 1 : 0)) +
             "): " + e.what());
    }
    if (!doc.is_object()) fail("config root must be a JSON object");
    check_known_fields(doc, "",
                       {"seed", "model", "optimizer", "steps", "batch", "warmup_frac",
                        "telemetry_layers", "output_dir"});

    const RunConfig defaults = default_desk_config();
    RunConfig config = defaults;
    config.seed = get_unsigned(doc, "seed", "", defaults.seed);
    if (doc.contains("model")) config.model = parse_model(doc.at("model"), defaults.model);
    if (doc.contains("optimizer"))
        config.optimizer = parse_optimizer(doc.at("optimizer"), defaults.optimizer);
    config.steps = get_integer(doc, "steps", "", defaults.steps);
    config.batch = get_integer(doc, "batch", "", defaults.batch);
    config.warmup_frac = get_number(doc, "warmup_frac", "", defaults.warmup_frac);
    if (doc.contains("telemetry_layers")) {
        const ordered_json& arr = doc.at("telemetry_layers");
        if (!arr.is_array()) fail("config field 'telemetry_layers' must be an array of strings");
        config.telemetry_layers.clear();
        for (const ordered_json& item : arr) {
            if (!item.is_string())
                fail("config field 'telemetry_layers' must be an array of strings");
            config.telemetry_layers.push_back(item.get<std::string>());
        }
    }
    config.output_dir = get_string(doc, "output_dir", "", defaults.output_dir);
    config.validate();
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_run_config(buffer.str());
    } catch (const std::invalid_argument& e) {
        fail(std::string(e.what()) + " [" + path + "]");
    }
}

std::string run_config_to_json(const RunConfig& config) {
    ordered_json doc;
    doc["seed"] = config.seed;
    doc["model"] = {{"vocab", config.model.vocab},
                    {"d_model", config.model.d_model},
                    {"n_layers", config.model.n_layers},
                    {"n_heads", config.model.n_heads},
                    {"rank_ratio", config.model.rank_ratio},
                    {"seq_len", config.model.seq_len},
                    {"factorize_ffn_only", config.model.factorize_ffn_only},
                    {"tie_head", config.model.tie_head}};
    doc["optimizer"] = {{"variant", variant_name(config.optimizer.variant)},
                        {"eta", config.optimizer.eta},
                        {"beta", config.optimizer.beta},
                        {"k_ns", config.optimizer.k_ns},
                        {"k_power", config.optimizer.k_power},
                        {"weight_decay", config.optimizer.weight_decay},
                        {"schedule", config.optimizer.schedule}};
    doc["steps"] = config.steps;
    doc["batch"] = config.batch;
    doc["warmup_frac"] = config.warmup_frac;
    doc["telemetry_layers"] = config.telemetry_layers;
    doc["output_dir"] = config.output_dir;
    return doc.dump(2) + "\n";
}

} // namespace spectron
