#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "spectron/train.hpp"

using namespace spectron;

namespace {

/// A config small enough that a full run takes well under a second.
RunConfig tiny_config() {
    RunConfig c;
    c.seed = 7;
    c.model.vocab = 8;
    c.model.d_model = 16;
    c.model.n_layers = 1;
    c.model.n_heads = 4;
    c.model.rank_ratio = 0.25;
    c.model.seq_len = 8;
    c.steps = 6;
    c.batch = 2;
    c.warmup_frac = 0.05;
    c.telemetry_layers = {"layers.0.attn.o"};
    c.output_dir = "unused";
    return c;
}

bool bit_equal(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i]))
            return false;
    return true;
}

bool bit_equal(const TensorList& a, const TensorList& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].first != b[i].first || !bit_equal(a[i].second, b[i].second)) return false;
    return true;
}

} // namespace

TEST_CASE("constant schedule returns eta at every step") {
    OptimizerConfig opt;
    opt.eta = 0.125;
    opt.schedule = "constant";
    CHECK(scheduled_lr(opt, 0.05, 0, 100) == 0.125);
    CHECK(scheduled_lr(opt, 0.05, 50, 100) == 0.125);
    CHECK(scheduled_lr(opt, 0.05, 99, 100) == 0.125);
}

TEST_CASE("warmup-cosine ramps linearly then decays along a half cosine") {
    OptimizerConfig opt;
    opt.eta = 0.01;
    opt.schedule = "warmup_cosine";
    const std::int64_t total = 100;
    const double wf = 0.05; // 5 warmup steps

    // Linear ramp: (step+1)/warmup of eta.
    CHECK(scheduled_lr(opt, wf, 0, total) == doctest::Approx(0.002).epsilon(1e-12));
    CHECK(scheduled_lr(opt, wf, 3, total) == doctest::Approx(0.008).epsilon(1e-12));
    CHECK(scheduled_lr(opt, wf, 4, total) == doctest::Approx(0.01).epsilon(1e-12));

    // Cosine from the end of warmup: full eta there, about half near the
    // midpoint of the remaining span, approaching zero at the final step.
    CHECK(scheduled_lr(opt, wf, 5, total) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(scheduled_lr(opt, wf, 52, total) ==
          doctest::Approx(0.01 * 0.5 * (1.0 + std::cos(std::numbers::pi * 47.0 / 95.0)))
              .epsilon(1e-12));
    CHECK(scheduled_lr(opt, wf, 52, total) < 0.55 * 0.01);
    CHECK(scheduled_lr(opt, wf, 52, total) > 0.45 * 0.01);
    const double last = scheduled_lr(opt, wf, 99, total);
    CHECK(last > 0.0);
    CHECK(last < 0.001);

    // The schedule never exceeds eta and is never negative.
    for (std::int64_t s = 0; s < total; ++s) {
        const double lr = scheduled_lr(opt, wf, s, total);
        CHECK(lr > 0.0);
        CHECK(lr <= 0.01 + 1e-15);
    }

    SUBCASE("zero warmup starts at full eta") {
        CHECK(scheduled_lr(opt, 0.0, 0, total) == doctest::Approx(0.01).epsilon(1e-12));
    }

    SUBCASE("all-warmup run ramps to eta at the final step") {
        CHECK(scheduled_lr(opt, 1.0, 99, total) == doctest::Approx(0.01).epsilon(1e-12));
        CHECK(scheduled_lr(opt, 1.0, 0, total) == doctest::Approx(0.0001).epsilon(1e-12));
    }

    SUBCASE("out-of-range steps are refused") {
        CHECK_THROWS_AS((void)scheduled_lr(opt, wf, -1, total), std::invalid_argument);
        CHECK_THROWS_AS((void)scheduled_lr(opt, wf, total, total), std::invalid_argument);
        CHECK_THROWS_AS((void)scheduled_lr(opt, wf, 0, 0), std::invalid_argument);
    }
}

TEST_CASE("factorized layer ids enumerate attention and feedforward in order") {
    ModelConfig m;
    m.n_layers = 2;
    const std::vector<std::string> ids = factorized_layer_ids(m);
    const std::vector<std::string> expect = {
        "layers.0.attn.q", "layers.0.attn.k", "layers.0.attn.v", "layers.0.attn.o",
        "layers.0.ffn.w1", "layers.0.ffn.w2", "layers.1.attn.q", "layers.1.attn.k",
        "layers.1.attn.v", "layers.1.attn.o", "layers.1.ffn.w1", "layers.1.ffn.w2"};
    CHECK(ids == expect);

    m.factorize_ffn_only = true;
    const std::vector<std::string> ffn_ids = factorized_layer_ids(m);
    const std::vector<std::string> ffn_expect = {"layers.0.ffn.w1", "layers.0.ffn.w2",
                                                 "layers.1.ffn.w1", "layers.1.ffn.w2"};
    CHECK(ffn_ids == ffn_expect);
}

TEST_CASE("the training corpus is sized for the run and capped for long ones") {
    RunConfig c = tiny_config();
    c.steps = 2;
    c.batch = 3;
    // window = seq_len + 1 = 9; 2 steps x 3 windows each.
    CHECK(training_corpus(c).size() == 2 * 3 * 9);

    c.steps = 1000000;
    CHECK(training_corpus(c).size() == (std::size_t{1} << 18));

    c.steps = 0; // still at least one window plus a token
    CHECK(training_corpus(c).size() >= c.model.seq_len + 2);

    // Same config, same stream.
    c.steps = 3;
    CHECK(training_corpus(c) == training_corpus(c));
}

TEST_CASE("identical configs train to bit-identical results") {
    const RunConfig c = tiny_config();
    const TrainResult a = train_run(c);
    const TrainResult b = train_run(c);

    REQUIRE(a.steps.size() == 6);
    REQUIRE(b.steps.size() == 6);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].step == static_cast<std::int64_t>(i));
        CHECK(std::bit_cast<std::uint64_t>(a.steps[i].loss) ==
              std::bit_cast<std::uint64_t>(b.steps[i].loss));
        CHECK(a.steps[i].lr == b.steps[i].lr);
    }
    CHECK(bit_equal(a.parameters, b.parameters));
    REQUIRE(a.telemetry.size() == b.telemetry.size());
    for (std::size_t i = 0; i < a.telemetry.size(); ++i)
        CHECK(a.telemetry[i].dw_spec == b.telemetry[i].dw_spec);

    // A different seed moves the numbers.
    RunConfig other = c;
    other.seed = 8;
    const TrainResult d = train_run(other);
    CHECK(a.steps[0].loss != d.steps[0].loss);
}

TEST_CASE("training at a sane rate learns and reports its bookkeeping") {
    RunConfig c = tiny_config();
    c.steps = 60;
    const TrainResult r = train_run(c);

    CHECK(!r.diverged);
    CHECK(r.initial_loss == r.steps.front().loss);
    CHECK(r.final_loss == r.steps.back().loss);
    CHECK(r.final_loss < r.initial_loss); // even a tiny model makes progress
    CHECK(r.max_dw_spec > 0.0);

    // The logged learning rates are exactly the schedule's values.
    for (const StepLog& s : r.steps)
        CHECK(s.lr == scheduled_lr(c.optimizer, c.warmup_frac, s.step, c.steps));

    // Telemetry covers exactly the configured layer at every step.
    REQUIRE(r.telemetry.size() == 60);
    for (const TelemetryRecord& t : r.telemetry) {
        CHECK(t.layer_id == "layers.0.attn.o");
        CHECK(t.dw_spec >= 0.0);
        CHECK(t.dy_rms <= t.dy_rms_bound + 1e-12);
    }
    double max_seen = 0.0;
    for (const TelemetryRecord& t : r.telemetry) max_seen = std::max(max_seen, t.dw_spec);
    CHECK(r.max_dw_spec == max_seen);

    // Parameters come back in checkpoint order with every factor present.
    bool found_factor = false;
    for (const auto& [name, tensor] : r.parameters) {
        CHECK(tensor.size() > 0);
        if (name == "layers.0.attn.o.A") found_factor = true;
    }
    CHECK(found_factor);
}

TEST_CASE("a zero-step run is the initialization") {
    RunConfig c = tiny_config();
    c.steps = 0;
    const TrainResult r = train_run(c);
    CHECK(r.steps.empty());
    CHECK(r.telemetry.empty());
    CHECK(std::isnan(r.initial_loss));
    CHECK(std::isnan(r.final_loss));
    CHECK(!r.diverged);
    CHECK(r.max_dw_spec == 0.0);
    REQUIRE(!r.parameters.empty());

    // The initialization is shared with any same-seed run.
    const TrainResult again = train_run(c);
    CHECK(bit_equal(r.parameters, again.parameters));
}

TEST_CASE("an overflowing update marks the run diverged instead of throwing") {
    // Normalization layers make the loss scale-invariant, so moderate rates
    // merely thrash; a rate this size overflows the factor product on the
    // first update and the next forward pass goes non-finite.
    RunConfig c = tiny_config();
    c.steps = 40;
    c.optimizer.variant = OptimizerVariant::NaiveMomentum;
    c.optimizer.eta = 1.0e280;
    c.optimizer.schedule = "constant";
    const TrainResult r = train_run(c);
    CHECK(r.diverged);
    CHECK(r.steps.size() < 40); // stopped early
    // Whatever was logged before the blow-up is preserved.
    CHECK(!r.steps.empty());
}

TEST_CASE("unknown telemetry layers are refused with the valid ids") {
    RunConfig c = tiny_config();
    c.telemetry_layers = {"layers.3.attn.o"};
    std::string message;
    try {
        (void)train_run(c);
    } catch (const std::invalid_argument& e) {
        message = e.what();
    }
    CHECK(message.find("layers.3.attn.o") != std::string::npos);
    CHECK(message.find("layers.0.attn.q") != std::string::npos);
    CHECK(message.find("layers.0.ffn.w2") != std::string::npos);
}

TEST_CASE("a corpus shorter than one window is refused") {
    const RunConfig c = tiny_config();
    const std::vector<std::uint16_t> tokens(c.model.seq_len, 0); // one short of a window
    CHECK_THROWS_AS((void)train_run(c, tokens), std::invalid_argument);
}
