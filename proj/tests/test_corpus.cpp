#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "spectron/corpus.hpp"

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

} // namespace

TEST_CASE("transition table rows are distributions with the pinned entropy") {
    for (const std::size_t vocab : {std::size_t{8}, std::size_t{16}}) {
        const MarkovTable table = make_transition_table(2024, vocab);
        const double target = 0.6 * std::log(static_cast<double>(vocab));
        for (std::size_t a = 0; a < vocab; ++a)
            for (std::size_t b = 0; b < vocab; ++b) {
                const double* r = table.row(a, b);
                double sum = 0.0, entropy = 0.0;
                for (std::size_t j = 0; j < vocab; ++j) {
                    CHECK(r[j] >= 0.0);
                    sum += r[j];
                    if (r[j] > 0.0) entropy -= r[j] * std::log(r[j]);
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
                CHECK(std::fabs(entropy - target) <= 1e-9);
            }
        // Per-row sharpening pins the whole chain's entropy rate too.
        CHECK(std::fabs(table.entropy_rate() - target) <= 1e-9);
    }
}

TEST_CASE("stationary context distribution is a fixed point summing to one") {
    const MarkovTable table = make_transition_table(5, 8);
    const std::vector<double> pi = table.stationary_contexts();
    double total = 0.0;
    for (double v : pi) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

    // One more application of the context chain must not move it.
    std::vector<double> next(pi.size(), 0.0);
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t c = 0; c < 8; ++c)
                next[b * 8 + c] += pi[a * 8 + b] * table.prob(a, b, c);
    for (std::size_t i = 0; i < pi.size(); ++i) CHECK(std::fabs(next[i] - pi[i]) <= 1e-12);

    const std::vector<double> unigram = table.stationary_unigram();
    double mass = 0.0;
    for (double v : unigram) mass += v;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical seeds give identical streams; different seeds diverge") {
    const auto a = synth_corpus(77, 8, 100000);
    const auto b = synth_corpus(77, 8, 100000);
    REQUIRE(a.size() == 100000);
    CHECK(a == b);

    const auto c = synth_corpus(78, 8, 100000);
    CHECK(a != c);

    for (std::uint16_t t : a) CHECK(t < 8);

    CHECK(synth_corpus(1, 8, 0).empty());
    CHECK(synth_corpus(1, 8, 1).size() == 1);
    CHECK_THROWS_AS((void)synth_corpus(1, 1, 10), std::invalid_argument);
    CHECK_THROWS_AS((void)synth_corpus(1, 70000, 10), std::invalid_argument);
}

TEST_CASE("empirical bigram-conditional statistics converge to the table") {
    const std::size_t vocab = 8;
    const std::uint64_t seed = 13;
    const MarkovTable table = make_transition_table(seed, vocab);
    const auto stream = synth_corpus(seed, vocab, 1000000);

    std::vector<std::vector<double>> counts(vocab * vocab, std::vector<double>(vocab, 0.0));
    for (std::size_t t = 2; t < stream.size(); ++t)
        counts[stream[t - 2] * vocab + stream[t - 1]][stream[t]] += 1.0;

    // Occupancy-weighted mean total-variation distance between empirical
    // conditionals and the true rows.
    double weighted_tv = 0.0, total = 0.0;
    for (std::size_t a = 0; a < vocab; ++a)
        for (std::size_t b = 0; b < vocab; ++b) {
            const auto& row_counts = counts[a * vocab + b];
            double n = 0.0;
            for (double v : row_counts) n += v;
            if (n == 0.0) continue;
            const double* truth = table.row(a, b);
            double tv = 0.0;
            for (std::size_t j = 0; j < vocab; ++j)
                tv += std::fabs(row_counts[j] / n - truth[j]);
            weighted_tv += 0.5 * tv * n;
            total += n;
        }
    CHECK(total > 0.0);
    CHECK(weighted_tv / total <= 0.02);
}

TEST_CASE("knowing two tokens of context beats the marginal predictor") {
    const std::size_t vocab = 8;
    const MarkovTable table = make_transition_table(99, vocab);

    // Held-out continuation: the tail of a longer stream from the same chain.
    const auto stream = synth_corpus(99, vocab, 200000);
    const std::size_t held_start = 100000;

    const std::vector<double> unigram = table.stationary_unigram();
    double ce_order2 = 0.0, ce_order0 = 0.0;
    std::size_t n = 0;
    for (std::size_t t = held_start; t < stream.size(); ++t) {
        ce_order2 -= std::log(table.prob(stream[t - 2], stream[t - 1], stream[t]));
        ce_order0 -= std::log(unigram[stream[t]]);
        ++n;
    }
    ce_order2 /= static_cast<double>(n);
    ce_order0 /= static_cast<double>(n);

    CHECK(ce_order2 < ce_order0);
    CHECK(ce_order0 - ce_order2 > 0.1);
    // The oracle's cross-entropy concentrates on the designed entropy rate.
    CHECK(std::fabs(ce_order2 - 0.6 * std::log(8.0)) < 0.02);
}

TEST_CASE("token cache round-trips and rejects corrupted files") {
    const std::string path = temp_path("spectron_tokens_test.bin");
    PathGuard guard(path);

    const auto tokens = synth_corpus(3, 12, 5000);
    write_token_file(path, 12, tokens);
    const TokenFile back = read_token_file(path);
    CHECK(back.vocab == 12);
    CHECK(back.tokens == tokens);

    SUBCASE("empty payload is a valid cache") {
        write_token_file(path, 12, {});
        const TokenFile empty = read_token_file(path);
        CHECK(empty.vocab == 12);
        CHECK(empty.tokens.empty());
    }

    SUBCASE("bad magic is rejected") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "XXXX then some bytes";
        out.close();
        CHECK_THROWS_AS((void)read_token_file(path), std::runtime_error);
    }

    SUBCASE("truncated payload is rejected") {
        write_token_file(path, 12, tokens);
        std::filesystem::resize_file(path, 8 + 2 * 100 + 1); // odd tail byte
        CHECK_THROWS_AS((void)read_token_file(path), std::runtime_error);
    }

    SUBCASE("token outside declared vocab is rejected on write") {
        CHECK_THROWS_AS(write_token_file(path, 4, {0, 1, 5}), std::invalid_argument);
    }

    SUBCASE("missing file is reported") {
        CHECK_THROWS_AS((void)read_token_file(temp_path("no_such_tokens.bin")),
                        std::runtime_error);
    }
}
