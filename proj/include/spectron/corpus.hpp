#ifndef SPECTRON_CORPUS_HPP
#define SPECTRON_CORPUS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "spectron/rng.hpp"

namespace spectron {

/// Row-stochastic next-token table of an order-2 Markov source: context
/// (a, b) is the last two tokens, `a` the older one.
class MarkovTable {
public:
    MarkovTable(std::size_t vocab, std::vector<double> probs);

    std::size_t vocab() const { return vocab_; }

    /// The vocab-long distribution over the next token after (a, b).
    const double* row(std::size_t a, std::size_t b) const;
    double prob(std::size_t a, std::size_t b, std::size_t next) const;

    /// Stationary distribution over contexts (a, b), found by iterating the
    /// context chain from uniform to a fixed point.
    std::vector<double> stationary_contexts() const;

    /// Marginal token distribution under the stationary context law.
    std::vector<double> stationary_unigram() const;

    /// sum_c pi_c * H(row_c) in nats.
    double entropy_rate() const;

private:
    std::size_t vocab_;
    std::vector<double> probs_; ///< (vocab^2) x vocab, row-major
};

/// Seeded random transition table, each row sharpened (p_i proportional to
/// u_i^s, s found by bisection) until the row entropy equals
/// 0.6 * ln(vocab) -- which then is the chain's entropy rate exactly.
MarkovTable make_transition_table(std::uint64_t seed, std::size_t vocab);

/// Deterministic token stream: builds the table for (seed, vocab), draws an
/// initial context, then walks the chain. Identical arguments produce an
/// identical stream. Requires 2 <= vocab <= 65535.
std::vector<std::uint16_t> synth_corpus(std::uint64_t seed, std::size_t vocab,
                                        std::size_t length);

/// Binary token cache. Layout: 4-byte magic "SPTK", little-endian u16
/// format version, little-endian u16 vocab, then the token ids as
/// little-endian u16.
struct TokenFile {
    std::size_t vocab = 0;
    std::vector<std::uint16_t> tokens;
};

void write_token_file(const std::string& path, std::size_t vocab,
                      const std::vector<std::uint16_t>& tokens);

/// Throws std::runtime_error on missing file, bad magic, unsupported
/// version, truncated payload, or tokens outside the declared vocab.
TokenFile read_token_file(const std::string& path);

} // namespace spectron

#endif // SPECTRON_CORPUS_HPP
