#include "spectron/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace spectron {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'T', 'K'};
constexpr std::uint16_t kVersion = 1;

double row_entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

/// p_i(s) proportional to exp(s * ln u_i), computed with a max shift.
std::vector<double> sharpen(const std::vector<double>& log_u, double s) {
    double hi = log_u.front() * s;
    for (double lu : log_u) hi = std::max(hi, lu * s);
    std::vector<double> p(log_u.size());
    double z = 0.0;
    for (std::size_t i = 0; i < log_u.size(); ++i) {
        p[i] = std::exp(log_u[i] * s - hi);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

} // namespace

MarkovTable::MarkovTable(std::size_t vocab, std::vector<double> probs)
    : vocab_(vocab), probs_(std::move(probs)) {
    if (vocab_ < 2) throw std::invalid_argument("markov table: vocab must be >= 2");
    if (probs_.size() != vocab_ * vocab_ * vocab_)
        throw std::invalid_argument("markov table: expected vocab^3 probabilities");
    for (std::size_t c = 0; c < vocab_ * vocab_; ++c) {
        double sum = 0.0;
        for (std::size_t j = 0; j < vocab_; ++j) {
            const double v = probs_[c * vocab_ + j];
            if (!(v >= 0.0) || !std::isfinite(v))
                throw std::invalid_argument("markov table: probabilities must be in [0, 1]");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("markov table: row " + std::to_string(c) +
                                        " sums to " + std::to_string(sum));
    }
}

const double* MarkovTable::row(std::size_t a, std::size_t b) const {
    if (a >= vocab_ || b >= vocab_)
        throw std::invalid_argument("markov table: context out of range");
    return probs_.data() + (a * vocab_ + b) * vocab_;
}

double MarkovTable::prob(std::size_t a, std::size_t b, std::size_t next) const {
    if (next >= vocab_) throw std::invalid_argument("markov table: token out of range");
    return row(a, b)[next];
}

std::vector<double> MarkovTable::stationary_contexts() const {
    const std::size_t n_ctx = vocab_ * vocab_;
    std::vector<double> pi(n_ctx, 1.0 / static_cast<double>(n_ctx));
    std::vector<double> next(n_ctx);
    for (int iter = 0; iter < 20000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        // Context (a, b) moves to (b, c) with probability row(a,b)[c].
        for (std::size_t a = 0; a < vocab_; ++a)
            for (std::size_t b = 0; b < vocab_; ++b) {
                const double mass = pi[a * vocab_ + b];
                if (mass == 0.0) continue;
                const double* r = probs_.data() + (a * vocab_ + b) * vocab_;
                for (std::size_t c = 0; c < vocab_; ++c) next[b * vocab_ + c] += mass * r[c];
            }
        double drift = 0.0;
        for (std::size_t i = 0; i < n_ctx; ++i) drift += std::fabs(next[i] - pi[i]);
        pi.swap(next);
        if (drift < 1e-14) break;
    }
    return pi;
}

std::vector<double> MarkovTable::stationary_unigram() const {
    const std::vector<double> pi = stationary_contexts();
    std::vector<double> q(vocab_, 0.0);
    for (std::size_t a = 0; a < vocab_; ++a)
        for (std::size_t b = 0; b < vocab_; ++b) q[b] += pi[a * vocab_ + b];
    return q;
}

double MarkovTable::entropy_rate() const {
    const std::vector<double> pi = stationary_contexts();
    double rate = 0.0;
    for (std::size_t c = 0; c < vocab_ * vocab_; ++c) {
        const double* r = probs_.data() + c * vocab_;
        double h = 0.0;
        for (std::size_t j = 0; j < vocab_; ++j)
            if (r[j] > 0.0) h -= r[j] * std::log(r[j]);
        rate += pi[c] * h;
    }
    return rate;
}

MarkovTable make_transition_table(std::uint64_t seed, std::size_t vocab) {
    if (vocab < 2) throw std::invalid_argument("make_transition_table: vocab must be >= 2");
    const double target = 0.6 * std::log(static_cast<double>(vocab));
    Rng rng = Rng(seed).split("transition_table");

    std::vector<double> probs(vocab * vocab * vocab);
    std::vector<double> log_u(vocab);
    for (std::size_t c = 0; c < vocab * vocab; ++c) {
        // U in (0, 1], so the logs are finite.
        for (std::size_t j = 0; j < vocab; ++j) log_u[j] = std::log(1.0 - rng.uniform());

        // Row entropy is ln(vocab) at s = 0 and decreases monotonically in
        // s, so bisect on the sharpening exponent.
        double lo = 0.0, hi = 1.0;
        int guard = 0;
        while (row_entropy(sharpen(log_u, hi)) > target) {
            hi *= 2.0;
            if (++guard > 200)
                throw std::runtime_error("make_transition_table: sharpening failed to converge");
        }
        for (int iter = 0; iter < 100; ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (row_entropy(sharpen(log_u, mid)) > target)
                lo = mid;
            else
                hi = mid;
        }
        const std::vector<double> p = sharpen(log_u, 0.5 * (lo + hi));
        for (std::size_t j = 0; j < vocab; ++j) probs[c * vocab + j] = p[j];
    }
    return MarkovTable(vocab, std::move(probs));
}

std::vector<std::uint16_t> synth_corpus(std::uint64_t seed, std::size_t vocab,
                                        std::size_t length) {
    if (vocab < 2 || vocab > 65535)
        throw std::invalid_argument("synth_corpus: vocab must be in [2, 65535]");
    std::vector<std::uint16_t> tokens;
    if (length == 0) return tokens;
    tokens.reserve(length);

    const MarkovTable table = make_transition_table(seed, vocab);
    Rng init = Rng(seed).split("walk_init");
    Rng walk = Rng(seed).split("walk");

    std::size_t a = init.uniform_below(vocab);
    std::size_t b = init.uniform_below(vocab);
    tokens.push_back(static_cast<std::uint16_t>(a));
    if (length == 1) return tokens;
    tokens.push_back(static_cast<std::uint16_t>(b));

    while (tokens.size() < length) {
        const double* r = table.row(a, b);
        const double u = walk.uniform();
        double cum = 0.0;
        std::size_t next = vocab - 1;
        for (std::size_t j = 0; j < vocab; ++j) {
            cum += r[j];
            if (u < cum) {
                next = j;
                break;
            }
        }
        tokens.push_back(static_cast<std::uint16_t>(next));
        a = b;
        b = next;
    }
    return tokens;
}

namespace {

void put_u16(std::ofstream& out, std::uint16_t v) {
    const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(bytes, 2);
}

std::uint16_t get_u16(std::ifstream& in) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

} // namespace

void write_token_file(const std::string& path, std::size_t vocab,
                      const std::vector<std::uint16_t>& tokens) {
    if (vocab < 2 || vocab > 65535)
        throw std::invalid_argument("write_token_file: vocab must be in [2, 65535]");
    for (std::uint16_t t : tokens)
        if (t >= vocab)
            throw std::invalid_argument("write_token_file: token " + std::to_string(t) +
                                        " outside vocab " + std::to_string(vocab));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("write_token_file: cannot open " + path);
    out.write(kMagic, 4);
    put_u16(out, kVersion);
    put_u16(out, static_cast<std::uint16_t>(vocab));
    for (std::uint16_t t : tokens) put_u16(out, t);
    out.flush();
    if (!out) throw std::runtime_error("write_token_file: write failed for " + path);
}

TokenFile read_token_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_token_file: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw std::runtime_error("read_token_file: bad magic in " + path);
    const std::uint16_t version = get_u16(in);
    if (!in || version != kVersion)
        throw std::runtime_error("read_token_file: unsupported version " +
                                 std::to_string(version));
    TokenFile file;
    file.vocab = get_u16(in);
    if (!in || file.vocab < 2) throw std::runtime_error("read_token_file: bad vocab header");

    in.seekg(0, std::ios::end);
    const std::streamoff total = in.tellg();
    if (total < 8 || (total - 8) % 2 != 0)
        throw std::runtime_error("read_token_file: truncated payload in " + path);
    const std::size_t count = static_cast<std::size_t>((total - 8) / 2);
    in.seekg(8, std::ios::beg);
    file.tokens.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint16_t t = get_u16(in);
        if (t >= file.vocab)
            throw std::runtime_error("read_token_file: token " + std::to_string(t) +
                                     " outside vocab " + std::to_string(file.vocab));
        file.tokens.push_back(t);
    }
    if (!in) throw std::runtime_error("read_token_file: read failed for " + path);
    return file;
}

} // namespace spectron
