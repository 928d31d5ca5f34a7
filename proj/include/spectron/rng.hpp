#ifndef SPECTRON_RNG_HPP
#define SPECTRON_RNG_HPP

#include <cstdint>
#include <string>
#include <string_view>

#include "spectron/matrix.hpp"

namespace spectron {

/// Counter-based pseudorandom generator with deterministic splitting.
///
/// Every draw is a pure function of (key, counter), so streams are
/// reproducible regardless of call order elsewhere in the program, and
/// split() children depend only on the parent key and the site id --
/// never on how many numbers the parent has already produced. The
/// integer stream uses only unsigned 64-bit arithmetic.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ kKeyDomain)) {}

    /// Child generator for a named site. Deterministic in (key, site).
    Rng split(std::uint64_t site) const;
    Rng split(std::string_view site) const;

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();

    /// Standard normal via Box-Muller (no state carried between calls).
    double gaussian();

    /// Uniform integer in [0, n). Throws if n == 0.
    std::uint64_t uniform_below(std::uint64_t n);

    static std::uint64_t hash_string(std::string_view s);

private:
    static constexpr std::uint64_t kKeyDomain = 0x9e3779b97f4a7c15ull;
    static std::uint64_t mix(std::uint64_t x);

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

/// rows x cols matrix of i.i.d. N(0, stddev^2) entries.
DenseMatrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev);

} // namespace spectron

#endif // SPECTRON_RNG_HPP
