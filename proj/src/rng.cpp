#include "spectron/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace spectron {

// Finalizer from SplitMix64: full-avalanche bijection on 64 bits.
std::uint64_t Rng::mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Rng Rng::split(std::uint64_t site) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(site ^ 0x5851f42d4c957f2dull));
    child.counter_ = 0;
    return child;
}

Rng Rng::split(std::string_view site) const {
    return split(hash_string(site));
}

std::uint64_t Rng::hash_string(std::string_view s) {
    // FNV-1a, 64-bit.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t Rng::next_u64() {
    return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = n * ((~0ull) / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

DenseMatrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data()) v = stddev * rng.gaussian();
    return m;
}

} // namespace spectron
