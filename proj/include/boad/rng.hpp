#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace boad {

// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_purpose(std::string_view purpose) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for the named substream (seed, round, purpose, index).
///
/// Every stochastic draw in a run goes through one of these, so inserting or
/// removing work in one purpose never shifts the draws of another.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t round,
                                       std::string_view purpose,
                                       std::uint64_t index = 0) noexcept {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ round);
    h = mix64(h ^ hash_purpose(purpose));
    return mix64(h ^ index);
}

/// Portable random stream: mt19937_64 plus distribution code that does not
/// depend on the standard library's implementation-defined distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    Rng(std::uint64_t seed, std::uint64_t round, std::string_view purpose, std::uint64_t index = 0)
        : engine_(substream_seed(seed, round, purpose, index)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection to avoid modulo bias.
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    /// Standard normal draw (Box-Muller, one value per call).
    double normal();

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace boad
