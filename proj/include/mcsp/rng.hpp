#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mcsp {

// Deterministic random stream. Gaussian draws use Box-Muller on raw
// mt19937_64 output instead of std::normal_distribution, whose sequence is
// implementation-defined; this keeps cohorts and checkpoints reproducible
// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal; consumes exactly two uniforms per draw.
    double normal();
    double normal(double mean, double sigma);
    // Unbiased integer in [0, n); n must be > 0.
    std::size_t index(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::swap(v[i], v[index(i + 1)]);
        }
    }

    // Independent child stream; derivation depends only on the constructor
    // seed and the tag, never on how much of this stream was consumed.
    Rng derive(std::uint64_t stream_tag) const;

    // Textual engine state, round-trips exactly.
    std::string save_state() const;
    void load_state(const std::string& state);

    std::uint64_t seed() const { return seed_; }

    // Order-free seed combiner (splitmix64 finalizer chain).
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace mcsp
