#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gbm {

// Counter-based 64-bit generator (SplitMix64). The state advances by a fixed
// odd constant and each output is a finalizer of the counter, so the stream
// produced by a given seed is identical on every platform. All stochastic
// operations in this library draw from an explicitly passed SeededRng;
// nothing uses global or hidden random state.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller. Always consumes exactly two uniforms.
    double next_normal();

    double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

    // Uniform index in [0, n). Uses the 64-bit value modulo n; the bias is
    // below 2^-50 for any n this library passes in.
    std::size_t next_index(std::size_t n);

    // Categorical draw from non-negative weights (need not be normalized).
    std::size_t next_categorical(const std::vector<double>& weights);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn uniformly from [0, n), returned ascending.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::uint64_t state_;
};

} // namespace gbm
