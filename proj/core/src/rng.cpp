#include "gbm/rng.hpp"

#include "gbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gbm {

double SeededRng::next_normal() {
    // next_double() is in [0, 1); flip it so the log argument is in (0, 1].
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SeededRng::next_index(std::size_t n) {
    if (n == 0) throw GbmError(ErrorCode::parameter, "next_index needs n >= 1");
    return static_cast<std::size_t>(next_u64() % n);
}

std::size_t SeededRng::next_categorical(const std::vector<double>& weights) {
    if (weights.empty())
        throw GbmError(ErrorCode::parameter, "next_categorical needs at least one weight");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0))
            throw GbmError(ErrorCode::parameter, "next_categorical weights must be non-negative");
        total += w;
    }
    if (total <= 0.0)
        throw GbmError(ErrorCode::parameter, "next_categorical weights sum to zero");
    double u = next_double() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        if (u < cum) return i;
    }
    return weights.size() - 1;
}

std::vector<std::size_t> SeededRng::sample_indices(std::size_t n, std::size_t k) {
    if (k > n) throw GbmError(ErrorCode::parameter, "sample_indices needs k <= n");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates: after i swaps the first i slots hold the sample.
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + next_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace gbm
