#pragma once

#include "gbm/bit_matrix.hpp"
#include "gbm/classifier.hpp"
#include "gbm/real_matrix.hpp"
#include "gbm/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gbm {

// Per-feature encoding range, calibrated from data percentiles.
struct RangeCalibration {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t d() const { return lo.size(); }
};

// lo / hi are the 1st and 99th percentiles of each column (nearest-rank).
// A column with equal percentiles gets (v, v + 1) so the range is never
// empty. Needs at least two rows.
RangeCalibration calibrate_range(const RealMatrix& features);

// Unary (thermometer) code: p bits per feature. A feature is first mapped
// to z = clip((x - lo) / (hi - lo), 0, 1), then the first floor(z * p)
// bits (capped at p) are set, so greater values always set a superset of
// bits.
struct ThermometerCodec {
    std::uint32_t p = 1;
    std::size_t d = 0;
};

BitMatrix therm_encode(const RealMatrix& x, const RangeCalibration& cal, std::uint32_t p);

// Mean of each p-bit segment. Total on any bit pattern, not only valid
// thermometer codes. The width must be divisible by p.
RealMatrix therm_decode(const BitMatrix& bits, std::uint32_t p);

// Random projection followed by a hard threshold at zero: each input row x
// yields f*d bits, bit r = [x . w_r >= 0] (ties count as set). Gradients
// pass straight through the step inside the hard-tanh window |u| <= ste_clip
// and are zero outside it.
struct HeavisideProjection {
    std::size_t d = 0;       // input features
    std::size_t f = 1;       // bits per feature; output width is f * d
    double ste_clip = 1.0;
    std::vector<double> w;   // (f * d) x d, row-major

    std::size_t out_dim() const { return f * d; }

    // Gaussian init scaled by 1/sqrt(d).
    static HeavisideProjection random_init(std::size_t d, std::size_t f, SeededRng& rng,
                                           double ste_clip = 1.0);
};

BitMatrix heaviside_forward(const RealMatrix& x, const HeavisideProjection& proj);

// Pre-activations u = x W^T, exposed for the surrogate-gradient path.
RealMatrix heaviside_preact(const RealMatrix& x, const HeavisideProjection& proj);

struct HeavisideGrads {
    RealMatrix grad_x;          // n x d
    std::vector<double> grad_w; // (f * d) x d
};

// upstream is d loss / d output with the binary output read on the -1/+1
// scale. The step is treated as the identity where |u| <= ste_clip and flat
// elsewhere.
HeavisideGrads heaviside_backward(const RealMatrix& upstream, const RealMatrix& x,
                                  const HeavisideProjection& proj);

// Joint SGD training of the projection and a softmax head on the binarized
// features. The head must take binary inputs of width proj.out_dim().
// Returns the per-epoch mean batch loss; zero epochs return the pair
// unchanged.
struct HeavisideTrainResult {
    HeavisideProjection proj;
    LinearClassifier clf;
    std::vector<double> epoch_losses;
};
HeavisideTrainResult train_heaviside(const RealMatrix& features,
                                     const std::vector<std::uint32_t>& labels,
                                     HeavisideProjection proj, LinearClassifier clf,
                                     const TrainConfig& config, SeededRng& rng);

} // namespace gbm
