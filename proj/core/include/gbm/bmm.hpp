#pragma once

#include "gbm/bit_matrix.hpp"
#include "gbm/real_matrix.hpp"
#include "gbm/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gbm {

// Probabilities are kept away from {0,1} by this margin after every update,
// so log(mu) and log(1-mu) stay finite.
inline constexpr double kProbClamp = 1e-6;

// Bernoulli mixture over d-dimensional binary vectors: k components with
// mixing weights pi and per-bit probabilities mu.
struct BmmParams {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> mu; // k * d, row-major
    std::vector<double> pi; // k

    BmmParams() = default;
    BmmParams(std::size_t k_, std::size_t d_)
        : k(k_), d(d_), mu(k_ * d_, 0.5), pi(k_, k_ ? 1.0 / static_cast<double>(k_) : 0.0) {}

    double mu_at(std::size_t comp, std::size_t j) const { return mu[comp * d + j]; }
    double& mu_at(std::size_t comp, std::size_t j) { return mu[comp * d + j]; }
};

enum class InitMode { centroid, random };

struct EmConfig {
    std::size_t k = 1;
    double eps = 1e-3;        // relative log-likelihood change for stopping
    std::size_t n_max = 10;   // EM step cap after warm-up selection
    std::size_t n_init = 5;   // warm-up restarts
    std::size_t n_iter = 3;   // EM steps per warm-up
    bool pi_trainable = true; // false keeps pi fixed at its initial value
    InitMode init_mode = InitMode::centroid;
    std::uint64_t seed = 0;   // used by callers that construct the generator

    void validate() const;
};

struct FitReport {
    std::vector<double> ll_trace;   // marginal log-likelihood after each EM step
    std::vector<double> eq3_trace;  // expected complete-data log-likelihood, reporting only
    std::size_t iterations = 0;     // EM steps on the selected parameter path
    bool converged = false;         // stopped on the relative-change test
    std::size_t chosen_init = 0;    // index of the winning warm-up
};

// Mixture with per-bit probabilities stored as q-bit levels; pi stays in
// full precision.
struct QuantizedBmm {
    std::size_t k = 0;
    std::size_t d = 0;
    std::uint32_t q = 32;
    std::vector<std::uint32_t> levels; // k * d, each in [0, 2^q - 1]
    std::vector<double> pi;
};

// Responsibilities gamma (n x k): posterior of each component per row,
// computed in the log domain with log-sum-exp. Rows sum to 1.
RealMatrix e_step(const BitMatrix& z, const BmmParams& params);

// Maximum-likelihood update from responsibilities. pi_in supplies the
// current mixing weights; they are re-estimated when pi_trainable and passed
// through unchanged otherwise. A component whose total responsibility is
// zero raises a degenerate-component error.
BmmParams m_step(const BitMatrix& z, const RealMatrix& gamma,
                 const std::vector<double>& pi_in, bool pi_trainable);

// Marginal log-likelihood sum_i log sum_k pi_k p(z_i | mu_k).
double log_likelihood(const BitMatrix& z, const BmmParams& params);

// Expected complete-data log-likelihood
// sum_i sum_k gamma_ik log(pi_k p(z_i | mu_k)), with 0 * log 0 = 0.
// Reported alongside the marginal but not used for stopping: only the
// marginal is guaranteed non-decreasing under EM.
double eq3_value(const BitMatrix& z, const BmmParams& params, const RealMatrix& gamma);

// Initial parameters. centroid mode perturbs the column-mean vector with
// zero-mean normal noise scaled by each column's empirical standard
// deviation; random mode draws mu uniformly from [0.25, 0.75]. pi starts
// uniform in both modes.
BmmParams init_params(const BitMatrix& z, const EmConfig& config, SeededRng& rng);

// Full fit: n_init warm-ups of n_iter EM steps each, keep the warm-up with
// the highest marginal log-likelihood, then continue EM from it until the
// relative change drops below eps or n_max further steps have run. A
// component that loses all responsibility is re-initialized once; a repeat
// on the same path is a degenerate-component error.
std::pair<BmmParams, FitReport> fit(const BitMatrix& z, const EmConfig& config, SeededRng& rng);

// n draws: component from pi, then each bit from its Bernoulli probability.
BitMatrix sample(const BmmParams& params, std::size_t n, SeededRng& rng);

// Uniform quantization of mu onto q-bit levels: level = round(mu * (2^q - 1)),
// ties away from zero. q must be in [1, 32].
QuantizedBmm quantize(const BmmParams& params, std::uint32_t q);

// level / (2^q - 1). Values may touch 0 and 1 exactly; that is fine for
// generation, which is the only consumer of dequantized parameters.
BmmParams dequantize(const QuantizedBmm& model);

} // namespace gbm
