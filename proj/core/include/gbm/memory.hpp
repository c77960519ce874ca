#pragma once

#include "gbm/bmm.hpp"
#include "gbm/dataset.hpp"
#include "gbm/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gbm {

// How generate() picks the class of each pseudo-exemplar.
enum class ClassWeighting { uniform, by_count };

struct ClassEntry {
    std::uint32_t class_id = 0;
    QuantizedBmm model;
    std::size_t n_train = 0;     // rows the model was fitted on
    std::vector<double> probs;   // dequantized per-bit probabilities, derived cache
};

// Generative memory: one quantized Bernoulli mixture per class, appended as
// classes arrive. Existing entries are never modified; serialization of the
// old entries is byte-identical before and after an update.
class GbmStore {
public:
    GbmStore(std::size_t d, std::size_t k, std::uint32_t q,
             ClassWeighting weighting = ClassWeighting::uniform);

    std::size_t d() const { return d_; }
    std::size_t k() const { return k_; }
    std::uint32_t q() const { return q_; }
    ClassWeighting weighting() const { return weighting_; }
    std::size_t n_classes() const { return entries_.size(); }
    const std::vector<ClassEntry>& entries() const { return entries_; }
    bool has_class(std::uint32_t class_id) const;

    // Fit a mixture on the class rows, quantize it and append the entry.
    // em_config.k must equal the store's k. Errors: duplicate class, wrong
    // row width (shape), fewer than k rows (degenerate input).
    void update(std::uint32_t class_id, const BitMatrix& z, const EmConfig& em_config,
                SeededRng& rng);

    // Used when loading from disk.
    void append_entry(ClassEntry entry);

    // n pseudo-exemplars: class by the configured weighting, component from
    // its mixing weights, bits from the dequantized probabilities.
    std::pair<BitMatrix, std::vector<std::uint32_t>> generate(std::size_t n, SeededRng& rng) const;

    std::uint64_t memory_bits() const;

private:
    std::size_t d_;
    std::size_t k_;
    std::uint32_t q_;
    ClassWeighting weighting_;
    std::vector<ClassEntry> entries_;
};

// Latent replay baseline: up to e raw rows per class, chosen uniformly
// without replacement at store time.
class LatentReplayBuffer {
public:
    LatentReplayBuffer(std::size_t d, std::size_t e);

    std::size_t d() const { return d_; }
    std::size_t e() const { return e_; }
    std::size_t n_classes() const { return slots_.size(); }
    const BitMatrix& rows_of(std::uint32_t class_id) const;
    bool has_class(std::uint32_t class_id) const;

    void store(std::uint32_t class_id, const BitMatrix& z, SeededRng& rng);

    // n replayed rows: class uniform over stored classes, then a stored row
    // of that class uniform with replacement.
    std::pair<BitMatrix, std::vector<std::uint32_t>> replay(std::size_t n, SeededRng& rng) const;

    std::uint64_t memory_bits() const;

private:
    struct Slot {
        std::uint32_t class_id;
        BitMatrix rows;
    };
    std::size_t d_;
    std::size_t e_;
    std::vector<Slot> slots_;
};

// Replay batch composition: the new-sample share of a batch of size b is
// round(b * n_new / (n_new + n_old)) with ties away from zero, floored at 1;
// the rest of the batch is replayed. n_new counts current-task classes,
// n_old past classes.
struct BatchSplit {
    std::size_t n_new_rows;
    std::size_t n_old_rows;
};
BatchSplit compose_batch(std::size_t b, std::size_t n_new, std::size_t n_old);

// Model memory in bits: k prototypes x d bits x n_c classes at q bits each.
std::uint64_t memory_bits_gbm(std::uint64_t k, std::uint64_t d, std::uint64_t n_c,
                              std::uint64_t q);

// Replay memory in bits: e binary exemplars x d bits x n_c classes.
std::uint64_t memory_bits_lr(std::uint64_t e, std::uint64_t d, std::uint64_t n_c);

} // namespace gbm
