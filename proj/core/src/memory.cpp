#include "gbm/memory.hpp"

#include "gbm/error.hpp"

#include <string>

namespace gbm {

namespace {

std::vector<double> dequantized_probs(const QuantizedBmm& model) {
    return dequantize(model).mu;
}

} // namespace

GbmStore::GbmStore(std::size_t d, std::size_t k, std::uint32_t q, ClassWeighting weighting)
    : d_(d), k_(k), q_(q), weighting_(weighting) {
    if (d == 0) throw GbmError(ErrorCode::parameter, "store needs d >= 1");
    if (k == 0) throw GbmError(ErrorCode::parameter, "store needs k >= 1");
    if (q < 1 || q > 32) throw GbmError(ErrorCode::parameter, "store needs q in [1, 32]");
}

bool GbmStore::has_class(std::uint32_t class_id) const {
    for (const ClassEntry& e : entries_)
        if (e.class_id == class_id) return true;
    return false;
}

void GbmStore::update(std::uint32_t class_id, const BitMatrix& z, const EmConfig& em_config,
                      SeededRng& rng) {
    if (has_class(class_id))
        throw GbmError(ErrorCode::duplicate_class,
                       "class " + std::to_string(class_id) + " is already stored");
    if (z.cols() != d_)
        throw GbmError(ErrorCode::shape, "class rows have " + std::to_string(z.cols()) +
                                             " columns, store expects " + std::to_string(d_));
    if (em_config.k != k_)
        throw GbmError(ErrorCode::parameter, "em_config.k does not match the store's k");

    auto [params, report] = fit(z, em_config, rng);
    (void)report;
    ClassEntry entry;
    entry.class_id = class_id;
    entry.model = quantize(params, q_);
    entry.n_train = z.rows();
    entry.probs = dequantized_probs(entry.model);
    entries_.push_back(std::move(entry));
}

void GbmStore::append_entry(ClassEntry entry) {
    if (has_class(entry.class_id))
        throw GbmError(ErrorCode::duplicate_class,
                       "class " + std::to_string(entry.class_id) + " is already stored");
    if (entry.model.d != d_ || entry.model.k != k_ || entry.model.q != q_)
        throw GbmError(ErrorCode::shape, "entry model does not match the store's d, k, q");
    if (entry.probs.empty()) entry.probs = dequantized_probs(entry.model);
    entries_.push_back(std::move(entry));
}

std::pair<BitMatrix, std::vector<std::uint32_t>> GbmStore::generate(std::size_t n,
                                                                    SeededRng& rng) const {
    if (entries_.empty())
        throw GbmError(ErrorCode::empty_memory, "generate needs at least one stored class");
    std::vector<double> class_weights(entries_.size(), 1.0);
    if (weighting_ == ClassWeighting::by_count)
        for (std::size_t i = 0; i < entries_.size(); ++i)
            class_weights[i] = static_cast<double>(entries_[i].n_train);

    BitMatrix rows(n, d_);
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t e = weighting_ == ClassWeighting::uniform
                            ? rng.next_index(entries_.size())
                            : rng.next_categorical(class_weights);
        const ClassEntry& entry = entries_[e];
        std::size_t c = rng.next_categorical(entry.model.pi);
        const double* probs = entry.probs.data() + c * d_;
        for (std::size_t j = 0; j < d_; ++j)
            if (rng.next_bernoulli(probs[j])) rows.set(i, j, true);
        labels[i] = entry.class_id;
    }
    return {std::move(rows), std::move(labels)};
}

std::uint64_t GbmStore::memory_bits() const {
    return memory_bits_gbm(k_, d_, entries_.size(), q_);
}

LatentReplayBuffer::LatentReplayBuffer(std::size_t d, std::size_t e) : d_(d), e_(e) {
    if (d == 0) throw GbmError(ErrorCode::parameter, "replay buffer needs d >= 1");
    if (e == 0) throw GbmError(ErrorCode::parameter, "replay buffer needs e >= 1");
}

bool LatentReplayBuffer::has_class(std::uint32_t class_id) const {
    for (const Slot& s : slots_)
        if (s.class_id == class_id) return true;
    return false;
}

const BitMatrix& LatentReplayBuffer::rows_of(std::uint32_t class_id) const {
    for (const Slot& s : slots_)
        if (s.class_id == class_id) return s.rows;
    throw GbmError(ErrorCode::parameter,
                   "class " + std::to_string(class_id) + " is not stored");
}

void LatentReplayBuffer::store(std::uint32_t class_id, const BitMatrix& z, SeededRng& rng) {
    if (has_class(class_id))
        throw GbmError(ErrorCode::duplicate_class,
                       "class " + std::to_string(class_id) + " is already stored");
    if (z.cols() != d_)
        throw GbmError(ErrorCode::shape, "class rows have " + std::to_string(z.cols()) +
                                             " columns, buffer expects " + std::to_string(d_));
    if (z.rows() == 0)
        throw GbmError(ErrorCode::empty_input, "store needs at least one row");

    Slot slot;
    slot.class_id = class_id;
    if (z.rows() <= e_) {
        slot.rows = z;
    } else {
        slot.rows = select_rows(z, rng.sample_indices(z.rows(), e_));
    }
    slots_.push_back(std::move(slot));
}

std::pair<BitMatrix, std::vector<std::uint32_t>> LatentReplayBuffer::replay(
    std::size_t n, SeededRng& rng) const {
    if (slots_.empty())
        throw GbmError(ErrorCode::empty_memory, "replay needs at least one stored class");
    BitMatrix rows(n, d_);
    std::vector<std::uint32_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Slot& slot = slots_[rng.next_index(slots_.size())];
        std::size_t r = rng.next_index(slot.rows.rows());
        rows.copy_row_from(slot.rows, r, i);
        labels[i] = slot.class_id;
    }
    return {std::move(rows), std::move(labels)};
}

std::uint64_t LatentReplayBuffer::memory_bits() const {
    return memory_bits_lr(e_, d_, slots_.size());
}

BatchSplit compose_batch(std::size_t b, std::size_t n_new, std::size_t n_old) {
    if (b < 1) throw GbmError(ErrorCode::parameter, "compose_batch needs b >= 1");
    if (n_new < 1) throw GbmError(ErrorCode::parameter, "compose_batch needs n_new >= 1");
    // round(b * n_new / (n_new + n_old)) with ties away from zero, done in
    // integers: round(p / s) = (2p + s) / (2s) for non-negative p.
    std::uint64_t p = static_cast<std::uint64_t>(b) * n_new;
    std::uint64_t s = static_cast<std::uint64_t>(n_new) + n_old;
    std::uint64_t rounded = (2 * p + s) / (2 * s);
    std::size_t n_new_rows = static_cast<std::size_t>(rounded);
    if (n_new_rows < 1) n_new_rows = 1;
    return {n_new_rows, b - n_new_rows};
}

std::uint64_t memory_bits_gbm(std::uint64_t k, std::uint64_t d, std::uint64_t n_c,
                              std::uint64_t q) {
    return k * d * n_c * q;
}

std::uint64_t memory_bits_lr(std::uint64_t e, std::uint64_t d, std::uint64_t n_c) {
    return e * d * n_c;
}

} // namespace gbm
