#pragma once

#include "gbm/dataset.hpp"
#include "gbm/memory.hpp"
#include "gbm/real_matrix.hpp"
#include "gbm/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace gbm {

enum class InputKind : std::uint8_t { binary = 0, real = 1 };

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::size_t epochs = 60;
    std::size_t batch_size = 128;
    double lr_decay = 0.1;            // learning-rate multiplier applied every period
    std::size_t lr_decay_period = 50; // epochs between decays
    std::uint64_t seed = 0;           // used by callers that construct the generator

    void validate() const;
};

// Linear softmax head. Binary inputs enter as -1/+1 (bit 0 maps to -1); real
// inputs are used as-is. Weight rows are kept sorted by class id, and
// extending the output layer never changes the logits of existing classes.
class LinearClassifier {
public:
    LinearClassifier(InputKind kind, std::size_t input_dim);
    LinearClassifier(InputKind kind, std::size_t input_dim,
                     std::vector<std::uint32_t> class_ids, std::vector<double> w,
                     std::vector<double> b);

    InputKind input_kind() const { return kind_; }
    std::size_t input_dim() const { return input_dim_; }
    std::size_t n_classes() const { return class_ids_.size(); }
    const std::vector<std::uint32_t>& class_ids() const { return class_ids_; }
    const std::vector<double>& weights() const { return w_; }
    const std::vector<double>& biases() const { return b_; }
    std::vector<double>& weights() { return w_; }
    std::vector<double>& biases() { return b_; }

    // Zero-initialized rows for the new classes. Re-adding a class id is a
    // duplicate-class error.
    void extend_outputs(const std::vector<std::uint32_t>& new_class_ids);

    // Column index of a class id, or a parameter error if unknown.
    std::size_t index_of(std::uint32_t class_id) const;

    RealMatrix logits(const BitMatrix& x) const;  // binary kind
    RealMatrix logits(const RealMatrix& x) const; // real kind

    // Rows whose arg-max logit is the labeled class. Ties break toward the
    // smallest class id.
    std::size_t count_correct(const LabeledEmbeddings& data) const;

    // count_correct as a fraction. Empty data is an empty-input error.
    double evaluate(const LabeledEmbeddings& data) const;

private:
    InputKind kind_;
    std::size_t input_dim_;
    std::vector<std::uint32_t> class_ids_; // ascending
    std::vector<double> w_;                // n_classes * input_dim
    std::vector<double> b_;                // n_classes
};

// Bits to -1/+1 rows.
RealMatrix to_pm1(const BitMatrix& z);

// Row-wise softmax with max subtraction.
RealMatrix softmax_rows(const RealMatrix& logits);

// Mean cross-entropy of rows against labeled classes plus the parameter
// gradients, reusing the classifier's weight layout. x must already be in
// the classifier's input space.
struct CeGrads {
    double loss = 0.0;
    std::vector<double> grad_w;
    std::vector<double> grad_b;
    RealMatrix grad_x; // d loss / d input rows, filled when requested
};
CeGrads ce_loss_and_grads(const LinearClassifier& clf, const RealMatrix& x,
                          const std::vector<std::uint32_t>& labels, bool want_grad_x);

// In-place SGD step with momentum: v = momentum * v - lr * grad; param += v.
void sgd_update(std::vector<double>& param, std::vector<double>& velocity,
                const std::vector<double>& grad, double lr, double momentum);

// Supplies n replay rows already mapped to the classifier's input space.
using ReplaySampler =
    std::function<void(std::size_t n, SeededRng& rng, RealMatrix& rows,
                       std::vector<std::uint32_t>& labels)>;

// Mini-batch SGD with momentum and stepwise exponential learning-rate decay.
// Each step takes the next slice of the shuffled real rows and tops the
// batch up with freshly drawn replay rows per compose_batch. Returns the
// per-epoch mean batch loss; a non-finite loss raises a divergence error
// naming the epoch. new_rows must already be in the classifier's input
// space and all labels must already have output rows.
std::vector<double> train_with_replay(LinearClassifier& clf, const RealMatrix& new_rows,
                                      const std::vector<std::uint32_t>& new_labels,
                                      std::size_t n_new_classes, std::size_t n_old_classes,
                                      const ReplaySampler& replay, const TrainConfig& config,
                                      SeededRng& rng);

// Incremental-task training against a generative store: batches mix real
// rows of the new classes with pseudo-exemplars of the stored ones. The
// classifier must take binary inputs. An empty store trains on real rows
// only.
std::vector<double> train_task(LinearClassifier& clf, const LabeledEmbeddings& new_data,
                               const GbmStore& store, const TrainConfig& config,
                               SeededRng& rng);

} // namespace gbm
