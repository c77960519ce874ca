#include "gbm/classifier.hpp"

#include "gbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_set>

namespace gbm {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw GbmError(ErrorCode::parameter, "learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw GbmError(ErrorCode::parameter, "momentum must be in [0, 1)");
    if (batch_size < 1) throw GbmError(ErrorCode::parameter, "batch_size must be at least 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        throw GbmError(ErrorCode::parameter, "lr_decay must be in (0, 1]");
    if (lr_decay_period < 1)
        throw GbmError(ErrorCode::parameter, "lr_decay_period must be at least 1");
}

LinearClassifier::LinearClassifier(InputKind kind, std::size_t input_dim)
    : kind_(kind), input_dim_(input_dim) {
    if (input_dim == 0) throw GbmError(ErrorCode::parameter, "input_dim must be at least 1");
}

LinearClassifier::LinearClassifier(InputKind kind, std::size_t input_dim,
                                   std::vector<std::uint32_t> class_ids, std::vector<double> w,
                                   std::vector<double> b)
    : kind_(kind),
      input_dim_(input_dim),
      class_ids_(std::move(class_ids)),
      w_(std::move(w)),
      b_(std::move(b)) {
    if (input_dim == 0) throw GbmError(ErrorCode::parameter, "input_dim must be at least 1");
    if (w_.size() != class_ids_.size() * input_dim_ || b_.size() != class_ids_.size())
        throw GbmError(ErrorCode::shape, "classifier parameter sizes do not match");
    for (std::size_t i = 1; i < class_ids_.size(); ++i)
        if (class_ids_[i - 1] >= class_ids_[i])
            throw GbmError(ErrorCode::parameter, "class ids must be strictly ascending");
    for (double v : w_)
        if (!std::isfinite(v)) throw GbmError(ErrorCode::parameter, "weights must be finite");
    for (double v : b_)
        if (!std::isfinite(v)) throw GbmError(ErrorCode::parameter, "biases must be finite");
}

void LinearClassifier::extend_outputs(const std::vector<std::uint32_t>& new_class_ids) {
    std::unordered_set<std::uint32_t> seen(class_ids_.begin(), class_ids_.end());
    for (std::uint32_t id : new_class_ids) {
        if (!seen.insert(id).second)
            throw GbmError(ErrorCode::duplicate_class,
                           "class " + std::to_string(id) + " already has an output row");
    }
    for (std::uint32_t id : new_class_ids) {
        auto pos = std::lower_bound(class_ids_.begin(), class_ids_.end(), id);
        std::size_t at = static_cast<std::size_t>(pos - class_ids_.begin());
        class_ids_.insert(pos, id);
        w_.insert(w_.begin() + at * input_dim_, input_dim_, 0.0);
        b_.insert(b_.begin() + at, 0.0);
    }
}

std::size_t LinearClassifier::index_of(std::uint32_t class_id) const {
    auto pos = std::lower_bound(class_ids_.begin(), class_ids_.end(), class_id);
    if (pos == class_ids_.end() || *pos != class_id)
        throw GbmError(ErrorCode::parameter,
                       "class " + std::to_string(class_id) + " has no output row");
    return static_cast<std::size_t>(pos - class_ids_.begin());
}

RealMatrix LinearClassifier::logits(const BitMatrix& x) const {
    if (kind_ != InputKind::binary)
        throw GbmError(ErrorCode::shape, "classifier expects real-valued inputs");
    if (x.cols() != input_dim_)
        throw GbmError(ErrorCode::shape, "input has " + std::to_string(x.cols()) +
                                             " columns, classifier expects " +
                                             std::to_string(input_dim_));
    // With bits mapped to -1/+1 the logit is b - rowsum(W) + 2 * sum of W over
    // set bits.
    std::size_t nc = n_classes();
    std::vector<double> row_sums(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) {
        KahanSum s;
        for (std::size_t j = 0; j < input_dim_; ++j) s.add(w_[c * input_dim_ + j]);
        row_sums[c] = s.value();
    }
    RealMatrix out(x.rows(), nc);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double* o = out.row(i);
        for (std::size_t c = 0; c < nc; ++c) o[c] = b_[c] - row_sums[c];
        const std::uint64_t* w = x.row_words(i);
        for (std::size_t wi = 0; wi < x.words_per_row(); ++wi) {
            std::uint64_t bits = w[wi];
            while (bits) {
                std::size_t j = wi * 64 + static_cast<std::size_t>(__builtin_ctzll(bits));
                for (std::size_t c = 0; c < nc; ++c) o[c] += 2.0 * w_[c * input_dim_ + j];
                bits &= bits - 1;
            }
        }
    }
    return out;
}

RealMatrix LinearClassifier::logits(const RealMatrix& x) const {
    if (kind_ != InputKind::real)
        throw GbmError(ErrorCode::shape, "classifier expects binary inputs");
    if (x.n_cols != input_dim_)
        throw GbmError(ErrorCode::shape, "input has " + std::to_string(x.n_cols) +
                                             " columns, classifier expects " +
                                             std::to_string(input_dim_));
    std::size_t nc = n_classes();
    RealMatrix out(x.n_rows, nc);
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        const double* xi = x.row(i);
        double* o = out.row(i);
        for (std::size_t c = 0; c < nc; ++c) {
            const double* wc = w_.data() + c * input_dim_;
            double acc = b_[c];
            for (std::size_t j = 0; j < input_dim_; ++j) acc += wc[j] * xi[j];
            o[c] = acc;
        }
    }
    return out;
}

std::size_t LinearClassifier::count_correct(const LabeledEmbeddings& data) const {
    RealMatrix scores = data.is_binary() ? logits(data.bits()) : logits(data.reals());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.n_rows; ++i) {
        const double* s = scores.row(i);
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.n_cols; ++c)
            if (s[c] > s[best]) best = c; // first max wins: smallest class id on ties
        if (class_ids_[best] == data.labels[i]) ++correct;
    }
    return correct;
}

double LinearClassifier::evaluate(const LabeledEmbeddings& data) const {
    if (data.size() == 0) throw GbmError(ErrorCode::empty_input, "evaluate needs rows");
    return static_cast<double>(count_correct(data)) / static_cast<double>(data.size());
}

RealMatrix to_pm1(const BitMatrix& z) {
    RealMatrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double* o = out.row(i);
        for (std::size_t j = 0; j < z.cols(); ++j) o[j] = -1.0;
        const std::uint64_t* w = z.row_words(i);
        for (std::size_t wi = 0; wi < z.words_per_row(); ++wi) {
            std::uint64_t bits = w[wi];
            while (bits) {
                std::size_t j = wi * 64 + static_cast<std::size_t>(__builtin_ctzll(bits));
                o[j] = 1.0;
                bits &= bits - 1;
            }
        }
    }
    return out;
}

RealMatrix softmax_rows(const RealMatrix& logits) {
    RealMatrix out(logits.n_rows, logits.n_cols);
    for (std::size_t i = 0; i < logits.n_rows; ++i) {
        const double* s = logits.row(i);
        double* o = out.row(i);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < logits.n_cols; ++c) m = std::max(m, s[c]);
        double total = 0.0;
        for (std::size_t c = 0; c < logits.n_cols; ++c) {
            o[c] = std::exp(s[c] - m);
            total += o[c];
        }
        for (std::size_t c = 0; c < logits.n_cols; ++c) o[c] /= total;
    }
    return out;
}

CeGrads ce_loss_and_grads(const LinearClassifier& clf, const RealMatrix& x,
                          const std::vector<std::uint32_t>& labels, bool want_grad_x) {
    if (x.n_rows != labels.size())
        throw GbmError(ErrorCode::shape, "label count does not match row count");
    if (x.n_rows == 0) throw GbmError(ErrorCode::empty_input, "loss needs rows");

    std::size_t nc = clf.n_classes();
    std::size_t d = clf.input_dim();
    RealMatrix scores(x.n_rows, nc);
    const std::vector<double>& w = clf.weights();
    const std::vector<double>& b = clf.biases();
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        const double* xi = x.row(i);
        double* o = scores.row(i);
        for (std::size_t c = 0; c < nc; ++c) {
            const double* wc = w.data() + c * d;
            double acc = b[c];
            for (std::size_t j = 0; j < d; ++j) acc += wc[j] * xi[j];
            o[c] = acc;
        }
    }

    CeGrads out;
    out.grad_w.assign(nc * d, 0.0);
    out.grad_b.assign(nc, 0.0);
    if (want_grad_x) out.grad_x = RealMatrix(x.n_rows, d);
    double inv_n = 1.0 / static_cast<double>(x.n_rows);
    KahanSum loss;
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        double* s = scores.row(i);
        std::size_t target = clf.index_of(labels[i]);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < nc; ++c) m = std::max(m, s[c]);
        double total = 0.0;
        for (std::size_t c = 0; c < nc; ++c) total += std::exp(s[c] - m);
        loss.add(std::log(total) - (s[target] - m));
        // s becomes dloss/dlogits for this row, scaled by 1/n
        for (std::size_t c = 0; c < nc; ++c) {
            double p = std::exp(s[c] - m) / total;
            s[c] = (p - (c == target ? 1.0 : 0.0)) * inv_n;
        }
        const double* xi = x.row(i);
        for (std::size_t c = 0; c < nc; ++c) {
            double g = s[c];
            if (g == 0.0) continue;
            double* gw = out.grad_w.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) gw[j] += g * xi[j];
            out.grad_b[c] += g;
        }
        if (want_grad_x) {
            double* gx = out.grad_x.row(i);
            for (std::size_t c = 0; c < nc; ++c) {
                double g = s[c];
                if (g == 0.0) continue;
                const double* wc = w.data() + c * d;
                for (std::size_t j = 0; j < d; ++j) gx[j] += g * wc[j];
            }
        }
    }
    out.loss = loss.value() * inv_n;
    return out;
}

void sgd_update(std::vector<double>& param, std::vector<double>& velocity,
                const std::vector<double>& grad, double lr, double momentum) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * grad[i];
        param[i] += velocity[i];
    }
}

std::vector<double> train_with_replay(LinearClassifier& clf, const RealMatrix& new_rows,
                                      const std::vector<std::uint32_t>& new_labels,
                                      std::size_t n_new_classes, std::size_t n_old_classes,
                                      const ReplaySampler& replay, const TrainConfig& config,
                                      SeededRng& rng) {
    config.validate();
    if (new_rows.n_rows == 0) throw GbmError(ErrorCode::empty_input, "training needs rows");
    if (new_rows.n_rows != new_labels.size())
        throw GbmError(ErrorCode::shape, "label count does not match row count");
    if (new_rows.n_cols != clf.input_dim())
        throw GbmError(ErrorCode::shape, "training rows do not match the classifier width");
    for (std::uint32_t label : new_labels) clf.index_of(label); // classes must exist
    if (n_old_classes > 0 && !replay)
        throw GbmError(ErrorCode::parameter, "replay sampler required when n_old_classes > 0");

    BatchSplit split = compose_batch(config.batch_size, n_new_classes, n_old_classes);
    std::size_t n = new_rows.n_rows;
    std::size_t steps = (n + split.n_new_rows - 1) / split.n_new_rows;

    std::vector<double> vw(clf.weights().size(), 0.0);
    std::vector<double> vb(clf.biases().size(), 0.0);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    std::vector<double> epoch_losses;
    epoch_losses.reserve(config.epochs);
    RealMatrix replay_rows;
    std::vector<std::uint32_t> replay_labels;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.learning_rate *
                    std::pow(config.lr_decay,
                             static_cast<double>(epoch / config.lr_decay_period));
        rng.shuffle(perm);
        KahanSum epoch_loss;
        for (std::size_t step = 0; step < steps; ++step) {
            std::size_t lo = step * split.n_new_rows;
            std::size_t hi = std::min(n, lo + split.n_new_rows);
            std::size_t n_real = hi - lo;
            std::size_t batch_n = n_real + split.n_old_rows;

            RealMatrix batch(batch_n, clf.input_dim());
            std::vector<std::uint32_t> batch_labels(batch_n);
            for (std::size_t r = 0; r < n_real; ++r) {
                std::memcpy(batch.row(r), new_rows.row(perm[lo + r]),
                            clf.input_dim() * sizeof(double));
                batch_labels[r] = new_labels[perm[lo + r]];
            }
            if (split.n_old_rows > 0) {
                replay(split.n_old_rows, rng, replay_rows, replay_labels);
                if (replay_rows.n_rows != split.n_old_rows ||
                    replay_rows.n_cols != clf.input_dim())
                    throw GbmError(ErrorCode::shape, "replay sampler returned a wrong shape");
                for (std::size_t r = 0; r < split.n_old_rows; ++r) {
                    std::memcpy(batch.row(n_real + r), replay_rows.row(r),
                                clf.input_dim() * sizeof(double));
                    batch_labels[n_real + r] = replay_labels[r];
                }
            }

            CeGrads grads = ce_loss_and_grads(clf, batch, batch_labels, false);
            if (!std::isfinite(grads.loss))
                throw GbmError(ErrorCode::divergence,
                               "training loss became non-finite in epoch " +
                                   std::to_string(epoch));
            epoch_loss.add(grads.loss);
            sgd_update(clf.weights(), vw, grads.grad_w, lr, config.momentum);
            sgd_update(clf.biases(), vb, grads.grad_b, lr, config.momentum);
        }
        epoch_losses.push_back(epoch_loss.value() / static_cast<double>(steps));
    }
    return epoch_losses;
}

std::vector<double> train_task(LinearClassifier& clf, const LabeledEmbeddings& new_data,
                               const GbmStore& store, const TrainConfig& config,
                               SeededRng& rng) {
    if (clf.input_kind() != InputKind::binary)
        throw GbmError(ErrorCode::shape, "train_task feeds bits, classifier expects binary inputs");
    const BitMatrix& bits = new_data.bits();
    std::unordered_set<std::uint32_t> distinct(new_data.labels.begin(), new_data.labels.end());

    ReplaySampler sampler;
    if (store.n_classes() > 0) {
        sampler = [&store](std::size_t n, SeededRng& r, RealMatrix& rows,
                           std::vector<std::uint32_t>& labels) {
            auto [gen, gen_labels] = store.generate(n, r);
            rows = to_pm1(gen);
            labels = std::move(gen_labels);
        };
    }
    return train_with_replay(clf, to_pm1(bits), new_data.labels, distinct.size(),
                             store.n_classes(), sampler, config, rng);
}

} // namespace gbm
