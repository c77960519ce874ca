#include "gbm/binarizer.hpp"

#include "gbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace gbm {

namespace {

// Nearest-rank percentile of an ascending column copy.
double percentile(std::vector<double>& sorted, double q) {
    double rank = std::ceil(q * static_cast<double>(sorted.size()));
    std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
    if (idx >= sorted.size()) idx = sorted.size() - 1;
    return sorted[idx];
}

// Guards floor(z * p) against products that land one ulp below an integer,
// which happens when z itself came out of therm_decode's division by p.
constexpr double kLevelEps = 1e-9;

} // namespace

RangeCalibration calibrate_range(const RealMatrix& features) {
    if (features.n_rows < 2)
        throw GbmError(ErrorCode::empty_input, "calibration needs at least two rows");
    RangeCalibration cal;
    cal.lo.resize(features.n_cols);
    cal.hi.resize(features.n_cols);
    std::vector<double> column(features.n_rows);
    for (std::size_t j = 0; j < features.n_cols; ++j) {
        for (std::size_t i = 0; i < features.n_rows; ++i) {
            column[i] = features.at(i, j);
            if (!std::isfinite(column[i]))
                throw GbmError(ErrorCode::parameter, "features must be finite");
        }
        std::sort(column.begin(), column.end());
        double lo = percentile(column, 0.01);
        double hi = percentile(column, 0.99);
        if (lo == hi) hi = lo + 1.0;
        cal.lo[j] = lo;
        cal.hi[j] = hi;
    }
    return cal;
}

BitMatrix therm_encode(const RealMatrix& x, const RangeCalibration& cal, std::uint32_t p) {
    if (p < 1) throw GbmError(ErrorCode::parameter, "thermometer needs p >= 1");
    if (x.n_cols != cal.d())
        throw GbmError(ErrorCode::shape, "features have " + std::to_string(x.n_cols) +
                                             " columns, calibration expects " +
                                             std::to_string(cal.d()));
    for (std::size_t j = 0; j < cal.d(); ++j)
        if (!(cal.hi[j] > cal.lo[j]))
            throw GbmError(ErrorCode::parameter, "calibration range must have lo < hi");

    BitMatrix out(x.n_rows, x.n_cols * p);
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        for (std::size_t j = 0; j < x.n_cols; ++j) {
            double z = (x.at(i, j) - cal.lo[j]) / (cal.hi[j] - cal.lo[j]);
            z = std::clamp(z, 0.0, 1.0);
            std::size_t v = static_cast<std::size_t>(
                std::floor(z * static_cast<double>(p) + kLevelEps));
            if (v > p) v = p;
            for (std::size_t bit = 0; bit < v; ++bit) out.set(i, j * p + bit, true);
        }
    }
    return out;
}

RealMatrix therm_decode(const BitMatrix& bits, std::uint32_t p) {
    if (p < 1) throw GbmError(ErrorCode::parameter, "thermometer needs p >= 1");
    if (bits.cols() % p != 0)
        throw GbmError(ErrorCode::shape, "width " + std::to_string(bits.cols()) +
                                             " is not divisible by p = " + std::to_string(p));
    std::size_t d = bits.cols() / p;
    RealMatrix out(bits.rows(), d);
    for (std::size_t i = 0; i < bits.rows(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            std::size_t count = 0;
            for (std::size_t bit = 0; bit < p; ++bit)
                if (bits.get(i, j * p + bit)) ++count;
            out.at(i, j) = static_cast<double>(count) / static_cast<double>(p);
        }
    }
    return out;
}

HeavisideProjection HeavisideProjection::random_init(std::size_t d, std::size_t f,
                                                     SeededRng& rng, double ste_clip) {
    if (d == 0 || f == 0)
        throw GbmError(ErrorCode::parameter, "projection needs d >= 1 and f >= 1");
    if (!(ste_clip > 0.0))
        throw GbmError(ErrorCode::parameter, "ste_clip must be positive");
    HeavisideProjection proj;
    proj.d = d;
    proj.f = f;
    proj.ste_clip = ste_clip;
    proj.w.resize(f * d * d);
    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : proj.w) v = scale * rng.next_normal();
    return proj;
}

RealMatrix heaviside_preact(const RealMatrix& x, const HeavisideProjection& proj) {
    if (x.n_cols != proj.d)
        throw GbmError(ErrorCode::shape, "features have " + std::to_string(x.n_cols) +
                                             " columns, projection expects " +
                                             std::to_string(proj.d));
    std::size_t m = proj.out_dim();
    RealMatrix u(x.n_rows, m);
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        const double* xi = x.row(i);
        double* ui = u.row(i);
        for (std::size_t r = 0; r < m; ++r) {
            const double* wr = proj.w.data() + r * proj.d;
            double acc = 0.0;
            for (std::size_t j = 0; j < proj.d; ++j) acc += wr[j] * xi[j];
            ui[r] = acc;
        }
    }
    return u;
}

BitMatrix heaviside_forward(const RealMatrix& x, const HeavisideProjection& proj) {
    RealMatrix u = heaviside_preact(x, proj);
    BitMatrix out(u.n_rows, u.n_cols);
    for (std::size_t i = 0; i < u.n_rows; ++i)
        for (std::size_t r = 0; r < u.n_cols; ++r)
            if (u.at(i, r) >= 0.0) out.set(i, r, true);
    return out;
}

HeavisideGrads heaviside_backward(const RealMatrix& upstream, const RealMatrix& x,
                                  const HeavisideProjection& proj) {
    if (x.n_cols != proj.d)
        throw GbmError(ErrorCode::shape, "features do not match the projection width");
    if (upstream.n_rows != x.n_rows || upstream.n_cols != proj.out_dim())
        throw GbmError(ErrorCode::shape, "upstream gradient has the wrong shape");

    RealMatrix u = heaviside_preact(x, proj);
    HeavisideGrads out;
    out.grad_x = RealMatrix(x.n_rows, proj.d);
    out.grad_w.assign(proj.w.size(), 0.0);
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        const double* xi = x.row(i);
        const double* gi = upstream.row(i);
        double* gx = out.grad_x.row(i);
        for (std::size_t r = 0; r < proj.out_dim(); ++r) {
            if (std::abs(u.at(i, r)) > proj.ste_clip) continue;
            double g = gi[r];
            if (g == 0.0) continue;
            const double* wr = proj.w.data() + r * proj.d;
            double* gw = out.grad_w.data() + r * proj.d;
            for (std::size_t j = 0; j < proj.d; ++j) {
                gx[j] += g * wr[j];
                gw[j] += g * xi[j];
            }
        }
    }
    return out;
}

HeavisideTrainResult train_heaviside(const RealMatrix& features,
                                     const std::vector<std::uint32_t>& labels,
                                     HeavisideProjection proj, LinearClassifier clf,
                                     const TrainConfig& config, SeededRng& rng) {
    config.validate();
    if (features.n_rows == 0) throw GbmError(ErrorCode::empty_input, "training needs rows");
    if (features.n_rows != labels.size())
        throw GbmError(ErrorCode::shape, "label count does not match row count");
    if (features.n_cols != proj.d)
        throw GbmError(ErrorCode::shape, "features do not match the projection width");
    if (clf.input_kind() != InputKind::binary || clf.input_dim() != proj.out_dim())
        throw GbmError(ErrorCode::shape,
                       "head must take binary inputs of the projection's output width");
    for (std::uint32_t label : labels) clf.index_of(label);

    std::size_t n = features.n_rows;
    std::size_t steps = (n + config.batch_size - 1) / config.batch_size;
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    std::vector<double> v_proj(proj.w.size(), 0.0);
    std::vector<double> v_w(clf.weights().size(), 0.0);
    std::vector<double> v_b(clf.biases().size(), 0.0);

    std::vector<double> epoch_losses;
    epoch_losses.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.learning_rate *
                    std::pow(config.lr_decay,
                             static_cast<double>(epoch / config.lr_decay_period));
        rng.shuffle(perm);
        KahanSum epoch_loss;
        for (std::size_t step = 0; step < steps; ++step) {
            std::size_t lo = step * config.batch_size;
            std::size_t hi = std::min(n, lo + config.batch_size);
            std::size_t nb = hi - lo;

            RealMatrix x(nb, proj.d);
            std::vector<std::uint32_t> y(nb);
            for (std::size_t r = 0; r < nb; ++r) {
                std::memcpy(x.row(r), features.row(perm[lo + r]), proj.d * sizeof(double));
                y[r] = labels[perm[lo + r]];
            }

            RealMatrix u = heaviside_preact(x, proj);
            RealMatrix mapped(nb, proj.out_dim());
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t r = 0; r < proj.out_dim(); ++r)
                    mapped.at(i, r) = u.at(i, r) >= 0.0 ? 1.0 : -1.0;

            CeGrads grads = ce_loss_and_grads(clf, mapped, y, true);
            if (!std::isfinite(grads.loss))
                throw GbmError(ErrorCode::divergence,
                               "training loss became non-finite in epoch " +
                                   std::to_string(epoch));
            epoch_loss.add(grads.loss);

            // Straight-through: pass the embedding gradient through the step
            // inside the hard-tanh window.
            std::vector<double> grad_proj(proj.w.size(), 0.0);
            for (std::size_t i = 0; i < nb; ++i) {
                const double* gi = grads.grad_x.row(i);
                const double* xi = x.row(i);
                for (std::size_t r = 0; r < proj.out_dim(); ++r) {
                    if (std::abs(u.at(i, r)) > proj.ste_clip) continue;
                    double g = gi[r];
                    if (g == 0.0) continue;
                    double* gw = grad_proj.data() + r * proj.d;
                    for (std::size_t j = 0; j < proj.d; ++j) gw[j] += g * xi[j];
                }
            }

            sgd_update(proj.w, v_proj, grad_proj, lr, config.momentum);
            sgd_update(clf.weights(), v_w, grads.grad_w, lr, config.momentum);
            sgd_update(clf.biases(), v_b, grads.grad_b, lr, config.momentum);
        }
        epoch_losses.push_back(epoch_loss.value() / static_cast<double>(steps));
    }
    return {std::move(proj), std::move(clf), std::move(epoch_losses)};
}

} // namespace gbm
