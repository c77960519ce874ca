#include "gbm/bmm.hpp"

#include "gbm/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

namespace gbm {

namespace {

void validate_params(const BmmParams& p) {
    if (p.k == 0) throw GbmError(ErrorCode::parameter, "mixture needs at least one component");
    if (p.mu.size() != p.k * p.d || p.pi.size() != p.k)
        throw GbmError(ErrorCode::shape, "mixture parameter sizes do not match k and d");
    double s = 0.0;
    for (double w : p.pi) {
        if (!(w >= 0.0)) throw GbmError(ErrorCode::parameter, "mixing weights must be non-negative");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw GbmError(ErrorCode::parameter, "mixing weights must sum to 1");
}

// Log-domain tables: score(i,k) = base[k] + sum over set bits j of delta[k*d+j],
// where base folds in log pi_k and the all-zeros row log-probability.
struct LogTables {
    std::vector<double> base;
    std::vector<double> delta;
};

LogTables make_log_tables(const BmmParams& p) {
    LogTables t;
    t.base.resize(p.k);
    t.delta.resize(p.k * p.d);
    for (std::size_t k = 0; k < p.k; ++k) {
        KahanSum zeros;
        for (std::size_t j = 0; j < p.d; ++j) {
            double mu = p.mu[k * p.d + j];
            double l1 = std::log(mu);
            double l0 = std::log1p(-mu);
            t.delta[k * p.d + j] = l1 - l0;
            zeros.add(l0);
        }
        t.base[k] = std::log(p.pi[k]) + zeros.value();
    }
    return t;
}

void row_scores(const BitMatrix& z, std::size_t i, std::size_t k, std::size_t d,
                const LogTables& t, double* s) {
    for (std::size_t c = 0; c < k; ++c) s[c] = t.base[c];
    const std::uint64_t* w = z.row_words(i);
    for (std::size_t wi = 0; wi < z.words_per_row(); ++wi) {
        std::uint64_t bits = w[wi];
        while (bits) {
            std::size_t j = wi * 64 + static_cast<std::size_t>(__builtin_ctzll(bits));
            const double* dj = t.delta.data() + j;
            for (std::size_t c = 0; c < k; ++c) s[c] += dj[c * d];
            bits &= bits - 1;
        }
    }
}

// One pass over the data at fixed parameters: responsibilities, marginal
// log-likelihood and the expected complete-data log-likelihood.
struct EvalPass {
    RealMatrix gamma;
    double ll = 0.0;
    double eq3 = 0.0;
};

EvalPass evaluate(const BitMatrix& z, const BmmParams& p) {
    if (z.cols() != p.d)
        throw GbmError(ErrorCode::shape, "data has " + std::to_string(z.cols()) +
                                             " columns, mixture expects " + std::to_string(p.d));
    LogTables t = make_log_tables(p);
    EvalPass out;
    out.gamma = RealMatrix(z.rows(), p.k);
    std::vector<double> s(p.k);
    KahanSum ll, eq3;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        row_scores(z, i, p.k, p.d, t, s.data());
        double m = -std::numeric_limits<double>::infinity();
        for (double v : s) m = std::max(m, v);
        double acc = 0.0;
        for (double v : s) acc += std::exp(v - m);
        double lse = m + std::log(acc);
        ll.add(lse);
        double* g = out.gamma.row(i);
        for (std::size_t c = 0; c < p.k; ++c) {
            g[c] = std::exp(s[c] - lse);
            if (g[c] > 0.0) eq3.add(g[c] * s[c]);
        }
    }
    out.ll = ll.value();
    out.eq3 = eq3.value();
    return out;
}

std::vector<double> responsibility_totals(const RealMatrix& gamma) {
    std::vector<KahanSum> acc(gamma.n_cols);
    for (std::size_t i = 0; i < gamma.n_rows; ++i) {
        const double* g = gamma.row(i);
        for (std::size_t k = 0; k < gamma.n_cols; ++k) acc[k].add(g[k]);
    }
    std::vector<double> out(gamma.n_cols);
    for (std::size_t k = 0; k < gamma.n_cols; ++k) out[k] = acc[k].value();
    return out;
}

// Column statistics reused by centroid init and component re-initialization.
struct ColumnStats {
    std::vector<double> mean;
    std::vector<double> sd;
};

ColumnStats column_stats(const BitMatrix& z) {
    ColumnStats cs;
    cs.mean = column_means(z);
    cs.sd.resize(cs.mean.size());
    // Bits are 0/1, so the variance of column j is exactly m_j (1 - m_j).
    for (std::size_t j = 0; j < cs.mean.size(); ++j)
        cs.sd[j] = std::sqrt(cs.mean[j] * (1.0 - cs.mean[j]));
    return cs;
}

double clamp_prob(double v) { return std::clamp(v, kProbClamp, 1.0 - kProbClamp); }

void draw_component_row(double* mu, std::size_t d, const EmConfig& cfg,
                        const ColumnStats& stats, SeededRng& rng) {
    if (cfg.init_mode == InitMode::centroid) {
        for (std::size_t j = 0; j < d; ++j)
            mu[j] = clamp_prob(stats.mean[j] + stats.sd[j] * rng.next_normal());
    } else {
        for (std::size_t j = 0; j < d; ++j) mu[j] = 0.25 + 0.5 * rng.next_double();
    }
}

// One EM parameter path: params plus traces and the per-component
// re-initialization budget.
struct Path {
    BmmParams params;
    RealMatrix gamma; // responsibilities at params
    std::vector<double> ll;
    std::vector<double> eq3;
    std::vector<char> reinited;
};

void em_step(Path& p, const BitMatrix& z, const EmConfig& cfg, const ColumnStats& stats,
             SeededRng& rng) {
    for (;;) {
        std::vector<double> totals = responsibility_totals(p.gamma);
        std::vector<std::size_t> dead;
        for (std::size_t k = 0; k < cfg.k; ++k)
            if (totals[k] == 0.0) dead.push_back(k);
        if (dead.empty()) break;
        for (std::size_t k : dead) {
            if (p.reinited[k])
                throw GbmError(ErrorCode::degenerate_component,
                               "component " + std::to_string(k) +
                                   " lost all responsibility again after re-initialization");
            p.reinited[k] = 1;
            draw_component_row(p.params.mu.data() + k * p.params.d, p.params.d, cfg, stats, rng);
            if (cfg.pi_trainable) {
                p.params.pi[k] = 1.0 / static_cast<double>(cfg.k);
                double s = 0.0;
                for (double w : p.params.pi) s += w;
                for (double& w : p.params.pi) w /= s;
            }
        }
        p.gamma = e_step(z, p.params);
    }
    p.params = m_step(z, p.gamma, p.params.pi, cfg.pi_trainable);
    EvalPass pass = evaluate(z, p.params);
    p.gamma = std::move(pass.gamma);
    p.ll.push_back(pass.ll);
    p.eq3.push_back(pass.eq3);
}

} // namespace

void EmConfig::validate() const {
    if (k == 0) throw GbmError(ErrorCode::parameter, "k must be at least 1");
    if (!(eps > 0.0)) throw GbmError(ErrorCode::parameter, "eps must be positive");
    if (n_init == 0) throw GbmError(ErrorCode::parameter, "n_init must be at least 1");
    if (n_iter == 0) throw GbmError(ErrorCode::parameter, "n_iter must be at least 1");
}

RealMatrix e_step(const BitMatrix& z, const BmmParams& params) {
    validate_params(params);
    return evaluate(z, params).gamma;
}

BmmParams m_step(const BitMatrix& z, const RealMatrix& gamma,
                 const std::vector<double>& pi_in, bool pi_trainable) {
    std::size_t n = z.rows();
    std::size_t k = gamma.n_cols;
    std::size_t d = z.cols();
    if (gamma.n_rows != n)
        throw GbmError(ErrorCode::shape, "gamma row count does not match data");
    if (k == 0) throw GbmError(ErrorCode::parameter, "gamma must have at least one column");
    if (pi_in.size() != k)
        throw GbmError(ErrorCode::shape, "pi size does not match gamma columns");

    std::vector<KahanSum> total(k);
    std::vector<double> s(k * d, 0.0);
    std::vector<double> comp(k * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* g = gamma.row(i);
        for (std::size_t c = 0; c < k; ++c) total[c].add(g[c]);
        const std::uint64_t* w = z.row_words(i);
        for (std::size_t wi = 0; wi < z.words_per_row(); ++wi) {
            std::uint64_t bits = w[wi];
            while (bits) {
                std::size_t j = wi * 64 + static_cast<std::size_t>(__builtin_ctzll(bits));
                for (std::size_t c = 0; c < k; ++c) {
                    double* sp = &s[c * d + j];
                    double* cp = &comp[c * d + j];
                    double y = g[c] - *cp;
                    double t = *sp + y;
                    *cp = (t - *sp) - y;
                    *sp = t;
                }
                bits &= bits - 1;
            }
        }
    }

    BmmParams out(k, d);
    double grand = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        double tc = total[c].value();
        if (tc == 0.0)
            throw GbmError(ErrorCode::degenerate_component,
                           "component " + std::to_string(c) + " has zero total responsibility");
        for (std::size_t j = 0; j < d; ++j)
            out.mu[c * d + j] = clamp_prob(s[c * d + j] / tc);
        grand += tc;
    }
    if (pi_trainable) {
        for (std::size_t c = 0; c < k; ++c) out.pi[c] = total[c].value() / grand;
    } else {
        out.pi = pi_in;
    }
    return out;
}

double log_likelihood(const BitMatrix& z, const BmmParams& params) {
    validate_params(params);
    return evaluate(z, params).ll;
}

double eq3_value(const BitMatrix& z, const BmmParams& params, const RealMatrix& gamma) {
    validate_params(params);
    if (gamma.n_rows != z.rows() || gamma.n_cols != params.k)
        throw GbmError(ErrorCode::shape, "gamma shape does not match data and mixture");
    LogTables t = make_log_tables(params);
    std::vector<double> s(params.k);
    KahanSum acc;
    for (std::size_t i = 0; i < z.rows(); ++i) {
        row_scores(z, i, params.k, params.d, t, s.data());
        const double* g = gamma.row(i);
        for (std::size_t c = 0; c < params.k; ++c)
            if (g[c] > 0.0) acc.add(g[c] * s[c]);
    }
    return acc.value();
}

BmmParams init_params(const BitMatrix& z, const EmConfig& config, SeededRng& rng) {
    config.validate();
    if (z.rows() == 0) throw GbmError(ErrorCode::empty_input, "init_params needs data rows");
    BmmParams p(config.k, z.cols());
    ColumnStats stats;
    if (config.init_mode == InitMode::centroid) stats = column_stats(z);
    for (std::size_t k = 0; k < config.k; ++k)
        draw_component_row(p.mu.data() + k * p.d, p.d, config, stats, rng);
    return p;
}

std::pair<BmmParams, FitReport> fit(const BitMatrix& z, const EmConfig& config, SeededRng& rng) {
    config.validate();
    if (z.rows() == 0) throw GbmError(ErrorCode::empty_input, "fit needs data rows");
    if (z.rows() < config.k)
        throw GbmError(ErrorCode::degenerate_input,
                       "fit needs at least k rows, got " + std::to_string(z.rows()) +
                           " for k = " + std::to_string(config.k));

    ColumnStats stats;
    if (config.init_mode == InitMode::centroid) stats = column_stats(z);

    Path best;
    std::size_t chosen = 0;
    for (std::size_t w = 0; w < config.n_init; ++w) {
        Path p;
        p.params = init_params(z, config, rng);
        p.gamma = e_step(z, p.params);
        p.reinited.assign(config.k, 0);
        for (std::size_t it = 0; it < config.n_iter; ++it) em_step(p, z, config, stats, rng);
        if (w == 0 || p.ll.back() > best.ll.back()) {
            best = std::move(p);
            chosen = w;
        }
    }

    bool converged = false;
    for (std::size_t s = 0; s < config.n_max; ++s) {
        double prev = best.ll.back();
        em_step(best, z, config, stats, rng);
        double cur = best.ll.back();
        if (std::abs(cur - prev) / std::abs(cur) < config.eps) {
            converged = true;
            break;
        }
    }

    FitReport report;
    report.ll_trace = std::move(best.ll);
    report.eq3_trace = std::move(best.eq3);
    report.iterations = report.ll_trace.size();
    report.converged = converged;
    report.chosen_init = chosen;
    return {std::move(best.params), std::move(report)};
}

BitMatrix sample(const BmmParams& params, std::size_t n, SeededRng& rng) {
    validate_params(params);
    BitMatrix out(n, params.d);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = rng.next_categorical(params.pi);
        const double* mu = params.mu.data() + c * params.d;
        for (std::size_t j = 0; j < params.d; ++j)
            if (rng.next_bernoulli(mu[j])) out.set(i, j, true);
    }
    return out;
}

QuantizedBmm quantize(const BmmParams& params, std::uint32_t q) {
    validate_params(params);
    if (q < 1 || q > 32)
        throw GbmError(ErrorCode::parameter, "q must be in [1, 32], got " + std::to_string(q));
    QuantizedBmm out;
    out.k = params.k;
    out.d = params.d;
    out.q = q;
    out.pi = params.pi;
    out.levels.resize(params.mu.size());
    std::uint64_t max_level = (1ull << q) - 1;
    double scale = static_cast<double>(max_level);
    for (std::size_t i = 0; i < params.mu.size(); ++i) {
        long long level = std::llround(params.mu[i] * scale);
        level = std::clamp<long long>(level, 0, static_cast<long long>(max_level));
        out.levels[i] = static_cast<std::uint32_t>(level);
    }
    return out;
}

BmmParams dequantize(const QuantizedBmm& model) {
    if (model.q < 1 || model.q > 32)
        throw GbmError(ErrorCode::parameter, "q must be in [1, 32]");
    if (model.levels.size() != model.k * model.d || model.pi.size() != model.k)
        throw GbmError(ErrorCode::shape, "quantized mixture sizes do not match k and d");
    BmmParams out(model.k, model.d);
    out.pi = model.pi;
    double scale = static_cast<double>((1ull << model.q) - 1);
    for (std::size_t i = 0; i < model.levels.size(); ++i)
        out.mu[i] = static_cast<double>(model.levels[i]) / scale;
    return out;
}

} // namespace gbm
