#include "gbm/harness.hpp"

#include "gbm/binarizer.hpp"
#include "gbm/error.hpp"
#include "gbm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_set>
#include <utility>

namespace gbm {

namespace {

std::string format_acc(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

[[noreturn]] void rethrow_with_task(const GbmError& e, std::size_t task) {
    std::string what = e.what();
    std::string prefix = std::string(error_code_name(e.code())) + ": ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    throw GbmError(e.code(), "task " + std::to_string(task) + ": " + what);
}

std::vector<std::uint32_t> sorted_distinct(const std::vector<std::uint32_t>& labels) {
    std::set<std::uint32_t> seen(labels.begin(), labels.end());
    return std::vector<std::uint32_t>(seen.begin(), seen.end());
}

} // namespace

CilScenario make_scenario(std::size_t n_classes, std::size_t t, std::size_t init_count,
                          std::uint64_t seed) {
    if (n_classes == 0)
        throw GbmError(ErrorCode::config, "scenario needs at least one class");
    std::vector<std::uint32_t> order(n_classes);
    std::iota(order.begin(), order.end(), 0u);
    SeededRng rng(seed);
    rng.shuffle(order);

    CilScenario scenario;
    scenario.t = t;
    scenario.seed = seed;
    if (t == 0) {
        std::sort(order.begin(), order.end());
        scenario.class_splits.push_back(std::move(order));
        return scenario;
    }
    if (init_count == 0)
        throw GbmError(ErrorCode::config, "the initial task needs at least one class");
    if (init_count >= n_classes)
        throw GbmError(ErrorCode::config, "no classes left for the incremental tasks");
    std::size_t remainder = n_classes - init_count;
    if (remainder % t != 0)
        throw GbmError(ErrorCode::config,
                       std::to_string(remainder) + " remaining classes do not divide into " +
                           std::to_string(t) + " tasks");
    std::size_t step = remainder / t;
    auto take = [&order](std::size_t from, std::size_t count) {
        std::vector<std::uint32_t> split(order.begin() + static_cast<std::ptrdiff_t>(from),
                                         order.begin() +
                                             static_cast<std::ptrdiff_t>(from + count));
        std::sort(split.begin(), split.end());
        return split;
    };
    scenario.class_splits.push_back(take(0, init_count));
    for (std::size_t i = 0; i < t; ++i)
        scenario.class_splits.push_back(take(init_count + i * step, step));
    return scenario;
}

void SynthSpec::validate() const {
    if (n_classes == 0 || d == 0 || n_per_class == 0)
        throw GbmError(ErrorCode::parameter, "synthetic data needs classes, dimensions and rows");
    if (modes_per_class == 0)
        throw GbmError(ErrorCode::parameter, "modes_per_class must be at least 1");
    if (!(base_prob > 0.0 && base_prob < 1.0) || !(alt_prob > 0.0 && alt_prob < 1.0))
        throw GbmError(ErrorCode::parameter, "mode probabilities must lie inside (0, 1)");
    if (!(flip_noise >= 0.0 && flip_noise < 0.5))
        throw GbmError(ErrorCode::parameter, "flip_noise must lie in [0, 0.5)");
}

std::pair<LabeledEmbeddings, LabeledEmbeddings> synth_dataset(const SynthSpec& spec,
                                                              SeededRng& rng) {
    spec.validate();
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(0.8 * static_cast<double>(spec.n_per_class)));
    std::size_t n_test = spec.n_per_class - n_train;

    BitMatrix train_bits(spec.n_classes * n_train, spec.d);
    BitMatrix test_bits(spec.n_classes * n_test, spec.d);
    std::vector<std::uint32_t> train_labels;
    std::vector<std::uint32_t> test_labels;
    train_labels.reserve(spec.n_classes * n_train);
    test_labels.reserve(spec.n_classes * n_test);

    std::size_t train_row = 0;
    std::size_t test_row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        std::vector<double> prototypes(spec.modes_per_class * spec.d);
        for (double& v : prototypes)
            v = rng.next_bernoulli(0.5) ? spec.alt_prob : spec.base_prob;
        for (std::size_t r = 0; r < spec.n_per_class; ++r) {
            const double* proto = prototypes.data() + (r % spec.modes_per_class) * spec.d;
            bool to_train = r < n_train;
            BitMatrix& dst = to_train ? train_bits : test_bits;
            std::size_t row = to_train ? train_row++ : test_row++;
            for (std::size_t j = 0; j < spec.d; ++j) {
                bool bit = rng.next_bernoulli(proto[j]);
                if (rng.next_bernoulli(spec.flip_noise)) bit = !bit;
                if (bit) dst.set(row, j, true);
            }
            (to_train ? train_labels : test_labels).push_back(static_cast<std::uint32_t>(c));
        }
    }
    return {LabeledEmbeddings(std::move(train_bits), std::move(train_labels)),
            LabeledEmbeddings(std::move(test_bits), std::move(test_labels))};
}

const char* method_name(Method m) {
    switch (m) {
    case Method::gbm: return "gbm";
    case Method::lr: return "lr";
    case Method::finetune: return "finetune";
    case Method::joint: return "joint";
    }
    return "";
}

const char* binarizer_name(BinarizerKind b) {
    switch (b) {
    case BinarizerKind::none: return "none";
    case BinarizerKind::thermometer: return "thermometer";
    case BinarizerKind::heaviside: return "heaviside";
    }
    return "";
}

Method method_from_name(const std::string& name) {
    if (name == "gbm") return Method::gbm;
    if (name == "lr") return Method::lr;
    if (name == "finetune") return Method::finetune;
    if (name == "joint") return Method::joint;
    throw GbmError(ErrorCode::config, "unknown method '" + name + "'");
}

BinarizerKind binarizer_from_name(const std::string& name) {
    if (name == "none") return BinarizerKind::none;
    if (name == "thermometer") return BinarizerKind::thermometer;
    if (name == "heaviside") return BinarizerKind::heaviside;
    throw GbmError(ErrorCode::config, "unknown binarizer '" + name + "'");
}

ClassWeighting weighting_from_name(const std::string& name) {
    if (name == "uniform") return ClassWeighting::uniform;
    if (name == "by_count") return ClassWeighting::by_count;
    throw GbmError(ErrorCode::config, "unknown class weighting '" + name + "'");
}

InitMode init_mode_from_name(const std::string& name) {
    if (name == "centroid") return InitMode::centroid;
    if (name == "random") return InitMode::random;
    throw GbmError(ErrorCode::config, "unknown init mode '" + name + "'");
}

RunConfig run_config_from_file(const ConfigFile& file) {
    static const std::set<std::string> known = {
        "data.train",       "data.test",          "synth.n_classes",
        "synth.modes_per_class", "synth.d",       "synth.n_per_class",
        "synth.base_prob",  "synth.alt_prob",     "synth.flip_noise",
        "synth.seed",       "scenario.t",         "scenario.init_count",
        "method",           "binarizer",          "em.k",
        "em.eps",           "em.n_max",           "em.n_init",
        "em.n_iter",        "em.pi_trainable",    "em.init",
        "gbm.q",            "gbm.weighting",      "lr.e",
        "therm.p",          "heaviside.f",        "heaviside.ste_clip",
        "train.lr",         "train.momentum",     "train.epochs",
        "train.batch",      "train.decay",        "train.period",
        "seed",
    };
    for (const auto& [key, value] : file.entries())
        if (!known.count(key))
            throw GbmError(ErrorCode::config, "unknown key '" + key + "'");

    auto count = [&file](const std::string& key, std::size_t fallback) {
        if (!file.has(key)) return fallback;
        std::int64_t v = file.get_int(key);
        if (v < 0) throw GbmError(ErrorCode::config, "key '" + key + "' must be non-negative");
        return static_cast<std::size_t>(v);
    };

    RunConfig c;
    c.train_path = file.get_string_or("data.train", "");
    c.test_path = file.get_string_or("data.test", "");
    c.synth.n_classes = count("synth.n_classes", c.synth.n_classes);
    c.synth.modes_per_class = count("synth.modes_per_class", c.synth.modes_per_class);
    c.synth.d = count("synth.d", c.synth.d);
    c.synth.n_per_class = count("synth.n_per_class", c.synth.n_per_class);
    c.synth.base_prob = file.get_double_or("synth.base_prob", c.synth.base_prob);
    c.synth.alt_prob = file.get_double_or("synth.alt_prob", c.synth.alt_prob);
    c.synth.flip_noise = file.get_double_or("synth.flip_noise", c.synth.flip_noise);
    c.synth.seed = static_cast<std::uint64_t>(file.get_int_or(
        "synth.seed", static_cast<std::int64_t>(c.synth.seed)));
    c.t = count("scenario.t", c.t);
    c.init_count = count("scenario.init_count", c.init_count);
    c.method = method_from_name(file.get_string_or("method", method_name(c.method)));
    c.binarizer = binarizer_from_name(file.get_string_or("binarizer", binarizer_name(c.binarizer)));
    c.em.k = count("em.k", c.em.k);
    c.em.eps = file.get_double_or("em.eps", c.em.eps);
    c.em.n_max = count("em.n_max", c.em.n_max);
    c.em.n_init = count("em.n_init", c.em.n_init);
    c.em.n_iter = count("em.n_iter", c.em.n_iter);
    c.em.pi_trainable = file.get_bool_or("em.pi_trainable", c.em.pi_trainable);
    c.em.init_mode = init_mode_from_name(file.get_string_or("em.init", "centroid"));
    c.gbm_q = static_cast<std::uint32_t>(count("gbm.q", c.gbm_q));
    c.weighting = weighting_from_name(file.get_string_or("gbm.weighting", "uniform"));
    c.lr_e = count("lr.e", c.lr_e);
    c.therm_p = static_cast<std::uint32_t>(count("therm.p", c.therm_p));
    c.heaviside_f = count("heaviside.f", c.heaviside_f);
    c.ste_clip = file.get_double_or("heaviside.ste_clip", c.ste_clip);
    c.train.learning_rate = file.get_double_or("train.lr", c.train.learning_rate);
    c.train.momentum = file.get_double_or("train.momentum", c.train.momentum);
    c.train.epochs = count("train.epochs", c.train.epochs);
    c.train.batch_size = count("train.batch", c.train.batch_size);
    c.train.lr_decay = file.get_double_or("train.decay", c.train.lr_decay);
    c.train.lr_decay_period = count("train.period", c.train.lr_decay_period);
    c.seed = static_cast<std::uint64_t>(file.get_int_or("seed", static_cast<std::int64_t>(c.seed)));
    return c;
}

std::string MetricsReport::to_csv() const {
    std::string out = "task_index,split,accuracy\n";
    for (std::size_t t = 0; t < acc_matrix.size(); ++t) {
        std::string idx = std::to_string(t);
        for (std::size_t j = 0; j < acc_matrix[t].size(); ++j)
            out += idx + ",task" + std::to_string(j) + "," + format_acc(acc_matrix[t][j]) + "\n";
        out += idx + ",all," + format_acc(all_seen[t]) + "\n";
        out += idx + ",new," + format_acc(new_acc[t]) + "\n";
        if (!std::isnan(past_acc[t])) out += idx + ",past," + format_acc(past_acc[t]) + "\n";
        out += idx + ",init," + format_acc(init_acc[t]) + "\n";
    }
    return out;
}

double average_incremental_accuracy(const std::vector<double>& all_seen_accs) {
    if (all_seen_accs.empty())
        throw GbmError(ErrorCode::empty_input, "no task accuracies to average");
    KahanSum sum;
    for (double a : all_seen_accs) sum.add(a);
    return sum.value() / static_cast<double>(all_seen_accs.size());
}

MetricsReport run(const RunConfig& config, RunArtifacts* artifacts) {
    if (config.train_path.empty() != config.test_path.empty())
        throw GbmError(ErrorCode::config, "data.train and data.test must be set together");

    LabeledEmbeddings raw_train;
    LabeledEmbeddings raw_test;
    if (config.train_path.empty()) {
        SeededRng synth_rng(config.synth.seed);
        std::tie(raw_train, raw_test) = synth_dataset(config.synth, synth_rng);
    } else {
        raw_train = load_embeddings(config.train_path);
        raw_test = load_embeddings(config.test_path);
    }
    if (raw_train.size() == 0)
        throw GbmError(ErrorCode::empty_input, "training set has no rows");
    if (raw_test.size() == 0) throw GbmError(ErrorCode::empty_input, "test set has no rows");
    if (raw_train.dim() != raw_test.dim())
        throw GbmError(ErrorCode::shape, "train and test dimensions differ");
    if (raw_train.is_binary() != raw_test.is_binary())
        throw GbmError(ErrorCode::shape, "train and test payload kinds differ");
    if (config.binarizer == BinarizerKind::none && !raw_train.is_binary())
        throw GbmError(ErrorCode::config, "real-valued features need a binarizer");
    if (config.binarizer != BinarizerKind::none && raw_train.is_binary())
        throw GbmError(ErrorCode::config, "binary features do not take a binarizer");
    if (config.binarizer == BinarizerKind::thermometer && config.therm_p < 1)
        throw GbmError(ErrorCode::config, "therm.p must be at least 1");
    if (config.binarizer == BinarizerKind::heaviside && config.heaviside_f < 1)
        throw GbmError(ErrorCode::config, "heaviside.f must be at least 1");

    std::vector<std::uint32_t> ids = sorted_distinct(raw_train.labels);
    {
        std::unordered_set<std::uint32_t> train_ids(ids.begin(), ids.end());
        for (std::uint32_t y : raw_test.labels)
            if (!train_ids.count(y))
                throw GbmError(ErrorCode::config, "test label " + std::to_string(y) +
                                                      " never occurs in training data");
        std::unordered_set<std::uint32_t> test_ids(raw_test.labels.begin(),
                                                   raw_test.labels.end());
        for (std::uint32_t y : ids)
            if (!test_ids.count(y))
                throw GbmError(ErrorCode::config,
                               "class " + std::to_string(y) + " has no test rows");
    }

    CilScenario scenario = make_scenario(ids.size(), config.t, config.init_count, config.seed);
    for (auto& split : scenario.class_splits)
        for (auto& v : split) v = ids[v];

    std::size_t raw_dim = raw_train.dim();
    std::size_t repr_dim = raw_dim;
    if (config.binarizer == BinarizerKind::thermometer) repr_dim = raw_dim * config.therm_p;
    if (config.binarizer == BinarizerKind::heaviside) repr_dim = raw_dim * config.heaviside_f;

    SeededRng rng(config.seed);
    LinearClassifier clf(InputKind::binary, repr_dim);
    std::optional<GbmStore> store;
    std::optional<LatentReplayBuffer> buffer;
    if (config.method == Method::gbm)
        store.emplace(repr_dim, config.em.k, config.gbm_q, config.weighting);
    if (config.method == Method::lr) buffer.emplace(repr_dim, config.lr_e);

    std::size_t n_tasks = scenario.class_splits.size();
    LabeledEmbeddings enc_train;
    LabeledEmbeddings enc_test;
    std::vector<LabeledEmbeddings> train_tasks(n_tasks);
    std::vector<LabeledEmbeddings> test_tasks(n_tasks);

    auto train_one = [&](std::size_t task) {
        const std::vector<std::uint32_t>& split = scenario.class_splits[task];
        if (task == 0) {
            LabeledEmbeddings task0 = filter_by_classes(raw_train, split);
            clf.extend_outputs(split);
            if (config.binarizer == BinarizerKind::heaviside) {
                HeavisideProjection proj = HeavisideProjection::random_init(
                    raw_dim, config.heaviside_f, rng, config.ste_clip);
                HeavisideTrainResult trained =
                    train_heaviside(task0.reals(), task0.labels, std::move(proj),
                                    std::move(clf), config.train, rng);
                clf = std::move(trained.clf);
                enc_train = LabeledEmbeddings(
                    heaviside_forward(raw_train.reals(), trained.proj), raw_train.labels);
                enc_test = LabeledEmbeddings(heaviside_forward(raw_test.reals(), trained.proj),
                                             raw_test.labels);
            } else {
                if (config.binarizer == BinarizerKind::thermometer) {
                    RangeCalibration cal = calibrate_range(task0.reals());
                    enc_train = LabeledEmbeddings(
                        therm_encode(raw_train.reals(), cal, config.therm_p),
                        raw_train.labels);
                    enc_test = LabeledEmbeddings(
                        therm_encode(raw_test.reals(), cal, config.therm_p), raw_test.labels);
                } else {
                    enc_train = raw_train;
                    enc_test = raw_test;
                }
                LabeledEmbeddings enc0 = filter_by_classes(enc_train, split);
                train_with_replay(clf, to_pm1(enc0.bits()), enc0.labels, split.size(), 0,
                                  ReplaySampler(), config.train, rng);
            }
            for (std::size_t i = 0; i < n_tasks; ++i) {
                train_tasks[i] = filter_by_classes(enc_train, scenario.class_splits[i]);
                test_tasks[i] = filter_by_classes(enc_test, scenario.class_splits[i]);
            }
            return;
        }
        switch (config.method) {
        case Method::gbm:
            clf.extend_outputs(split);
            train_task(clf, train_tasks[task], *store, config.train, rng);
            break;
        case Method::lr: {
            clf.extend_outputs(split);
            ReplaySampler sampler = [&buf = *buffer](std::size_t n, SeededRng& r,
                                                     RealMatrix& rows,
                                                     std::vector<std::uint32_t>& labels) {
                auto [bits, y] = buf.replay(n, r);
                rows = to_pm1(bits);
                labels = std::move(y);
            };
            train_with_replay(clf, to_pm1(train_tasks[task].bits()), train_tasks[task].labels,
                              split.size(), buffer->n_classes(), sampler, config.train, rng);
            break;
        }
        case Method::finetune:
            clf.extend_outputs(split);
            train_with_replay(clf, to_pm1(train_tasks[task].bits()), train_tasks[task].labels,
                              split.size(), 0, ReplaySampler(), config.train, rng);
            break;
        case Method::joint: {
            // Same warm-started protocol as the other methods, but the
            // training pool is every real row seen so far, which makes this
            // an upper bound for any replay approximation.
            clf.extend_outputs(split);
            LabeledEmbeddings pool = train_tasks[0];
            std::size_t n_seen = scenario.class_splits[0].size();
            for (std::size_t j = 1; j <= task; ++j) {
                pool = concat(pool, train_tasks[j]);
                n_seen += scenario.class_splits[j].size();
            }
            train_with_replay(clf, to_pm1(pool.bits()), pool.labels, n_seen, 0,
                              ReplaySampler(), config.train, rng);
            break;
        }
        }
    };

    auto update_memory = [&](std::size_t task) {
        if (config.method == Method::gbm) {
            for (const auto& [class_id, rows] : split_by_class(train_tasks[task]))
                store->update(class_id, rows, config.em, rng);
        } else if (config.method == Method::lr) {
            for (const auto& [class_id, rows] : split_by_class(train_tasks[task]))
                buffer->store(class_id, rows, rng);
        }
    };

    MetricsReport report;
    auto record_metrics = [&](std::size_t task) {
        std::vector<double> row;
        std::size_t pool_correct = 0;
        std::size_t pool_n = 0;
        std::size_t past_correct = 0;
        std::size_t past_n = 0;
        for (std::size_t j = 0; j <= task; ++j) {
            std::size_t correct = clf.count_correct(test_tasks[j]);
            std::size_t n = test_tasks[j].size();
            row.push_back(static_cast<double>(correct) / static_cast<double>(n));
            pool_correct += correct;
            pool_n += n;
            if (j >= 1 && j < task) {
                past_correct += correct;
                past_n += n;
            }
        }
        report.new_acc.push_back(row[task]);
        report.init_acc.push_back(row[0]);
        report.past_acc.push_back(past_n != 0
                                      ? static_cast<double>(past_correct) /
                                            static_cast<double>(past_n)
                                      : std::numeric_limits<double>::quiet_NaN());
        report.all_seen.push_back(static_cast<double>(pool_correct) /
                                  static_cast<double>(pool_n));
        report.acc_matrix.push_back(std::move(row));
    };

    for (std::size_t task = 0; task < n_tasks; ++task) {
        try {
            train_one(task);
            update_memory(task);
            record_metrics(task);
        } catch (const GbmError& e) {
            rethrow_with_task(e, task);
        }
    }

    report.avg_incremental_accuracy = average_incremental_accuracy(report.all_seen);
    report.final_accuracy = report.all_seen.back();
    if (config.method == Method::gbm) report.memory_bits = store->memory_bits();
    if (config.method == Method::lr) report.memory_bits = buffer->memory_bits();
    if (artifacts) {
        artifacts->classifier = std::move(clf);
        artifacts->store = std::move(store);
    }
    return report;
}

std::vector<SweepRow> sweep_memory(const RunConfig& base, SweepAxis axis,
                                   const std::vector<std::uint64_t>& values) {
    if (values.empty())
        throw GbmError(ErrorCode::empty_input, "sweep needs at least one axis value");
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (std::uint64_t v : values) {
        RunConfig c = base;
        switch (axis) {
        case SweepAxis::lr_e:
            c.method = Method::lr;
            c.lr_e = static_cast<std::size_t>(v);
            break;
        case SweepAxis::gbm_q:
            c.method = Method::gbm;
            c.gbm_q = static_cast<std::uint32_t>(v);
            break;
        case SweepAxis::gbm_k:
            c.method = Method::gbm;
            c.em.k = static_cast<std::size_t>(v);
            break;
        }
        MetricsReport report = run(c);
        rows.push_back({c.method, v, report.memory_bits, report.avg_incremental_accuracy});
    }
    std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.memory_bits != b.memory_bits) return a.memory_bits < b.memory_bits;
        return a.axis_value < b.axis_value;
    });
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "method,axis_value,memory_bits,avg_acc\n";
    for (const SweepRow& r : rows)
        out += std::string(method_name(r.method)) + "," + std::to_string(r.axis_value) + "," +
               std::to_string(r.memory_bits) + "," + format_acc(r.avg_acc) + "\n";
    return out;
}

} // namespace gbm
