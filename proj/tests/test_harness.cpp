#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gbm/error.hpp"
#include "gbm/harness.hpp"
#include "gbm/io.hpp"
#include "gbm/memory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

using namespace gbm;

namespace {

#define CHECK_GBM_THROWS(code_expected, expr)                                            \
    do {                                                                                 \
        bool threw_ = false;                                                             \
        try {                                                                            \
            (void)(expr);                                                                \
        } catch (const GbmError& e_) {                                                   \
            threw_ = true;                                                               \
            CHECK(e_.code() == (code_expected));                                         \
        }                                                                                \
        CHECK(threw_);                                                                   \
    } while (0)

std::string temp_file(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / ("gbm_harness_" + stem)).string();
}

// A compact scenario that still exercises every task transition: 6 classes,
// an initial task of 2 and two incremental tasks of 2.
RunConfig small_config(Method method) {
    RunConfig c;
    c.synth.n_classes = 6;
    c.synth.modes_per_class = 1;
    c.synth.d = 64;
    c.synth.n_per_class = 80;
    c.synth.base_prob = 0.1;
    c.synth.alt_prob = 0.9;
    c.synth.flip_noise = 0.1;
    c.t = 2;
    c.init_count = 2;
    c.method = method;
    c.em.k = 1;
    c.gbm_q = 8;
    c.lr_e = 8;
    c.train.epochs = 15;
    return c;
}

} // namespace

TEST_CASE("scenario splitting respects the initial count and task width") {
    CilScenario s = make_scenario(20, 5, 10, 0);
    REQUIRE(s.class_splits.size() == 6);
    CHECK(s.class_splits[0].size() == 10);
    for (std::size_t i = 1; i < 6; ++i) CHECK(s.class_splits[i].size() == 2);

    std::set<std::uint32_t> seen;
    for (const auto& split : s.class_splits) {
        CHECK(std::is_sorted(split.begin(), split.end()));
        for (std::uint32_t c : split) CHECK(seen.insert(c).second);
    }
    CHECK(seen.size() == 20);
    CHECK(*seen.begin() == 0);
    CHECK(*seen.rbegin() == 19);
}

TEST_CASE("a wide scenario divides the remainder evenly") {
    CilScenario s = make_scenario(100, 20, 40, 7);
    REQUIRE(s.class_splits.size() == 21);
    CHECK(s.class_splits[0].size() == 40);
    for (std::size_t i = 1; i < 21; ++i) CHECK(s.class_splits[i].size() == 3);
}

TEST_CASE("zero incremental tasks put every class up front") {
    CilScenario s = make_scenario(7, 0, 3, 9);
    REQUIRE(s.class_splits.size() == 1);
    std::vector<std::uint32_t> all = {0, 1, 2, 3, 4, 5, 6};
    CHECK(s.class_splits[0] == all);
}

TEST_CASE("scenario shuffling depends on the seed") {
    CilScenario a = make_scenario(20, 5, 10, 1);
    CilScenario b = make_scenario(20, 5, 10, 2);
    CilScenario a2 = make_scenario(20, 5, 10, 1);
    CHECK(a.class_splits == a2.class_splits);
    CHECK(a.class_splits != b.class_splits);
}

TEST_CASE("impossible scenario shapes are configuration errors") {
    CHECK_GBM_THROWS(ErrorCode::config, make_scenario(0, 2, 1, 0));
    CHECK_GBM_THROWS(ErrorCode::config, make_scenario(10, 2, 0, 0));
    CHECK_GBM_THROWS(ErrorCode::config, make_scenario(10, 2, 10, 0));
    CHECK_GBM_THROWS(ErrorCode::config, make_scenario(10, 2, 12, 0));
    CHECK_GBM_THROWS(ErrorCode::config, make_scenario(10, 3, 3, 0));
}

TEST_CASE("synthetic spec validation rejects out-of-range noise") {
    SynthSpec ok;
    ok.validate();
    SynthSpec bad = ok;
    bad.n_classes = 0;
    CHECK_GBM_THROWS(ErrorCode::parameter, bad.validate());
    bad = ok;
    bad.modes_per_class = 0;
    CHECK_GBM_THROWS(ErrorCode::parameter, bad.validate());
    bad = ok;
    bad.base_prob = 0.0;
    CHECK_GBM_THROWS(ErrorCode::parameter, bad.validate());
    bad = ok;
    bad.alt_prob = 1.0;
    CHECK_GBM_THROWS(ErrorCode::parameter, bad.validate());
    bad = ok;
    bad.flip_noise = 0.5;
    CHECK_GBM_THROWS(ErrorCode::parameter, bad.validate());
    bad = ok;
    bad.flip_noise = -0.01;
    CHECK_GBM_THROWS(ErrorCode::parameter, bad.validate());
}

TEST_CASE("synthetic datasets have the documented shapes and split") {
    SynthSpec spec;
    spec.n_classes = 4;
    spec.modes_per_class = 2;
    spec.d = 48;
    spec.n_per_class = 50;
    SeededRng rng(1);
    auto [train, test] = synth_dataset(spec, rng);
    CHECK(train.size() == 4 * 40);
    CHECK(test.size() == 4 * 10);
    CHECK(train.dim() == 48);
    CHECK(test.dim() == 48);
    CHECK(train.is_binary());

    for (std::uint32_t c = 0; c < 4; ++c) {
        std::size_t n_train = 0, n_test = 0;
        for (std::uint32_t y : train.labels) n_train += y == c;
        for (std::uint32_t y : test.labels) n_test += y == c;
        CHECK(n_train == 40);
        CHECK(n_test == 10);
    }

    SeededRng rng2(1);
    auto [train2, test2] = synth_dataset(spec, rng2);
    CHECK(train.labels == train2.labels);
    bool same = true;
    for (std::size_t i = 0; i < train.size() && same; ++i)
        for (std::size_t j = 0; j < spec.d; ++j)
            if (train.bits().get(i, j) != train2.bits().get(i, j)) {
                same = false;
                break;
            }
    CHECK(same);
}

TEST_CASE("with almost no noise the class column means recover the prototypes") {
    SynthSpec spec;
    spec.n_classes = 2;
    spec.modes_per_class = 1;
    spec.d = 64;
    spec.n_per_class = 400;
    spec.base_prob = 0.02;
    spec.alt_prob = 0.98;
    spec.flip_noise = 0.0;
    SeededRng rng(2);
    auto [train, test] = synth_dataset(spec, rng);
    for (const auto& [class_id, rows] : split_by_class(train)) {
        std::vector<double> means = column_means(rows);
        for (double m : means) {
            bool near_base = std::abs(m - spec.base_prob) < 0.05;
            bool near_alt = std::abs(m - spec.alt_prob) < 0.05;
            CHECK((near_base || near_alt));
        }
    }
}

TEST_CASE("average incremental accuracy is the plain mean") {
    CHECK(average_incremental_accuracy({0.8, 0.7, 0.6}) == doctest::Approx(0.7));
    CHECK(average_incremental_accuracy({0.42}) == doctest::Approx(0.42));
    CHECK_GBM_THROWS(ErrorCode::empty_input, average_incremental_accuracy({}));
}

TEST_CASE("run configs read every key and reject unknown ones") {
    ConfigFile file = ConfigFile::parse("data.train = /tmp/a.bin\n"
                                        "data.test = /tmp/b.bin\n"
                                        "synth.n_classes = 12\n"
                                        "synth.modes_per_class = 3\n"
                                        "synth.d = 128\n"
                                        "synth.n_per_class = 250\n"
                                        "synth.base_prob = 0.2\n"
                                        "synth.alt_prob = 0.8\n"
                                        "synth.flip_noise = 0.15\n"
                                        "synth.seed = 77\n"
                                        "scenario.t = 4\n"
                                        "scenario.init_count = 4\n"
                                        "method = lr\n"
                                        "binarizer = thermometer\n"
                                        "em.k = 4\n"
                                        "em.eps = 0.01\n"
                                        "em.n_max = 12\n"
                                        "em.n_init = 3\n"
                                        "em.n_iter = 2\n"
                                        "em.pi_trainable = false\n"
                                        "em.init = random\n"
                                        "gbm.q = 6\n"
                                        "gbm.weighting = by_count\n"
                                        "lr.e = 24\n"
                                        "therm.p = 8\n"
                                        "heaviside.f = 3\n"
                                        "heaviside.ste_clip = 0.7\n"
                                        "train.lr = 0.01\n"
                                        "train.momentum = 0.8\n"
                                        "train.epochs = 5\n"
                                        "train.batch = 32\n"
                                        "train.decay = 0.5\n"
                                        "train.period = 10\n"
                                        "seed = 123\n");
    RunConfig c = run_config_from_file(file);
    CHECK(c.train_path == "/tmp/a.bin");
    CHECK(c.test_path == "/tmp/b.bin");
    CHECK(c.synth.n_classes == 12);
    CHECK(c.synth.modes_per_class == 3);
    CHECK(c.synth.d == 128);
    CHECK(c.synth.n_per_class == 250);
    CHECK(c.synth.base_prob == doctest::Approx(0.2));
    CHECK(c.synth.alt_prob == doctest::Approx(0.8));
    CHECK(c.synth.flip_noise == doctest::Approx(0.15));
    CHECK(c.synth.seed == 77);
    CHECK(c.t == 4);
    CHECK(c.init_count == 4);
    CHECK(c.method == Method::lr);
    CHECK(c.binarizer == BinarizerKind::thermometer);
    CHECK(c.em.k == 4);
    CHECK(c.em.eps == doctest::Approx(0.01));
    CHECK(c.em.n_max == 12);
    CHECK(c.em.n_init == 3);
    CHECK(c.em.n_iter == 2);
    CHECK_FALSE(c.em.pi_trainable);
    CHECK(c.em.init_mode == InitMode::random);
    CHECK(c.gbm_q == 6);
    CHECK(c.weighting == ClassWeighting::by_count);
    CHECK(c.lr_e == 24);
    CHECK(c.therm_p == 8);
    CHECK(c.heaviside_f == 3);
    CHECK(c.ste_clip == doctest::Approx(0.7));
    CHECK(c.train.learning_rate == doctest::Approx(0.01));
    CHECK(c.train.momentum == doctest::Approx(0.8));
    CHECK(c.train.epochs == 5);
    CHECK(c.train.batch_size == 32);
    CHECK(c.train.lr_decay == doctest::Approx(0.5));
    CHECK(c.train.lr_decay_period == 10);
    CHECK(c.seed == 123);

    RunConfig defaults = run_config_from_file(ConfigFile::parse(""));
    CHECK(defaults.t == 5);
    CHECK(defaults.init_count == 10);
    CHECK(defaults.method == Method::gbm);

    CHECK_GBM_THROWS(ErrorCode::config,
                     run_config_from_file(ConfigFile::parse("gbm.quality = 3\n")));
    CHECK_GBM_THROWS(ErrorCode::config,
                     run_config_from_file(ConfigFile::parse("method = boosting\n")));
    CHECK_GBM_THROWS(ErrorCode::config,
                     run_config_from_file(ConfigFile::parse("scenario.t = -1\n")));
}

TEST_CASE("runs reject mismatched data and binarizer combinations") {
    RunConfig c = small_config(Method::finetune);
    c.binarizer = BinarizerKind::thermometer;
    CHECK_GBM_THROWS(ErrorCode::config, run(c));

    RunConfig one_sided = small_config(Method::finetune);
    one_sided.train_path = temp_file("only_train.bin");
    CHECK_GBM_THROWS(ErrorCode::config, run(one_sided));

    RealMatrix x(40, 8);
    std::vector<std::uint32_t> labels(40);
    SeededRng rng(3);
    for (std::size_t i = 0; i < 40; ++i) {
        labels[i] = static_cast<std::uint32_t>(i % 4);
        for (std::size_t j = 0; j < 8; ++j)
            x.at(i, j) = rng.next_normal() + (labels[i] == j / 2 ? 3.0 : 0.0);
    }
    LabeledEmbeddings real_data(x, labels);
    std::string train_path = temp_file("real_train.bin");
    std::string test_path = temp_file("real_test.bin");
    save_embeddings(train_path, real_data);
    save_embeddings(test_path, real_data);

    RunConfig real_cfg;
    real_cfg.train_path = train_path;
    real_cfg.test_path = test_path;
    real_cfg.t = 1;
    real_cfg.init_count = 2;
    real_cfg.method = Method::finetune;
    real_cfg.binarizer = BinarizerKind::none;
    real_cfg.train.epochs = 2;
    CHECK_GBM_THROWS(ErrorCode::config, run(real_cfg));

    real_cfg.binarizer = BinarizerKind::thermometer;
    MetricsReport report = run(real_cfg);
    CHECK(report.acc_matrix.size() == 2);

    real_cfg.binarizer = BinarizerKind::heaviside;
    real_cfg.train.epochs = 5;
    report = run(real_cfg);
    CHECK(report.acc_matrix.size() == 2);

    std::remove(train_path.c_str());
    std::remove(test_path.c_str());
}

TEST_CASE("runs reject test labels that the training data never shows") {
    SeededRng rng(4);
    BitMatrix train_bits(20, 8);
    BitMatrix test_bits(20, 8);
    std::vector<std::uint32_t> train_labels(20);
    std::vector<std::uint32_t> test_labels(20);
    for (std::size_t i = 0; i < 20; ++i) {
        train_labels[i] = static_cast<std::uint32_t>(i % 2);
        test_labels[i] = static_cast<std::uint32_t>(i % 4);
        for (std::size_t j = 0; j < 8; ++j) {
            train_bits.set(i, j, rng.next_bernoulli(0.5));
            test_bits.set(i, j, rng.next_bernoulli(0.5));
        }
    }
    std::string train_path = temp_file("cover_train.bin");
    std::string test_path = temp_file("cover_test.bin");
    save_embeddings(train_path, LabeledEmbeddings(train_bits, train_labels));
    save_embeddings(test_path, LabeledEmbeddings(test_bits, test_labels));

    RunConfig c;
    c.train_path = train_path;
    c.test_path = test_path;
    c.t = 0;
    c.method = Method::finetune;
    c.train.epochs = 1;
    CHECK_GBM_THROWS(ErrorCode::config, run(c));
    std::remove(train_path.c_str());
    std::remove(test_path.c_str());
}

TEST_CASE("report bookkeeping is internally consistent") {
    RunConfig c = small_config(Method::gbm);
    MetricsReport report = run(c);

    REQUIRE(report.acc_matrix.size() == 3);
    REQUIRE(report.all_seen.size() == 3);
    REQUIRE(report.new_acc.size() == 3);
    REQUIRE(report.past_acc.size() == 3);
    REQUIRE(report.init_acc.size() == 3);

    for (std::size_t t = 0; t < 3; ++t) {
        REQUIRE(report.acc_matrix[t].size() == t + 1);
        double pooled = 0.0;
        for (double a : report.acc_matrix[t]) pooled += a;
        pooled /= static_cast<double>(t + 1);
        CHECK(report.all_seen[t] == doctest::Approx(pooled).epsilon(1e-12));
        CHECK(report.new_acc[t] == report.acc_matrix[t][t]);
        CHECK(report.init_acc[t] == report.acc_matrix[t][0]);
    }
    CHECK(std::isnan(report.past_acc[0]));
    CHECK(std::isnan(report.past_acc[1]));
    CHECK(report.past_acc[2] == doctest::Approx(report.acc_matrix[2][1]));

    double avg = (report.all_seen[0] + report.all_seen[1] + report.all_seen[2]) / 3.0;
    CHECK(report.avg_incremental_accuracy == doctest::Approx(avg).epsilon(1e-12));
    CHECK(report.final_accuracy == report.all_seen[2]);
    CHECK(report.memory_bits == memory_bits_gbm(1, 64, 6, 8));
}

TEST_CASE("the report serializes to long-form csv rows") {
    RunConfig c = small_config(Method::lr);
    MetricsReport report = run(c);
    CHECK(report.memory_bits == memory_bits_lr(8, 64, 6));

    std::string csv = report.to_csv();
    CHECK(csv.rfind("task_index,split,accuracy\n", 0) == 0);
    CHECK(csv.find("0,task0,") != std::string::npos);
    CHECK(csv.find("2,task1,") != std::string::npos);
    CHECK(csv.find("2,past,") != std::string::npos);
    CHECK(csv.find("0,past,") == std::string::npos);
    CHECK(csv.find("1,past,") == std::string::npos);

    std::size_t rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    // Header, then per task: the lower-triangular row, all, new, init, and
    // one past row for the final task.
    CHECK(rows == 1 + (1 + 3) + (2 + 3) + (3 + 3 + 1));
}

TEST_CASE("identical configs reproduce identical reports") {
    RunConfig c = small_config(Method::gbm);
    MetricsReport a = run(c);
    MetricsReport b = run(c);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.acc_matrix == b.acc_matrix);
    CHECK(a.memory_bits == b.memory_bits);
}

TEST_CASE("module failures carry the task index that tripped them") {
    RunConfig c = small_config(Method::gbm);
    c.em.k = 200; // more components than rows per class
    bool threw = false;
    try {
        run(c);
    } catch (const GbmError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("task 0") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("warm joint training tracks or beats finetune at the end") {
    RunConfig c = small_config(Method::finetune);
    c.synth.flip_noise = 0.2;
    MetricsReport finetune = run(c);
    c.method = Method::joint;
    MetricsReport joint = run(c);
    CHECK(joint.final_accuracy >= finetune.final_accuracy);
    CHECK(joint.init_acc.back() >= finetune.init_acc.back());
}

TEST_CASE("finetuning forgets the initial classes") {
    RunConfig c = small_config(Method::finetune);
    c.synth.n_classes = 8;
    c.synth.d = 64;
    c.synth.base_prob = 0.02;
    c.synth.alt_prob = 0.5;
    c.synth.flip_noise = 0.1;
    c.t = 3;
    c.init_count = 2;
    c.train.epochs = 25;
    MetricsReport report = run(c);
    CHECK(report.new_acc.back() >= 0.9);
    CHECK(report.init_acc.front() >= 0.9);
    CHECK(report.init_acc.back() <= report.init_acc.front() - 0.3);
}

TEST_CASE("replay methods hold the initial classes far better than finetune") {
    RunConfig c = small_config(Method::finetune);
    c.synth.n_classes = 8;
    c.synth.flip_noise = 0.05;
    c.t = 3;
    c.init_count = 2;
    c.train.epochs = 25;
    MetricsReport finetune = run(c);
    c.method = Method::gbm;
    MetricsReport gbm = run(c);
    c.method = Method::lr;
    MetricsReport lr = run(c);
    CHECK(gbm.init_acc.back() >= finetune.init_acc.back() + 0.2);
    CHECK(lr.init_acc.back() >= finetune.init_acc.back() + 0.2);
}

TEST_CASE("runs work with non-contiguous class ids") {
    SynthSpec spec;
    spec.n_classes = 4;
    spec.modes_per_class = 1;
    spec.d = 32;
    spec.n_per_class = 60;
    spec.base_prob = 0.1;
    spec.alt_prob = 0.9;
    spec.flip_noise = 0.05;
    SeededRng rng(5);
    auto [train, test] = synth_dataset(spec, rng);
    std::vector<std::uint32_t> remap = {3, 11, 40, 1000000};
    for (auto& y : train.labels) y = remap[y];
    for (auto& y : test.labels) y = remap[y];

    std::string train_path = temp_file("gap_train.bin");
    std::string test_path = temp_file("gap_test.bin");
    save_embeddings(train_path, train);
    save_embeddings(test_path, test);

    RunConfig c;
    c.train_path = train_path;
    c.test_path = test_path;
    c.t = 1;
    c.init_count = 2;
    c.method = Method::gbm;
    c.em.k = 1;
    c.gbm_q = 8;
    c.train.epochs = 15;
    RunArtifacts artifacts;
    MetricsReport report = run(c, &artifacts);
    CHECK(report.acc_matrix.size() == 2);
    CHECK(report.final_accuracy >= 0.9);

    REQUIRE(artifacts.classifier.has_value());
    std::vector<std::uint32_t> ids = artifacts.classifier->class_ids();
    std::sort(ids.begin(), ids.end());
    CHECK(ids == remap);
    REQUIRE(artifacts.store.has_value());
    CHECK(artifacts.store->n_classes() == 4);

    std::remove(train_path.c_str());
    std::remove(test_path.c_str());
}

TEST_CASE("memory sweeps report exact budgets in ascending order") {
    RunConfig base = small_config(Method::finetune);
    base.synth.n_classes = 4;
    base.synth.n_per_class = 60;
    base.t = 1;
    base.init_count = 2;
    base.train.epochs = 8;

    std::vector<SweepRow> rows = sweep_memory(base, SweepAxis::gbm_k, {4, 1});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].method == Method::gbm);
    CHECK(rows[0].axis_value == 1);
    CHECK(rows[1].axis_value == 4);
    CHECK(rows[0].memory_bits == memory_bits_gbm(1, 64, 4, 8));
    CHECK(rows[1].memory_bits == memory_bits_gbm(4, 64, 4, 8));
    CHECK(rows[1].memory_bits == 4 * rows[0].memory_bits);

    std::vector<SweepRow> lr_rows = sweep_memory(base, SweepAxis::lr_e, {6, 2});
    REQUIRE(lr_rows.size() == 2);
    CHECK(lr_rows[0].method == Method::lr);
    CHECK(lr_rows[0].axis_value == 2);
    CHECK(lr_rows[0].memory_bits == memory_bits_lr(2, 64, 4));
    CHECK(lr_rows[1].memory_bits == memory_bits_lr(6, 64, 4));

    std::vector<SweepRow> q_rows = sweep_memory(base, SweepAxis::gbm_q, {8, 1});
    REQUIRE(q_rows.size() == 2);
    CHECK(q_rows[0].axis_value == 1);
    CHECK(q_rows[0].memory_bits * 8 == q_rows[1].memory_bits);

    std::string csv = sweep_to_csv(rows);
    CHECK(csv.rfind("method,axis_value,memory_bits,avg_acc\n", 0) == 0);
    CHECK(csv.find("gbm,1," + std::to_string(rows[0].memory_bits) + ",") != std::string::npos);

    CHECK_GBM_THROWS(ErrorCode::empty_input, sweep_memory(base, SweepAxis::gbm_k, {}));
}
