#pragma once

#include "gbm/bmm.hpp"
#include "gbm/classifier.hpp"
#include "gbm/config.hpp"
#include "gbm/dataset.hpp"
#include "gbm/memory.hpp"
#include "gbm/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gbm {

// Class-incremental schedule: an initial task followed by t incremental
// tasks, each owning a disjoint, non-empty set of class ids.
struct CilScenario {
    std::size_t t = 0;
    std::vector<std::vector<std::uint32_t>> class_splits; // index 0 = initial task
    std::uint64_t seed = 0;
};

// Shuffles class ids 0..n_classes-1 once by seed, assigns the first
// init_count to the initial task and splits the remainder equally into t
// tasks (each split is returned sorted). t = 0 puts every class in the
// initial task and ignores init_count. A remainder not divisible by t is a
// configuration error.
CilScenario make_scenario(std::size_t n_classes, std::size_t t, std::size_t init_count,
                          std::uint64_t seed);

// Planted-mixture generator: every class gets modes_per_class prototype
// vectors whose entries are base_prob or alt_prob (a fair coin per
// position), rows cycle through the modes, each bit is drawn Bernoulli from
// the prototype and then flipped with probability flip_noise.
struct SynthSpec {
    std::size_t n_classes = 20;
    std::size_t modes_per_class = 2;
    std::size_t d = 256;
    std::size_t n_per_class = 500;
    double base_prob = 0.02;
    double alt_prob = 0.5;
    double flip_noise = 0.1;
    std::uint64_t seed = 42; // used by callers that construct the generator

    void validate() const;
};

// Binary train/test pair with an 80/20 per-class split (the first 80% of
// each class's rows go to train, so both halves see every mode).
std::pair<LabeledEmbeddings, LabeledEmbeddings> synth_dataset(const SynthSpec& spec,
                                                              SeededRng& rng);

enum class Method { gbm, lr, finetune, joint };
enum class BinarizerKind { none, thermometer, heaviside };

const char* method_name(Method m);
const char* binarizer_name(BinarizerKind b);
Method method_from_name(const std::string& name);
BinarizerKind binarizer_from_name(const std::string& name);
ClassWeighting weighting_from_name(const std::string& name);
InitMode init_mode_from_name(const std::string& name);

// Everything one experiment needs. With an empty train_path the dataset is
// generated from `synth`; otherwise train_path/test_path are embedding
// files. The em/train/binarizer blocks configure the respective modules;
// seed drives every stochastic choice of the run itself.
struct RunConfig {
    std::string train_path;
    std::string test_path;
    SynthSpec synth;

    std::size_t t = 5;
    std::size_t init_count = 10;
    Method method = Method::gbm;
    BinarizerKind binarizer = BinarizerKind::none;

    EmConfig em;
    std::uint32_t gbm_q = 32;
    ClassWeighting weighting = ClassWeighting::uniform;
    std::size_t lr_e = 20;

    std::uint32_t therm_p = 4;
    std::size_t heaviside_f = 2;
    double ste_clip = 1.0;

    TrainConfig train;
    std::uint64_t seed = 2;
};

// Keys mirror the struct: data.train, data.test, synth.*, scenario.t,
// scenario.init_count, method, binarizer, em.*, gbm.q, gbm.weighting, lr.e,
// therm.p, heaviside.f, heaviside.ste_clip, train.*, seed. Absent keys keep
// the defaults; unknown keys are a configuration error.
RunConfig run_config_from_file(const ConfigFile& file);

// Accuracy bookkeeping of one run. acc_matrix[t][j] is the accuracy on task
// j's test classes after learning task t (lower-triangular); all_seen[t]
// pools every seen test row. The group curves follow the usual breakdown:
// new = current task, init = initial task, past = everything between (NaN
// while that group is empty).
struct MetricsReport {
    std::vector<std::vector<double>> acc_matrix;
    std::vector<double> all_seen;
    double avg_incremental_accuracy = 0.0;
    double final_accuracy = 0.0;
    std::vector<double> new_acc;
    std::vector<double> past_acc;
    std::vector<double> init_acc;
    std::uint64_t memory_bits = 0;

    // Long-form rows "task_index,split,accuracy" where split is task<j>,
    // all, new, past or init; rows whose group is empty are skipped.
    std::string to_csv() const;
};

// Arithmetic mean of the per-task all-seen accuracies.
double average_incremental_accuracy(const std::vector<double>& all_seen_accs);

// End state of a run, for callers that want to persist it.
struct RunArtifacts {
    std::optional<LinearClassifier> classifier;
    std::optional<GbmStore> store; // gbm method only
};

// Runs one class-incremental experiment: task 0 sets up the binarizer (when
// the data is real-valued) and trains the classifier on the initial
// classes; every later task extends the classifier, trains per the method
// (gbm and lr mix in replay, finetune trains on the new classes only, joint
// continues training on every real row seen so far) and then updates the
// memory. Module errors are re-raised with the failing task index prepended.
MetricsReport run(const RunConfig& config, RunArtifacts* artifacts = nullptr);

// One run per axis value with everything else fixed. The axis also forces
// the method: lr_e runs lr, gbm_q and gbm_k run gbm.
enum class SweepAxis { lr_e, gbm_q, gbm_k };

struct SweepRow {
    Method method;
    std::uint64_t axis_value;
    std::uint64_t memory_bits;
    double avg_acc;
};

// Rows come back sorted by memory_bits (axis value breaks ties).
std::vector<SweepRow> sweep_memory(const RunConfig& base, SweepAxis axis,
                                   const std::vector<std::uint64_t>& values);

// "method,axis_value,memory_bits,avg_acc" rows.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

} // namespace gbm
