#include "gbm/binarizer.hpp"
#include "gbm/bmm.hpp"
#include "gbm/config.hpp"
#include "gbm/dataset.hpp"
#include "gbm/error.hpp"
#include "gbm/harness.hpp"
#include "gbm/io.hpp"
#include "gbm/memory.hpp"
#include "gbm/rng.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

using namespace gbm;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::shape: return 2;
    case ErrorCode::empty_input: return 3;
    case ErrorCode::parse: return 4;
    case ErrorCode::truncated: return 5;
    case ErrorCode::io: return 6;
    case ErrorCode::parameter: return 7;
    case ErrorCode::config: return 8;
    case ErrorCode::duplicate_class: return 9;
    case ErrorCode::degenerate_input: return 10;
    case ErrorCode::degenerate_component: return 11;
    case ErrorCode::empty_memory: return 12;
    case ErrorCode::divergence: return 13;
    }
    return 1;
}

std::string num(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw GbmError(ErrorCode::io, "cannot open " + path + " for writing");
    out << content;
    if (!out) throw GbmError(ErrorCode::io, "cannot write " + path);
}

void add_synth(CLI::App& app) {
    struct Opts {
        SynthSpec spec;
        std::string train_out;
        std::string test_out;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand("synth", "Generate a planted-mixture binary dataset");
    cmd->add_option("--classes", opts->spec.n_classes, "Number of classes")
        ->capture_default_str();
    cmd->add_option("--modes", opts->spec.modes_per_class, "Prototype modes per class")
        ->capture_default_str();
    cmd->add_option("--dim", opts->spec.d, "Embedding width in bits")->capture_default_str();
    cmd->add_option("--per-class", opts->spec.n_per_class, "Rows per class")
        ->capture_default_str();
    cmd->add_option("--base-prob", opts->spec.base_prob, "Low prototype bit probability")
        ->capture_default_str();
    cmd->add_option("--alt-prob", opts->spec.alt_prob, "High prototype bit probability")
        ->capture_default_str();
    cmd->add_option("--flip-noise", opts->spec.flip_noise, "Per-bit flip probability")
        ->capture_default_str();
    cmd->add_option("--seed", opts->spec.seed, "Generator seed")->capture_default_str();
    cmd->add_option("--train", opts->train_out, "Output path for the training split")
        ->required();
    cmd->add_option("--test", opts->test_out, "Output path for the test split")->required();
    cmd->callback([opts]() {
        SeededRng rng(opts->spec.seed);
        auto [train, test] = synth_dataset(opts->spec, rng);
        save_embeddings(opts->train_out, train);
        save_embeddings(opts->test_out, test);
        std::cout << "wrote " << train.size() << " train and " << test.size()
                  << " test rows of width " << train.dim() << " across "
                  << opts->spec.n_classes << " classes\n";
    });
}

void add_fit_bmm(CLI::App& app) {
    struct Opts {
        std::string in;
        std::string out;
        std::int64_t class_id = -1;
        EmConfig em;
        std::uint32_t q = 32;
        std::string init = "centroid";
        bool fixed_pi = false;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand("fit-bmm", "Fit a Bernoulli mixture to binary rows");
    cmd->add_option("--in", opts->in, "Binary embeddings file")->required();
    cmd->add_option("--out", opts->out, "Output model file")->required();
    cmd->add_option("--class", opts->class_id, "Fit only this class (default: every row)");
    cmd->add_option("--k", opts->em.k, "Mixture components")->capture_default_str();
    cmd->add_option("--q", opts->q, "Quantization bits, 0 keeps full precision")
        ->capture_default_str();
    cmd->add_option("--eps", opts->em.eps, "Relative log-likelihood stop threshold")
        ->capture_default_str();
    cmd->add_option("--n-max", opts->em.n_max, "EM step cap after warm-up")
        ->capture_default_str();
    cmd->add_option("--n-init", opts->em.n_init, "Warm-up restarts")->capture_default_str();
    cmd->add_option("--n-iter", opts->em.n_iter, "EM steps per warm-up")
        ->capture_default_str();
    cmd->add_option("--init", opts->init, "Initialization: centroid or random")
        ->capture_default_str();
    cmd->add_flag("--fixed-pi", opts->fixed_pi, "Keep mixing weights at their initial value");
    cmd->add_option("--seed", opts->em.seed, "Generator seed")->capture_default_str();
    cmd->callback([opts]() {
        LabeledEmbeddings ds = load_embeddings(opts->in);
        if (!ds.is_binary())
            throw GbmError(ErrorCode::config, "fitting needs binary embeddings");
        LabeledEmbeddings rows = ds;
        if (opts->class_id >= 0)
            rows = filter_by_classes(ds, {static_cast<std::uint32_t>(opts->class_id)});
        opts->em.init_mode = init_mode_from_name(opts->init);
        opts->em.pi_trainable = !opts->fixed_pi;
        SeededRng rng(opts->em.seed);
        auto [params, report] = fit(rows.bits(), opts->em, rng);
        if (opts->q > 0)
            save_model(opts->out, quantize(params, opts->q));
        else
            save_model(opts->out, params);
        std::cout << "fitted k=" << params.k << " on " << rows.size() << " rows in "
                  << report.iterations << " steps (warm-up " << report.chosen_init
                  << (report.converged ? ", converged" : ", step cap") << ")\n"
                  << "final log-likelihood " << num("%.6f", report.ll_trace.back()) << "\n";
    });
}

void add_sample(CLI::App& app) {
    struct Opts {
        std::string model;
        std::string out;
        std::size_t n = 0;
        std::uint32_t label = 0;
        std::uint64_t seed = 0;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand("sample", "Draw pseudo-exemplars from a mixture model");
    cmd->add_option("--model", opts->model, "Model file")->required();
    cmd->add_option("--n", opts->n, "Number of rows to draw")->required();
    cmd->add_option("--label", opts->label, "Label attached to every row")
        ->capture_default_str();
    cmd->add_option("--seed", opts->seed, "Generator seed")->capture_default_str();
    cmd->add_option("--out", opts->out, "Output embeddings file")->required();
    cmd->callback([opts]() {
        ModelVariant model = load_model(opts->model);
        BmmParams params = std::holds_alternative<BmmParams>(model)
                               ? std::get<BmmParams>(model)
                               : dequantize(std::get<QuantizedBmm>(model));
        SeededRng rng(opts->seed);
        BitMatrix rows = sample(params, opts->n, rng);
        std::vector<std::uint32_t> labels(opts->n, opts->label);
        save_embeddings(opts->out, LabeledEmbeddings(std::move(rows), std::move(labels)));
        std::cout << "sampled " << opts->n << " rows of width " << params.d << " from k="
                  << params.k << "\n";
    });
}

void add_encode(CLI::App& app) {
    struct Opts {
        std::string in;
        std::string out;
        std::string codec_in;
        std::string codec_out;
        std::uint32_t p = 4;
        CLI::Option* p_opt = nullptr;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand("encode", "Thermometer-encode real embeddings");
    cmd->add_option("--in", opts->in, "Real-valued embeddings file")->required();
    cmd->add_option("--out", opts->out, "Output binary embeddings file")->required();
    opts->p_opt = cmd->add_option("--p", opts->p, "Bits per feature")->capture_default_str();
    cmd->add_option("--codec-in", opts->codec_in,
                    "Reuse the ranges and p of an existing codec file");
    cmd->add_option("--codec-out", opts->codec_out, "Write the codec used to this file");
    cmd->callback([opts]() {
        LabeledEmbeddings ds = load_embeddings(opts->in);
        if (ds.is_binary())
            throw GbmError(ErrorCode::config, "encoding needs real-valued embeddings");
        std::uint32_t p = opts->p;
        RangeCalibration cal;
        if (!opts->codec_in.empty()) {
            auto [codec_p, codec_cal] = load_codec(opts->codec_in);
            if (opts->p_opt->count() > 0 && opts->p != codec_p)
                throw GbmError(ErrorCode::config, "--p conflicts with the codec file");
            p = codec_p;
            cal = std::move(codec_cal);
        } else {
            cal = calibrate_range(ds.reals());
        }
        BitMatrix bits = therm_encode(ds.reals(), cal, p);
        save_embeddings(opts->out, LabeledEmbeddings(std::move(bits), ds.labels));
        if (!opts->codec_out.empty()) save_codec(opts->codec_out, p, cal);
        std::cout << "encoded " << ds.size() << " rows: " << ds.dim() << " features to "
                  << ds.dim() * p << " bits (p=" << p << ")\n";
    });
}

void add_decode(CLI::App& app) {
    struct Opts {
        std::string in;
        std::string codec;
        std::string out;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd =
        app.add_subcommand("decode", "Reconstruct real values from thermometer codes");
    cmd->add_option("--in", opts->in, "Binary embeddings file")->required();
    cmd->add_option("--codec", opts->codec, "Codec file written by encode")->required();
    cmd->add_option("--out", opts->out, "Output real-valued embeddings file")->required();
    cmd->callback([opts]() {
        LabeledEmbeddings ds = load_embeddings(opts->in);
        if (!ds.is_binary())
            throw GbmError(ErrorCode::config, "decoding needs binary embeddings");
        auto [p, cal] = load_codec(opts->codec);
        if (ds.dim() != cal.d() * p)
            throw GbmError(ErrorCode::shape, "embedding width does not match the codec");
        RealMatrix levels = therm_decode(ds.bits(), p);
        for (std::size_t i = 0; i < levels.n_rows; ++i) {
            double* row = levels.row(i);
            for (std::size_t j = 0; j < levels.n_cols; ++j)
                row[j] = cal.lo[j] + row[j] * (cal.hi[j] - cal.lo[j]);
        }
        save_embeddings(opts->out, LabeledEmbeddings(std::move(levels), ds.labels));
        std::cout << "decoded " << ds.size() << " rows to " << cal.d() << " features\n";
    });
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return run_config_from_file(ConfigFile::load(path));
}

void add_run_cil(CLI::App& app) {
    struct Opts {
        std::string config;
        std::string out = "metrics.csv";
        std::string store_out;
        std::string classifier_out;
        std::uint64_t seed = 0;
        CLI::Option* seed_opt = nullptr;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand("run-cil", "Run one class-incremental experiment");
    cmd->add_option("--config", opts->config, "Key-value run configuration file");
    opts->seed_opt = cmd->add_option("--seed", opts->seed, "Override the configured seed");
    cmd->add_option("--out", opts->out, "Metrics CSV path")->capture_default_str();
    cmd->add_option("--store-out", opts->store_out, "Save the final generative store");
    cmd->add_option("--classifier-out", opts->classifier_out, "Save the final classifier");
    cmd->callback([opts]() {
        RunConfig config = load_run_config(opts->config);
        if (opts->seed_opt->count() > 0) config.seed = opts->seed;
        RunArtifacts artifacts;
        MetricsReport report = run(config, &artifacts);
        write_text(opts->out, report.to_csv());
        std::cout << "method " << method_name(config.method) << ", binarizer "
                  << binarizer_name(config.binarizer) << ", "
                  << report.acc_matrix.size() << " tasks, seed " << config.seed << "\n";
        for (std::size_t t = 0; t < report.all_seen.size(); ++t)
            std::cout << "task " << t << ": all-seen " << num("%.4f", report.all_seen[t])
                      << ", new " << num("%.4f", report.new_acc[t]) << "\n";
        std::cout << "average incremental accuracy "
                  << num("%.4f", report.avg_incremental_accuracy) << "\n"
                  << "final accuracy " << num("%.4f", report.final_accuracy) << "\n"
                  << "memory " << report.memory_bits << " bits\n"
                  << "wrote " << opts->out << "\n";
        if (!opts->store_out.empty()) {
            if (!artifacts.store)
                throw GbmError(ErrorCode::config,
                               "only the gbm method produces a store to save");
            save_store(opts->store_out, *artifacts.store);
            std::cout << "wrote " << opts->store_out << "\n";
        }
        if (!opts->classifier_out.empty()) {
            save_classifier(opts->classifier_out, *artifacts.classifier);
            std::cout << "wrote " << opts->classifier_out << "\n";
        }
    });
}

void add_sweep(CLI::App& app) {
    struct Opts {
        std::string config;
        std::string axis;
        std::vector<std::uint64_t> values;
        std::string out = "sweep.csv";
        std::uint64_t seed = 0;
        CLI::Option* seed_opt = nullptr;
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd =
        app.add_subcommand("sweep", "Run a memory-accuracy sweep along one axis");
    cmd->add_option("--config", opts->config, "Key-value run configuration file");
    cmd->add_option("--axis", opts->axis, "Sweep axis: lr_e, gbm_q or gbm_k")->required();
    cmd->add_option("--values", opts->values, "Comma-separated axis values")
        ->delimiter(',')
        ->required();
    opts->seed_opt = cmd->add_option("--seed", opts->seed, "Override the configured seed");
    cmd->add_option("--out", opts->out, "Sweep CSV path")->capture_default_str();
    cmd->callback([opts]() {
        RunConfig config = load_run_config(opts->config);
        if (opts->seed_opt->count() > 0) config.seed = opts->seed;
        SweepAxis axis;
        if (opts->axis == "lr_e")
            axis = SweepAxis::lr_e;
        else if (opts->axis == "gbm_q")
            axis = SweepAxis::gbm_q;
        else if (opts->axis == "gbm_k")
            axis = SweepAxis::gbm_k;
        else
            throw GbmError(ErrorCode::config, "unknown sweep axis '" + opts->axis + "'");
        std::vector<SweepRow> rows = sweep_memory(config, axis, opts->values);
        write_text(opts->out, sweep_to_csv(rows));
        for (const SweepRow& r : rows)
            std::cout << method_name(r.method) << " " << opts->axis << "=" << r.axis_value
                      << ": " << r.memory_bits << " bits, avg "
                      << num("%.4f", r.avg_acc) << "\n";
        std::cout << "wrote " << opts->out << "\n";
    });
}

void add_memory_report(CLI::App& app) {
    struct Opts {
        std::uint64_t d = 0;
        std::uint64_t n_classes = 0;
        std::vector<std::string> gbm_rows; // "K:Q" entries
        std::vector<std::uint64_t> lr_rows;
        std::string out = "memory_report.csv";
    };
    auto opts = std::make_shared<Opts>();
    CLI::App* cmd = app.add_subcommand(
        "memory-report", "Tabulate prototype and replay memory requirements");
    cmd->add_option("--dim", opts->d, "Embedding width in bits")->required();
    cmd->add_option("--classes", opts->n_classes, "Total number of classes")->required();
    cmd->add_option("--gbm", opts->gbm_rows, "Prototype rows as K:Q, repeatable")
        ->delimiter(',');
    cmd->add_option("--lr", opts->lr_rows, "Replay rows as exemplar counts E, repeatable")
        ->delimiter(',');
    cmd->add_option("--out", opts->out, "Report CSV path")->capture_default_str();
    cmd->callback([opts]() {
        if (opts->gbm_rows.empty() && opts->lr_rows.empty())
            throw GbmError(ErrorCode::config, "nothing to report: pass --gbm or --lr");
        std::string csv = "method,K_or_E,q,D,n_classes,bits,Mb\n";
        const std::string dims =
            std::to_string(opts->d) + "," + std::to_string(opts->n_classes) + ",";
        for (const std::string& row : opts->gbm_rows) {
            std::size_t colon = row.find(':');
            std::uint64_t k = 0;
            std::uint64_t q = 0;
            try {
                k = std::stoull(row.substr(0, colon));
                q = colon == std::string::npos ? 32 : std::stoull(row.substr(colon + 1));
            } catch (const std::exception&) {
                throw GbmError(ErrorCode::parse, "bad --gbm entry '" + row + "', want K:Q");
            }
            std::uint64_t bits = memory_bits_gbm(k, opts->d, opts->n_classes, q);
            std::string mb = num("%.3f", static_cast<double>(bits) / 1e6);
            csv += "gbm," + std::to_string(k) + "," + std::to_string(q) + "," + dims +
                   std::to_string(bits) + "," + mb + "\n";
            std::cout << "gbm k=" << k << " q=" << q << ": " << bits << " bits (" << mb
                      << " Mb)\n";
        }
        for (std::uint64_t e : opts->lr_rows) {
            std::uint64_t bits = memory_bits_lr(e, opts->d, opts->n_classes);
            std::string mb = num("%.3f", static_cast<double>(bits) / 1e6);
            csv += "lr," + std::to_string(e) + ",1," + dims + std::to_string(bits) + "," +
                   mb + "\n";
            std::cout << "lr e=" << e << ": " << bits << " bits (" << mb << " Mb)\n";
        }
        write_text(opts->out, csv);
        std::cout << "wrote " << opts->out << "\n";
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative binary memory toolkit"};
    app.require_subcommand(1);
    add_synth(app);
    add_fit_bmm(app);
    add_sample(app);
    add_encode(app);
    add_decode(app);
    add_run_cil(app);
    add_sweep(app);
    add_memory_report(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const gbm::GbmError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
