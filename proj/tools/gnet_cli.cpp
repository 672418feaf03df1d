// gnet: command-line driver for training, evaluation, gradient checking and
// synthetic data generation.

#include "gnet/checkpoint.hpp"
#include "gnet/model_check.hpp"
#include "gnet/run_config.hpp"
#include "gnet/sequence_format.hpp"
#include "gnet/synth.hpp"
#include "gnet/training.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw gnet::load_error("cannot write " + path.string());
    out << text;
}

std::string percent(std::optional<double> v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * *v);
    return buf;
}

nlohmann::json metrics_json(const gnet::EvalMetrics& m) {
    nlohmann::json j;
    j["samples"] = m.num_samples;
    j["mean_loss"] = m.mean_loss;
    j["acc_R"] = m.accuracy_recognition ? nlohmann::json(*m.accuracy_recognition) : nlohmann::json(nullptr);
    j["acc_P"] = m.accuracy_prediction ? nlohmann::json(*m.accuracy_prediction) : nlohmann::json(nullptr);
    return j;
}

void write_confusions(const gnet::EvalMetrics& m, const std::vector<std::string>& labels, const fs::path& dir,
                      const std::string& tag) {
    if (m.confusion_recognition) {
        gnet::write_confusion(*m.confusion_recognition, labels, dir / ("confusion_" + tag + "_recognition.txt"));
    }
    if (m.confusion_prediction) {
        gnet::write_confusion(*m.confusion_prediction, labels, dir / ("confusion_" + tag + "_prediction.txt"));
    }
}

int cmd_train(const std::string& config_path, const std::string& out_override) {
    auto cfg = gnet::load_run_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    const auto data = gnet::prepare_data(cfg);
    gnet::check_model_fits_data(cfg.model, data);
    for (std::size_t k = 0; k < 3; ++k) {
        if (data.splits[k].empty()) throw gnet::split_error("split " + std::to_string(k) + " has no samples");
    }

    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    const auto effective = gnet::run_config_to_json(cfg);
    write_text(out_dir / "config.json", effective.dump(2) + "\n");

    std::printf("train: %zu / val: %zu / test: %zu samples, %d node classes, %d graph classes\n",
                data.splits[0].size(), data.splits[1].size(), data.splits[2].size(), data.num_node_classes,
                data.num_graph_classes);
    if (data.skipped_sequences > 0) {
        std::printf("warning: %zu sequence(s) shorter than the window were skipped\n", data.skipped_sequences);
    }

    gnet::GNetModel model(cfg.model, cfg.training.seed);
    std::printf("model: %zu parameter tensors, %zu scalars\n", model.params().size(), model.params().num_scalars());

    auto result = gnet::train(model, data.splits[0], data.splits[1], cfg.training, [](const gnet::EpochRecord& r) {
        std::printf("epoch %4d  train_loss %.6f  val_loss %.6f  acc_R %s  acc_P %s  (%.2fs)\n", r.epoch,
                    r.train_loss, r.val_loss,
                    std::isnan(r.acc_recognition) ? "-" : percent(r.acc_recognition).c_str(),
                    std::isnan(r.acc_prediction) ? "-" : percent(r.acc_prediction).c_str(), r.seconds);
        std::fflush(stdout);
    });

    gnet::Checkpoint final_ck{cfg.model, effective, cfg.training.seed, cfg.training.epochs, model.params().clone()};
    gnet::Checkpoint best_ck{cfg.model, effective, cfg.training.seed, result.best_epoch, result.best_params.clone()};
    gnet::save_checkpoint(final_ck, out_dir / "checkpoint_final.bin");
    gnet::save_checkpoint(best_ck, out_dir / "checkpoint_best.bin");
    gnet::write_history_report(result.history, out_dir / "metrics.csv");

    const auto best_model = best_ck.to_model();
    const int threads = cfg.training.eval_threads;
    const auto best_val = gnet::evaluate(best_model, data.splits[1], threads);
    const auto best_test = gnet::evaluate(best_model, data.splits[2], threads);
    const auto final_test = gnet::evaluate(model, data.splits[2], threads);
    write_confusions(best_val, data.label_names, out_dir, "best_val");
    write_confusions(best_test, data.label_names, out_dir, "best_test");
    write_confusions(final_test, data.label_names, out_dir, "final_test");

    nlohmann::json summary;
    summary["best_epoch"] = result.best_epoch;
    summary["best"] = {{"val", metrics_json(best_val)}, {"test", metrics_json(best_test)}};
    summary["final"] = {{"test", metrics_json(final_test)}};
    write_text(out_dir / "summary.json", summary.dump(2) + "\n");

    std::printf("best epoch %d: val acc_R %s acc_P %s | test acc_R %s acc_P %s\n", result.best_epoch,
                percent(best_val.accuracy_recognition).c_str(), percent(best_val.accuracy_prediction).c_str(),
                percent(best_test.accuracy_recognition).c_str(), percent(best_test.accuracy_prediction).c_str());
    std::printf("final epoch %d: test acc_R %s acc_P %s\n", cfg.training.epochs,
                percent(final_test.accuracy_recognition).c_str(), percent(final_test.accuracy_prediction).c_str());
    std::printf("wrote %s\n", out_dir.string().c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path, const std::string& split,
             int threads, const std::string& out_dir_arg) {
    const auto ck = gnet::load_checkpoint(checkpoint_path);
    if (ck.run_config.is_null()) {
        throw gnet::config_error(checkpoint_path + ": checkpoint carries no run config; cannot rebuild splits");
    }
    auto cfg = gnet::parse_run_config(ck.run_config);
    cfg.model = ck.model_config;
    if (!data_path.empty()) {
        cfg.dataset.path = data_path;
        if (fs::is_directory(data_path)) {
            cfg.dataset.kind = gnet::DatasetKind::tu;
            cfg.dataset.name = fs::path(data_path).filename().string();
        } else {
            cfg.dataset.kind = gnet::DatasetKind::sequence;
        }
    }
    const auto data = gnet::prepare_data(cfg);
    gnet::check_model_fits_data(cfg.model, data);

    gnet::Dataset selected;
    if (split == "train") selected = data.splits[0];
    else if (split == "val") selected = data.splits[1];
    else if (split == "test") selected = data.splits[2];
    else if (split == "all") selected = data.all();
    else throw gnet::config_error("--split must be one of train, val, test, all (got '" + split + "')");
    if (selected.empty()) throw gnet::split_error("split '" + split + "' selects no samples");

    const auto model = ck.to_model();
    const auto m = gnet::evaluate(model, selected, threads);
    std::printf("split %s: %zu samples  loss %.6f  acc_R %s  acc_P %s\n", split.c_str(), m.num_samples, m.mean_loss,
                percent(m.accuracy_recognition).c_str(), percent(m.accuracy_prediction).c_str());

    const fs::path out_dir = out_dir_arg.empty() ? fs::path(checkpoint_path).parent_path() : fs::path(out_dir_arg);
    if (!out_dir.empty()) fs::create_directories(out_dir);
    write_confusions(m, data.label_names, out_dir.empty() ? fs::path(".") : out_dir, "eval_" + split);
    return 0;
}

int cmd_gradcheck(const std::string& config_path, double eps, bool inject_fault) {
    if (!(eps >= 1e-6 && eps <= 1e-3)) {
        std::fprintf(stderr, "gradcheck: --eps %g outside the supported range [1e-6, 1e-3]\n", eps);
        return kExitBadInput;
    }
    gnet::GNetConfig model_cfg = gnet::gradcheck_config();
    if (!config_path.empty()) model_cfg = gnet::load_run_config(config_path).model;
    const auto sample = gnet::gradcheck_sample();
    if (model_cfg.d_in < 3) throw gnet::config_error("gradcheck: model.d_in must be >= 3 for the built-in sample");
    if (model_cfg.num_classes < 3) throw gnet::config_error("gradcheck: model.num_classes must be >= 3");
    if (inject_fault) gnet::ad::testing_hooks::matmul_left_grad_scale = 1.01;

    double worst = 0.0;
    for (double beta : {0.0, 1.0}) {
        const auto r = gnet::model_gradient_check(model_cfg, sample, eps, beta);
        std::printf("beta=%g: %zu entries, max relative error %.3e at %s[%zu] (analytic %.9g, numeric %.9g)\n", beta,
                    r.entries_checked, r.max_relative_error, r.worst_path.c_str(), r.worst_index, r.worst_analytic,
                    r.worst_numeric);
        worst = std::max(worst, r.max_relative_error);
    }
    const bool ok = worst < 1e-4;
    std::printf("max relative error %.3e: %s\n", worst, ok ? "PASS" : "FAIL");
    return ok ? 0 : kExitFailure;
}

int cmd_synth(const gnet::SynthSpec& spec, const std::string& out_path) {
    const auto store = gnet::generate_synthetic(spec);
    gnet::save_sequence_dataset(store, out_path);
    std::printf("wrote %zu sequences (%zu frames) to %s\n", store.sequences.size(), store.num_frames(),
                out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gnet: variational graph autoencoder for joint graph recognition and prediction"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
    train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_override, "Override the config's output_dir");

    std::string checkpoint, data_path, split = "test", eval_out;
    int threads = 1;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_path,
                     "Dataset path (TU directory or sequence JSON); defaults to the checkpoint's dataset");
    eval->add_option("--split", split, "train | val | test | all")->capture_default_str();
    eval->add_option("--threads", threads, "Evaluation threads")->capture_default_str()->check(CLI::PositiveNumber);
    eval->add_option("--out", eval_out, "Directory for confusion matrices (default: checkpoint directory)");

    double eps = 1e-4;
    std::string gc_config;
    bool inject_fault = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model loss");
    gradcheck->add_option("--eps", eps, "Central-difference step, in [1e-6, 1e-3]")->capture_default_str();
    gradcheck->add_option("--config", gc_config, "Run config whose model block is checked (default: small model)");
    gradcheck->add_flag("--inject-fault", inject_fault, "Corrupt one backward rule (negative control)")
        ->group("");

    gnet::SynthSpec spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic motif-sequence dataset");
    synth->add_option("--classes", spec.classes, "Number of action classes")->capture_default_str();
    synth->add_option("--seqs", spec.seqs_per_class, "Sequences per class")->capture_default_str();
    synth->add_option("--frames", spec.frames, "Frames per sequence")->capture_default_str();
    synth->add_option("--strength", spec.strength, "Motif strength in [0, 1]")->capture_default_str();
    synth->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
    synth->add_option("--node-classes", spec.node_classes, "Object class alphabet size")->capture_default_str();
    synth->add_option("--noise", spec.noise, "Background edge probability")->capture_default_str();
    synth->add_option("--extra-nodes", spec.extra_nodes, "Nodes beyond the largest motif")->capture_default_str();
    synth->add_option("--out", synth_out, "Output file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(config_path, out_override);
        if (*eval) return cmd_eval(checkpoint, data_path, split, threads, eval_out);
        if (*gradcheck) return cmd_gradcheck(gc_config, eps, inject_fault);
        if (*synth) return cmd_synth(spec, synth_out);
    } catch (const gnet::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitBadInput;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitFailure;
}
