#include "gnet/checkpoint.hpp"
#include "gnet/run_config.hpp"
#include "gnet/sequence_format.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

using namespace gnet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

/// Runs the CLI with the given arguments, capturing stdout and stderr.
RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + GNET_CLI_PATH + "\" " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("gnet_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path source(const std::string& rel) { return fs::path(GNET_SOURCE_DIR) / rel; }

/// Tiny-fixture config with an absolute data path, written to `dir`.
fs::path tiny_config(const fs::path& dir, int epochs, const std::function<void(nlohmann::json&)>& edit = {}) {
    auto j = nlohmann::json::parse(read_file(source("tests/fixtures/tiny/tiny_config.json")));
    j["dataset"]["path"] = source("tests/fixtures/tiny").string();
    j["training"]["epochs"] = epochs;
    j["output_dir"] = (dir / "run").string();
    if (edit) edit(j);
    const auto path = dir / "config.json";
    std::ofstream(path) << j.dump(2);
    return path;
}

} // namespace

TEST(CliGradcheck, PassesOnDefaultModel) {
    const auto r = run_cli("gradcheck");
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("PASS"), std::string::npos) << r.output;
}

TEST(CliGradcheck, InjectedFaultFails) {
    const auto r = run_cli("gradcheck --inject-fault");
    EXPECT_EQ(r.code, 1) << r.output;
    EXPECT_NE(r.output.find("FAIL"), std::string::npos) << r.output;
}

TEST(CliGradcheck, EpsOutOfRange) {
    for (const char* eps : {"1", "1e-9"}) {
        const auto r = run_cli(std::string("gradcheck --eps ") + eps);
        EXPECT_EQ(r.code, 2) << r.output;
        EXPECT_NE(r.output.find("eps"), std::string::npos) << r.output;
    }
}

TEST(CliSynth, DeterministicAndLoadable) {
    const auto dir = scratch("synth");
    const auto a = dir / "a.json", b = dir / "b.json";
    const std::string common = "synth --classes 2 --seqs 10 --frames 8 --seed 5 --out ";
    ASSERT_EQ(run_cli(common + a.string()).code, 0);
    ASSERT_EQ(run_cli(common + b.string()).code, 0);
    EXPECT_EQ(read_file(a), read_file(b));
    const auto store = load_sequence_dataset(a);
    EXPECT_EQ(store.sequences.size(), 20u);
    EXPECT_EQ(store.num_frames(), 160u);
    const auto c = dir / "c.json";
    ASSERT_EQ(run_cli("synth --classes 2 --seqs 10 --frames 8 --seed 6 --out " + c.string()).code, 0);
    EXPECT_NE(read_file(a), read_file(c));
}

TEST(CliTrain, ZeroEpochsWritesArtifacts) {
    const auto dir = scratch("train0");
    const auto r = run_cli("train --config " + tiny_config(dir, 0).string());
    ASSERT_EQ(r.code, 0) << r.output;
    const auto run = dir / "run";
    for (const char* f : {"checkpoint_best.bin", "checkpoint_final.bin", "config.json", "summary.json"})
        EXPECT_TRUE(fs::exists(run / f)) << f;
    EXPECT_EQ(read_file(run / "metrics.csv"), "epoch,train_loss,val_loss,acc_R,acc_P\n");
}

TEST(CliTrain, UnknownKeyRejected) {
    const auto dir = scratch("badkey");
    const auto cfg = tiny_config(dir, 1, [](nlohmann::json& j) { j["model"]["width"] = 3; });
    const auto r = run_cli("train --config " + cfg.string());
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("model.width"), std::string::npos) << r.output;
}

TEST(CliTrain, InvalidFieldNamed) {
    const auto dir = scratch("badfield");
    const auto cfg = tiny_config(dir, 1, [](nlohmann::json& j) { j["training"]["lr"] = -1.0; });
    const auto r = run_cli("train --config " + cfg.string());
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("training.lr"), std::string::npos) << r.output;
}

TEST(CliTrain, InputWidthMismatchDescribed) {
    const auto dir = scratch("din");
    const auto cfg = tiny_config(dir, 1, [](nlohmann::json& j) { j["model"]["d_in"] = 5; });
    const auto r = run_cli("train --config " + cfg.string());
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("d_in = 5"), std::string::npos) << r.output;
}

TEST(CliTrain, MissingConfigFile) {
    const auto r = run_cli("train --config /nonexistent/config.json");
    EXPECT_NE(r.code, 0);
}

TEST(CliTrain, RerunFromEchoedConfigReproducesMetrics) {
    const auto dir = scratch("rerun");
    const auto r1 = run_cli("train --config " + tiny_config(dir, 3).string());
    ASSERT_EQ(r1.code, 0) << r1.output;
    const auto echoed = dir / "run" / "config.json";
    const auto r2 = run_cli("train --config " + echoed.string() + " --out " + (dir / "again").string());
    ASSERT_EQ(r2.code, 0) << r2.output;
    const auto m1 = read_file(dir / "run" / "metrics.csv");
    EXPECT_EQ(std::count(m1.begin(), m1.end(), '\n'), 4);
    EXPECT_EQ(m1, read_file(dir / "again" / "metrics.csv"));
    EXPECT_EQ(load_checkpoint(dir / "run" / "checkpoint_final.bin").params,
              load_checkpoint(dir / "again" / "checkpoint_final.bin").params);
}

TEST(CliEval, TinyCheckpointOnTrainSplit) {
    const auto dir = scratch("eval");
    const auto r = run_cli("eval --checkpoint " + source("tests/fixtures/tiny/tiny_checkpoint.bin").string() +
                           " --data " + source("tests/fixtures/tiny").string() + " --split train --out " +
                           dir.string());
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("8 samples"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("acc_R 100.00%"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("acc_P 100.00%"), std::string::npos) << r.output;
    EXPECT_TRUE(fs::exists(dir / "confusion_eval_train_recognition.txt"));
}

TEST(CliEval, UnknownSplitRejected) {
    const auto dir = scratch("eval_bad");
    const auto r = run_cli("eval --checkpoint " + source("tests/fixtures/tiny/tiny_checkpoint.bin").string() +
                           " --data " + source("tests/fixtures/tiny").string() + " --split holdout --out " +
                           dir.string());
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("--split"), std::string::npos) << r.output;
}

TEST(CliEval, WidthMismatchAgainstOtherData) {
    // Same graphs as the tiny fixture, with one extra node class.
    const auto dir = scratch("eval_din");
    const auto data = dir / "wide";
    fs::create_directories(data);
    for (const char* part : {"A", "graph_indicator", "graph_labels", "node_labels"}) {
        fs::copy_file(source(std::string("tests/fixtures/tiny/tiny_") + part + ".txt"),
                      data / (std::string("wide_") + part + ".txt"));
    }
    std::string labels = read_file(data / "wide_node_labels.txt");
    labels.replace(0, labels.find('\n'), "3");
    std::ofstream(data / "wide_node_labels.txt") << labels;
    const auto r = run_cli("eval --checkpoint " + source("tests/fixtures/tiny/tiny_checkpoint.bin").string() +
                           " --data " + data.string() + " --split all --out " + dir.string());
    EXPECT_NE(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("d_in"), std::string::npos) << r.output;
}

TEST(Presets, ManiacConfig) {
    const auto c = load_run_config(source("configs/maniac.json"));
    EXPECT_EQ(c.dataset.kind, DatasetKind::sequence);
    EXPECT_EQ(c.dataset.window, 4);
    EXPECT_EQ(c.model.d_in, 21);
    EXPECT_EQ(c.model.w1, 672);
    EXPECT_EQ(c.model.w2, 672);
    EXPECT_EQ(c.model.num_classes, 8);
    EXPECT_TRUE(c.model.enable_recognition && c.model.enable_prediction);
    EXPECT_EQ(c.model.dropout_p, 0.5);
    EXPECT_EQ(c.training.epochs, 200);
    EXPECT_EQ(c.training.adam.lr, 1e-6);
    EXPECT_EQ(c.split.ratios.train, 10);
    EXPECT_EQ(c.split.ratios.val, 3);
    EXPECT_EQ(c.split.ratios.test, 2);
}

TEST(Presets, Msrc9Config) {
    const auto c = load_run_config(source("configs/msrc9.json"));
    EXPECT_EQ(c.dataset.kind, DatasetKind::tu);
    EXPECT_EQ(c.dataset.name, "MSRC_9");
    EXPECT_EQ(c.model.d_in, 10);
    EXPECT_EQ(c.model.w1, 1280);
    EXPECT_EQ(c.model.w2, 1280);
    EXPECT_FALSE(c.model.enable_prediction);
    EXPECT_EQ(c.training.epochs, 500);
    EXPECT_EQ(c.training.adam.lr, 1e-6);
    EXPECT_EQ(c.split.ratios.train, 8);
    EXPECT_EQ(c.split.ratios.val, 1);
    EXPECT_EQ(c.split.ratios.test, 1);
}

TEST(Presets, SyntheticConfig) {
    const auto c = load_run_config(source("configs/synthetic.json"));
    EXPECT_EQ(c.dataset.kind, DatasetKind::synthetic);
    EXPECT_EQ(c.model.num_classes, c.dataset.synthetic.classes);
    EXPECT_EQ(c.model.d_in, c.dataset.synthetic.node_classes);
}
