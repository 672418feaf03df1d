#pragma once

// Run configuration for the command-line driver plus the shared data
// preparation (load, split, window) used by training and evaluation.
//
// The config file is JSON. Every section and key is optional and defaults to
// the values below; unknown keys are rejected.
//
//   {
//     "dataset":  {"kind": "synthetic" | "sequence" | "tu", "path": "", "name": "",
//                  "window": 4, "horizon": 1,
//                  "synthetic": {"classes": 4, "seqs_per_class": 10, "frames": 8,
//                                "strength": 1.0, "seed": 0, "node_classes": 1,
//                                "noise": 0.1, "extra_nodes": 2}},
//     "split":    {"ratios": [10, 3, 2], "seed": 0, "per_class": true},
//     "model":    {"d_in": 21, "w1": 672, "w2": 672, "d_z": 128, "num_classes": 8,
//                  "set2set_steps": 3, "dropout_p": 0.5, "enable_recognition": true,
//                  "enable_prediction": true, "kl_weight": 0.0, "head_init_gain": 0.05},
//     "training": {"epochs": 200, "lr": 1e-6, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8,
//                  "seed": 0, "shuffle": true, "clip": 0.0, "eval_threads": 1},
//     "output_dir": "runs/default"
//   }

#include "gnet/errors.hpp"
#include "gnet/graph.hpp"
#include "gnet/model.hpp"
#include "gnet/sequence_format.hpp"
#include "gnet/synth.hpp"
#include "gnet/training.hpp"
#include "gnet/tu_format.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace gnet {

enum class DatasetKind { synthetic, sequence, tu };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::synthetic;
    std::string path;
    /// TU dataset name (file prefix); defaults to the directory name.
    std::string name;
    int window = 4;
    int horizon = 1;
    SynthSpec synthetic;
};

struct SplitConfig {
    SplitRatios ratios{10, 3, 2};
    std::uint64_t seed = 0;
    bool per_class = true;
};

struct RunConfig {
    DatasetConfig dataset;
    SplitConfig split;
    GNetConfig model;
    TrainConfig training;
    std::string output_dir = "runs/default";
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
    if (!obj.is_object()) throw config_error(section + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            std::string known;
            for (const auto& a : allowed) known += (known.empty() ? "" : ", ") + a;
            throw config_error(section + "." + key + ": unknown key (allowed: " + known + ")");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(section + "." + key + ": invalid value " + obj.at(key).dump());
    }
}

inline const char* kind_name(DatasetKind k) {
    switch (k) {
    case DatasetKind::synthetic: return "synthetic";
    case DatasetKind::sequence: return "sequence";
    case DatasetKind::tu: return "tu";
    }
    return "?";
}

} // namespace config_detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    using namespace config_detail;
    RunConfig c;
    check_keys(j, {"dataset", "split", "model", "training", "output_dir"}, "config");
    read(j, "output_dir", c.output_dir, "config");

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d, {"kind", "path", "name", "window", "horizon", "synthetic"}, "dataset");
        std::string kind = kind_name(c.dataset.kind);
        read(d, "kind", kind, "dataset");
        if (kind == "synthetic") c.dataset.kind = DatasetKind::synthetic;
        else if (kind == "sequence") c.dataset.kind = DatasetKind::sequence;
        else if (kind == "tu") c.dataset.kind = DatasetKind::tu;
        else throw config_error("dataset.kind: unknown kind '" + kind + "' (allowed: synthetic, sequence, tu)");
        read(d, "path", c.dataset.path, "dataset");
        read(d, "name", c.dataset.name, "dataset");
        read(d, "window", c.dataset.window, "dataset");
        read(d, "horizon", c.dataset.horizon, "dataset");
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            const std::string sec = "dataset.synthetic";
            check_keys(s, {"classes", "seqs_per_class", "frames", "strength", "seed", "node_classes", "noise",
                           "extra_nodes"},
                       sec);
            auto& sp = c.dataset.synthetic;
            read(s, "classes", sp.classes, sec);
            read(s, "seqs_per_class", sp.seqs_per_class, sec);
            read(s, "frames", sp.frames, sec);
            read(s, "strength", sp.strength, sec);
            read(s, "seed", sp.seed, sec);
            read(s, "node_classes", sp.node_classes, sec);
            read(s, "noise", sp.noise, sec);
            read(s, "extra_nodes", sp.extra_nodes, sec);
        }
    }

    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, {"ratios", "seed", "per_class"}, "split");
        if (s.contains("ratios")) {
            std::vector<double> r;
            read(s, "ratios", r, "split");
            if (r.size() != 3) throw config_error("split.ratios: expected three values (train, val, test)");
            c.split.ratios = {r[0], r[1], r[2]};
        }
        read(s, "seed", c.split.seed, "split");
        read(s, "per_class", c.split.per_class, "split");
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, {"d_in", "w1", "w2", "d_z", "num_classes", "set2set_steps", "dropout_p", "enable_recognition",
                       "enable_prediction", "kl_weight", "head_init_gain"},
                   "model");
        read(m, "d_in", c.model.d_in, "model");
        read(m, "w1", c.model.w1, "model");
        read(m, "w2", c.model.w2, "model");
        read(m, "d_z", c.model.d_z, "model");
        read(m, "num_classes", c.model.num_classes, "model");
        read(m, "set2set_steps", c.model.set2set_steps, "model");
        read(m, "dropout_p", c.model.dropout_p, "model");
        read(m, "enable_recognition", c.model.enable_recognition, "model");
        read(m, "enable_prediction", c.model.enable_prediction, "model");
        read(m, "kl_weight", c.model.kl_weight, "model");
        read(m, "head_init_gain", c.model.head_init_gain, "model");
    }

    if (j.contains("training")) {
        const auto& t = j.at("training");
        check_keys(t, {"epochs", "lr", "beta1", "beta2", "eps", "seed", "shuffle", "clip", "eval_threads"}, "training");
        read(t, "epochs", c.training.epochs, "training");
        read(t, "lr", c.training.adam.lr, "training");
        read(t, "beta1", c.training.adam.beta1, "training");
        read(t, "beta2", c.training.adam.beta2, "training");
        read(t, "eps", c.training.adam.eps, "training");
        read(t, "seed", c.training.seed, "training");
        read(t, "shuffle", c.training.shuffle, "training");
        read(t, "clip", c.training.clip, "training");
        read(t, "eval_threads", c.training.eval_threads, "training");
    }

    // Field-level validation.
    try {
        c.model.validate();
    } catch (const config_error& e) {
        throw config_error(std::string("model: ") + e.what());
    }
    if (c.dataset.kind != DatasetKind::synthetic && c.dataset.path.empty()) {
        throw config_error("dataset.path: required for dataset kind '" + std::string(kind_name(c.dataset.kind)) + "'");
    }
    if (c.dataset.window < 1) throw config_error("dataset.window: must be >= 1");
    if (c.dataset.horizon < 0) throw config_error("dataset.horizon: must be >= 0");
    if (c.dataset.kind == DatasetKind::synthetic) {
        try {
            c.dataset.synthetic.validate();
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string("dataset.synthetic: ") + e.what());
        }
    }
    const auto& r = c.split.ratios;
    if (!(r.train > 0 && r.val > 0 && r.test > 0)) throw config_error("split.ratios: values must be positive");
    if (c.training.epochs < 0) throw config_error("training.epochs: must be >= 0");
    if (!(c.training.adam.lr > 0)) throw config_error("training.lr: must be positive");
    if (!(c.training.adam.beta1 >= 0 && c.training.adam.beta1 < 1)) throw config_error("training.beta1: must be in [0, 1)");
    if (!(c.training.adam.beta2 >= 0 && c.training.adam.beta2 < 1)) throw config_error("training.beta2: must be in [0, 1)");
    if (!(c.training.adam.eps > 0)) throw config_error("training.eps: must be positive");
    if (!(c.training.clip >= 0)) throw config_error("training.clip: must be >= 0");
    if (c.training.eval_threads < 1) throw config_error("training.eval_threads: must be >= 1");
    return c;
}

/// Effective config with every default filled in.
inline nlohmann::json run_config_to_json(const RunConfig& c) {
    using config_detail::kind_name;
    const auto& s = c.dataset.synthetic;
    nlohmann::json j;
    j["dataset"] = {{"kind", kind_name(c.dataset.kind)},
                    {"path", c.dataset.path},
                    {"name", c.dataset.name},
                    {"window", c.dataset.window},
                    {"horizon", c.dataset.horizon},
                    {"synthetic",
                     {{"classes", s.classes},
                      {"seqs_per_class", s.seqs_per_class},
                      {"frames", s.frames},
                      {"strength", s.strength},
                      {"seed", s.seed},
                      {"node_classes", s.node_classes},
                      {"noise", s.noise},
                      {"extra_nodes", s.extra_nodes}}}};
    j["split"] = {{"ratios", {c.split.ratios.train, c.split.ratios.val, c.split.ratios.test}},
                  {"seed", c.split.seed},
                  {"per_class", c.split.per_class}};
    j["model"] = c.model;
    j["training"] = {{"epochs", c.training.epochs},    {"lr", c.training.adam.lr},
                     {"beta1", c.training.adam.beta1}, {"beta2", c.training.adam.beta2},
                     {"eps", c.training.adam.eps},     {"seed", c.training.seed},
                     {"shuffle", c.training.shuffle},  {"clip", c.training.clip},
                     {"eval_threads", c.training.eval_threads}};
    j["output_dir"] = c.output_dir;
    return j;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw load_error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

/// Train / val / test datasets for a run.
struct PreparedData {
    std::array<Dataset, 3> splits;
    int num_node_classes = 0;
    int num_graph_classes = 0;
    std::vector<std::string> label_names;
    std::size_t skipped_sequences = 0;

    Dataset all() const {
        Dataset d = splits[0];
        for (std::size_t k = 1; k < 3; ++k) {
            d.samples.insert(d.samples.end(), splits[k].samples.begin(), splits[k].samples.end());
        }
        return d;
    }
};

/// Loads (or generates) the dataset and partitions it. Sequence data is split
/// by demonstration before windowing.
inline PreparedData prepare_data(const RunConfig& c) {
    PreparedData out;
    if (c.dataset.kind == DatasetKind::tu) {
        std::filesystem::path dir(c.dataset.path);
        const std::string name = c.dataset.name.empty() ? dir.filename().string() : c.dataset.name;
        const auto ds = load_tu_dataset(dir, name);
        out.splits = split_dataset(ds, c.split.ratios, c.split.seed, c.split.per_class);
        out.num_node_classes = ds.num_node_classes;
        out.num_graph_classes = ds.num_graph_classes;
        out.label_names = ds.graph_label_names;
    } else {
        const auto store = c.dataset.kind == DatasetKind::sequence ? load_sequence_dataset(c.dataset.path)
                                                                   : generate_synthetic(c.dataset.synthetic);
        const auto parts = split_sequences(store, c.split.ratios, c.split.seed, c.split.per_class);
        for (std::size_t k = 0; k < 3; ++k) {
            auto w = build_windows(parts[k], c.dataset.window, c.dataset.horizon);
            out.splits[k] = std::move(w.dataset);
            out.skipped_sequences += w.skipped_sequences;
        }
        out.num_node_classes = store.num_node_classes;
        out.num_graph_classes = static_cast<int>(store.action_labels.size());
        out.label_names = store.action_labels;
    }
    return out;
}

/// Throws config_error when the model cannot consume the data.
inline void check_model_fits_data(const GNetConfig& m, const PreparedData& data) {
    if (m.d_in != data.num_node_classes) {
        throw config_error("model.d_in = " + std::to_string(m.d_in) + " but the dataset has " +
                           std::to_string(data.num_node_classes) + " node classes (one-hot width must match)");
    }
    if (m.num_classes < data.num_graph_classes) {
        throw config_error("model.num_classes = " + std::to_string(m.num_classes) + " but the dataset has " +
                           std::to_string(data.num_graph_classes) + " graph classes");
    }
}

} // namespace gnet
