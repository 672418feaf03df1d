#pragma once

// Sequence Graph Format: a JSON document holding ordered scene-graph frames
// per demonstration.
//
//   {
//     "format": "gnet-sequences",
//     "version": 1,
//     "name": "maniac",                      (optional)
//     "num_node_classes": 21,                (optional; default max class + 1)
//     "action_labels": ["chopping", ...],    (class id = position in list)
//     "sequences": [
//       { "id": "chopping_01",
//         "action_label": "chopping",
//         "frames": [
//           { "frame_index": 0,
//             "node_classes": [4, 6, 7, 12],
//             "edges": [[0, 1], [2, 3]],     (0-based local node ids)
//             "action_label": "chopping" }   (optional; default: sequence label)
//         ] } ] }
//
// Frame indices must be strictly increasing within a sequence.

#include "gnet/errors.hpp"
#include "gnet/graph.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace gnet {

inline constexpr const char* kSequenceFormatTag = "gnet-sequences";
inline constexpr int kSequenceFormatVersion = 1;

namespace seq_detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw format_error(where + ": missing field '" + key + "'");
    return obj.at(key);
}

inline int label_id(const std::vector<std::string>& labels, const std::string& name, const std::string& where) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == name) return static_cast<int>(i);
    }
    std::string known;
    for (const auto& l : labels) known += (known.empty() ? "" : ", ") + l;
    throw format_error(where + ": unknown action label '" + name + "' (known: " + known + ")");
}

} // namespace seq_detail

inline SequenceStore parse_sequence_store(const nlohmann::json& doc, const std::string& source = "<json>") {
    using namespace seq_detail;
    if (doc.contains("format") && doc.at("format") != kSequenceFormatTag) {
        throw format_error(source + ": unexpected format tag " + doc.at("format").dump());
    }
    if (doc.contains("version") && doc.at("version") != kSequenceFormatVersion) {
        throw format_error(source + ": unsupported version " + doc.at("version").dump());
    }

    SequenceStore store;
    try {
        store.name = doc.value("name", std::string{});
        store.action_labels = require(doc, "action_labels", source).get<std::vector<std::string>>();
        int max_class = -1;
        for (const auto& js : require(doc, "sequences", source)) {
            Sequence seq;
            seq.id = require(js, "id", source).get<std::string>();
            const std::string where = source + ": sequence '" + seq.id + "'";
            seq.action = label_id(store.action_labels, require(js, "action_label", where).get<std::string>(), where);
            std::optional<int> prev;
            for (const auto& jf : require(js, "frames", where)) {
                Frame f;
                const int idx = require(jf, "frame_index", where).get<int>();
                if (prev && idx <= *prev) {
                    throw format_error(where + ": frame_index " + std::to_string(idx) + " follows " +
                                       std::to_string(*prev) + "; indices must increase");
                }
                prev = idx;
                const std::string fwhere = where + " frame " + std::to_string(idx);
                f.graph.frame_index = idx;
                f.graph.sequence_id = seq.id;
                f.graph.node_class = require(jf, "node_classes", fwhere).get<std::vector<int>>();
                f.graph.num_nodes = static_cast<int>(f.graph.node_class.size());
                for (const auto& je : require(jf, "edges", fwhere)) {
                    if (!je.is_array() || je.size() != 2) throw format_error(fwhere + ": edge must be a pair");
                    f.graph.edges.push_back({je[0].get<int>(), je[1].get<int>()});
                }
                try {
                    f.graph.validate();
                } catch (const consistency_error& e) {
                    throw format_error(fwhere + ": " + e.what());
                }
                for (int c : f.graph.node_class) {
                    if (c < 0) throw format_error(fwhere + ": negative node class");
                    max_class = std::max(max_class, c);
                }
                f.action = jf.contains("action_label")
                               ? label_id(store.action_labels, jf.at("action_label").get<std::string>(), fwhere)
                               : seq.action;
                seq.frames.push_back(std::move(f));
            }
            store.sequences.push_back(std::move(seq));
        }
        store.num_node_classes = doc.value("num_node_classes", max_class + 1);
        if (store.num_node_classes < max_class + 1) {
            throw format_error(source + ": num_node_classes " + std::to_string(store.num_node_classes) +
                               " is smaller than max node class + 1 = " + std::to_string(max_class + 1));
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(source + ": " + e.what());
    }
    return store;
}

inline SequenceStore load_sequence_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw load_error("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path.string() + ": " + e.what());
    }
    return parse_sequence_store(doc, path.string());
}

inline nlohmann::json sequence_store_to_json(const SequenceStore& store) {
    nlohmann::json doc;
    doc["format"] = kSequenceFormatTag;
    doc["version"] = kSequenceFormatVersion;
    if (!store.name.empty()) doc["name"] = store.name;
    doc["num_node_classes"] = store.num_node_classes;
    doc["action_labels"] = store.action_labels;
    auto& seqs = doc["sequences"] = nlohmann::json::array();
    for (const auto& s : store.sequences) {
        nlohmann::json js;
        js["id"] = s.id;
        js["action_label"] = store.action_labels.at(static_cast<std::size_t>(s.action));
        auto& frames = js["frames"] = nlohmann::json::array();
        for (std::size_t k = 0; k < s.frames.size(); ++k) {
            const auto& f = s.frames[k];
            nlohmann::json jf;
            jf["frame_index"] = f.graph.frame_index.value_or(static_cast<int>(k));
            jf["node_classes"] = f.graph.node_class;
            auto& edges = jf["edges"] = nlohmann::json::array();
            for (const auto& e : f.graph.edges) edges.push_back({e.u, e.v});
            if (f.action != s.action) jf["action_label"] = store.action_labels.at(static_cast<std::size_t>(f.action));
            frames.push_back(std::move(jf));
        }
        seqs.push_back(std::move(js));
    }
    return doc;
}

inline void save_sequence_dataset(const SequenceStore& store, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw load_error("cannot write " + path.string());
    out << sequence_store_to_json(store).dump(1) << '\n';
    if (!out) throw load_error("write failed for " + path.string());
}

} // namespace gnet
