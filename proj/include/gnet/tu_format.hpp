#pragma once

// Reader/writer for the multi-file plain-text graph-classification format
// (name_A.txt, name_graph_indicator.txt, name_graph_labels.txt,
// name_node_labels.txt). Node ids in the files are 1-based and global.

#include "gnet/errors.hpp"
#include "gnet/graph.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gnet {

namespace tu_detail {

inline std::filesystem::path file_for(const std::filesystem::path& dir, const std::string& name,
                                      std::string_view suffix) {
    return dir / (name + "_" + std::string(suffix) + ".txt");
}

/// Parses every integer on a line; commas and whitespace separate values.
inline std::vector<long long> parse_ints(std::string_view line, const std::filesystem::path& file,
                                         std::size_t line_no) {
    std::vector<long long> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        const char c = line[pos];
        if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
            ++pos;
            continue;
        }
        long long v = 0;
        auto [end, ec] = std::from_chars(line.data() + pos, line.data() + line.size(), v);
        if (ec != std::errc{}) {
            throw format_error(file.string() + ":" + std::to_string(line_no) + ": expected integer, got '" +
                               std::string(line) + "'");
        }
        out.push_back(v);
        pos = static_cast<std::size_t>(end - line.data());
    }
    return out;
}

/// Reads a file where each non-empty line holds `arity` integers.
inline std::vector<std::vector<long long>> read_rows(const std::filesystem::path& file, std::size_t arity) {
    std::ifstream in(file);
    if (!in) throw load_error("cannot open " + file.string());
    std::vector<std::vector<long long>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto vals = parse_ints(line, file, line_no);
        if (vals.empty()) continue;
        if (vals.size() != arity) {
            throw format_error(file.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(arity) + " value(s), got " + std::to_string(vals.size()));
        }
        rows.push_back(std::move(vals));
    }
    return rows;
}

/// Maps distinct values to contiguous ids in ascending value order.
inline std::map<long long, int> contiguous_ids(const std::vector<long long>& values) {
    std::set<long long> uniq(values.begin(), values.end());
    std::map<long long, int> ids;
    int next = 0;
    for (auto v : uniq) ids[v] = next++;
    return ids;
}

} // namespace tu_detail

/// Loads one dataset in the TU graph format. Graph and node labels are
/// remapped to contiguous 0-based ids; the original values are kept on the
/// dataset. Prediction labels equal recognition labels.
inline Dataset load_tu_dataset(const std::filesystem::path& dir, const std::string& name) {
    using namespace tu_detail;
    const auto a_file = file_for(dir, name, "A");
    const auto ind_file = file_for(dir, name, "graph_indicator");
    const auto glabel_file = file_for(dir, name, "graph_labels");
    const auto nlabel_file = file_for(dir, name, "node_labels");
    for (const auto& f : {a_file, ind_file, glabel_file, nlabel_file}) {
        if (!std::filesystem::exists(f)) throw load_error("missing dataset file " + f.string());
    }

    std::vector<long long> indicator;
    for (auto& r : read_rows(ind_file, 1)) indicator.push_back(r[0]);
    std::vector<long long> graph_labels;
    for (auto& r : read_rows(glabel_file, 1)) graph_labels.push_back(r[0]);
    std::vector<long long> node_labels;
    for (auto& r : read_rows(nlabel_file, 1)) node_labels.push_back(r[0]);

    if (node_labels.size() != indicator.size()) {
        throw consistency_error(nlabel_file.string() + ": " + std::to_string(node_labels.size()) +
                                " node labels for " + std::to_string(indicator.size()) + " nodes");
    }
    const auto num_graphs = graph_labels.size();
    std::vector<std::size_t> first_node(num_graphs + 1, 0);
    std::vector<int> count(num_graphs, 0);
    for (std::size_t k = 0; k < indicator.size(); ++k) {
        const auto g = indicator[k];
        if (g < 1 || static_cast<std::size_t>(g) > num_graphs) {
            throw consistency_error(ind_file.string() + ":" + std::to_string(k + 1) + ": graph id " +
                                    std::to_string(g) + " outside [1, " + std::to_string(num_graphs) + "]");
        }
        if (k > 0 && g < indicator[k - 1]) {
            throw format_error(ind_file.string() + ":" + std::to_string(k + 1) +
                               ": graph ids must be non-decreasing");
        }
        ++count[static_cast<std::size_t>(g - 1)];
    }
    for (std::size_t g = 0; g < num_graphs; ++g) first_node[g + 1] = first_node[g] + static_cast<std::size_t>(count[g]);

    const auto node_ids = contiguous_ids(node_labels);
    const auto graph_ids = contiguous_ids(graph_labels);

    Dataset ds;
    ds.name = name;
    ds.num_node_classes = static_cast<int>(node_ids.size());
    ds.num_graph_classes = static_cast<int>(graph_ids.size());
    for (const auto& [value, id] : graph_ids) ds.graph_label_names.push_back(std::to_string(value));
    for (const auto& [value, id] : node_ids) ds.node_label_values.push_back(static_cast<int>(value));

    ds.samples.resize(num_graphs);
    for (std::size_t g = 0; g < num_graphs; ++g) {
        auto& s = ds.samples[g];
        s.graph.num_nodes = count[g];
        s.graph.frame_index = static_cast<int>(g);
        for (std::size_t k = first_node[g]; k < first_node[g + 1]; ++k) {
            s.graph.node_class.push_back(node_ids.at(node_labels[k]));
        }
        s.recognition_label = graph_ids.at(graph_labels[g]);
        s.prediction_label = s.recognition_label;
        s.window_ids = {static_cast<int>(g)};
    }

    std::vector<std::set<std::pair<int, int>>> seen(num_graphs);
    std::ifstream in(a_file);
    if (!in) throw load_error("cannot open " + a_file.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto vals = parse_ints(line, a_file, line_no);
        if (vals.empty()) continue;
        if (vals.size() != 2) {
            throw format_error(a_file.string() + ":" + std::to_string(line_no) + ": expected 2 node ids");
        }
        const auto i = vals[0], j = vals[1];
        const auto n = static_cast<long long>(indicator.size());
        if (i < 1 || i > n || j < 1 || j > n) {
            throw consistency_error(a_file.string() + ":" + std::to_string(line_no) + ": node id outside [1, " +
                                    std::to_string(n) + "]");
        }
        const auto gi = indicator[static_cast<std::size_t>(i - 1)];
        const auto gj = indicator[static_cast<std::size_t>(j - 1)];
        if (gi != gj) {
            throw consistency_error(a_file.string() + ":" + std::to_string(line_no) + ": edge (" +
                                    std::to_string(i) + ", " + std::to_string(j) + ") joins graph " +
                                    std::to_string(gi) + " and graph " + std::to_string(gj));
        }
        if (i == j) {
            throw consistency_error(a_file.string() + ":" + std::to_string(line_no) + ": self-loop on node " +
                                    std::to_string(i));
        }
        const auto g = static_cast<std::size_t>(gi - 1);
        const int u = static_cast<int>(static_cast<std::size_t>(i - 1) - first_node[g]);
        const int v = static_cast<int>(static_cast<std::size_t>(j - 1) - first_node[g]);
        if (seen[g].emplace(std::min(u, v), std::max(u, v)).second) {
            ds.samples[g].graph.edges.push_back({u, v});
        }
    }
    return ds;
}

/// Writes a dataset in the TU graph format, listing both directions of each
/// edge. Label values written are the original ones recorded on the dataset
/// (or the contiguous ids when none are recorded).
inline void write_tu_dataset(const Dataset& ds, const std::filesystem::path& dir, const std::string& name) {
    using namespace tu_detail;
    std::filesystem::create_directories(dir);
    auto open = [&](std::string_view suffix) {
        const auto path = file_for(dir, name, suffix);
        std::ofstream out(path);
        if (!out) throw load_error("cannot write " + path.string());
        return out;
    };
    auto node_value = [&](int c) {
        return ds.node_label_values.empty() ? c : ds.node_label_values.at(static_cast<std::size_t>(c));
    };
    auto graph_value = [&](int c) -> std::string {
        return ds.graph_label_names.empty() ? std::to_string(c) : ds.graph_label_names.at(static_cast<std::size_t>(c));
    };

    auto a = open("A");
    auto ind = open("graph_indicator");
    auto gl = open("graph_labels");
    auto nl = open("node_labels");
    long long base = 1;
    for (std::size_t g = 0; g < ds.samples.size(); ++g) {
        const auto& s = ds.samples[g];
        for (const auto& e : s.graph.edges) {
            a << base + e.u << ", " << base + e.v << '\n';
            a << base + e.v << ", " << base + e.u << '\n';
        }
        for (int k = 0; k < s.graph.num_nodes; ++k) {
            ind << g + 1 << '\n';
            nl << node_value(s.graph.node_class[static_cast<std::size_t>(k)]) << '\n';
        }
        gl << graph_value(s.recognition_label) << '\n';
        base += s.graph.num_nodes;
    }
}

} // namespace gnet
