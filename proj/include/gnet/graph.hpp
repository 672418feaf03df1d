#pragma once

#include "gnet/errors.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gnet {

/// Undirected, unweighted edge between two node ids of the same graph.
struct Edge {
    int u = 0;
    int v = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// A scene graph or benchmark instance. Nodes carry a single object class id;
/// every edge has implicit weight 1.
struct Graph {
    int num_nodes = 0;
    std::vector<int> node_class;
    std::vector<Edge> edges;
    std::optional<int> frame_index;
    std::optional<std::string> sequence_id;

    std::size_t num_edges() const { return edges.size(); }

    /// Throws consistency_error if an endpoint is out of range, an edge is a
    /// self-loop, or an unordered pair appears twice.
    void validate() const {
        if (num_nodes < 0 || static_cast<std::size_t>(num_nodes) != node_class.size()) {
            throw consistency_error("graph: node_class has " + std::to_string(node_class.size()) +
                                    " entries for " + std::to_string(num_nodes) + " nodes");
        }
        std::set<std::pair<int, int>> seen;
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const auto& e = edges[k];
            if (e.u < 0 || e.u >= num_nodes || e.v < 0 || e.v >= num_nodes) {
                throw consistency_error("graph: edge " + std::to_string(k) + " (" + std::to_string(e.u) +
                                        ", " + std::to_string(e.v) + ") has an endpoint outside [0, " +
                                        std::to_string(num_nodes) + ")");
            }
            if (e.u == e.v) {
                throw consistency_error("graph: edge " + std::to_string(k) + " is a self-loop on node " +
                                        std::to_string(e.u));
            }
            if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second) {
                throw consistency_error("graph: duplicate edge {" + std::to_string(e.u) + ", " +
                                        std::to_string(e.v) + "}");
            }
        }
    }

    std::vector<int> degrees() const {
        std::vector<int> deg(static_cast<std::size_t>(num_nodes), 0);
        for (const auto& e : edges) {
            ++deg[static_cast<std::size_t>(e.u)];
            ++deg[static_cast<std::size_t>(e.v)];
        }
        return deg;
    }

    friend bool operator==(const Graph&, const Graph&) = default;
};

/// Dense row-major node-feature matrix.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// One training unit: a (possibly window-merged) graph plus its two labels.
struct Sample {
    Graph graph;
    int recognition_label = 0;
    int prediction_label = 0;
    std::vector<int> window_ids;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
    std::string name;
    std::vector<Sample> samples;
    int num_node_classes = 0;
    int num_graph_classes = 0;
    /// Human-readable name of each contiguous graph class id.
    std::vector<std::string> graph_label_names;
    /// Original on-disk value of each contiguous node class id (TU datasets).
    std::vector<int> node_label_values;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A single frame of a demonstration, with the action active at that frame.
struct Frame {
    Graph graph;
    int action = 0;

    friend bool operator==(const Frame&, const Frame&) = default;
};

struct Sequence {
    std::string id;
    int action = 0;
    std::vector<Frame> frames;

    friend bool operator==(const Sequence&, const Sequence&) = default;
};

/// Ordered frame sequences grouped by demonstration.
struct SequenceStore {
    std::string name;
    std::vector<std::string> action_labels;
    int num_node_classes = 0;
    std::vector<Sequence> sequences;

    std::size_t num_frames() const {
        std::size_t n = 0;
        for (const auto& s : sequences) n += s.frames.size();
        return n;
    }

    friend bool operator==(const SequenceStore&, const SequenceStore&) = default;
};

/// Disjoint union: node ids of graph k are offset by the node count of all
/// graphs before it. No edges are added between the inputs.
inline Graph merge_graphs(std::span<const Graph> graphs) {
    if (graphs.empty()) throw std::invalid_argument("merge_graphs: empty input");
    Graph out;
    out.frame_index = graphs.front().frame_index;
    out.sequence_id = graphs.front().sequence_id;
    for (const auto& g : graphs) {
        const int offset = out.num_nodes;
        out.node_class.insert(out.node_class.end(), g.node_class.begin(), g.node_class.end());
        for (const auto& e : g.edges) out.edges.push_back({e.u + offset, e.v + offset});
        out.num_nodes += g.num_nodes;
    }
    return out;
}

/// One-hot encoding of node classes: row i has a single 1 at column node_class[i].
inline FeatureMatrix one_hot_features(const Graph& graph, int num_classes) {
    if (num_classes < 1) throw std::invalid_argument("one_hot_features: num_classes must be >= 1");
    FeatureMatrix fm;
    fm.rows = static_cast<std::size_t>(graph.num_nodes);
    fm.cols = static_cast<std::size_t>(num_classes);
    fm.data.assign(fm.rows * fm.cols, 0.0);
    for (std::size_t i = 0; i < fm.rows; ++i) {
        const int c = graph.node_class[i];
        if (c < 0 || c >= num_classes) {
            throw std::invalid_argument("one_hot_features: node " + std::to_string(i) + " has class " +
                                        std::to_string(c) + " outside [0, " + std::to_string(num_classes) + ")");
        }
        fm.data[i * fm.cols + static_cast<std::size_t>(c)] = 1.0;
    }
    return fm;
}

struct WindowResult {
    Dataset dataset;
    /// Sequences with fewer frames than the window length.
    std::size_t skipped_sequences = 0;
};

/// Slides a window of `window` consecutive frames over every sequence and
/// merges each window into one graph. The recognition label is the action of
/// the last observed frame; the prediction label is the action of the frame
/// `horizon` windows further on, clamped to the final frame.
inline WindowResult build_windows(const SequenceStore& store, int window, int horizon) {
    if (window < 1) throw std::invalid_argument("build_windows: window must be >= 1");
    if (horizon < 0) throw std::invalid_argument("build_windows: horizon must be >= 0");

    WindowResult result;
    result.dataset.name = store.name;
    result.dataset.num_node_classes = store.num_node_classes;
    result.dataset.num_graph_classes = static_cast<int>(store.action_labels.size());
    result.dataset.graph_label_names = store.action_labels;

    const auto w = static_cast<std::size_t>(window);
    std::vector<Graph> buffer;
    for (const auto& seq : store.sequences) {
        const std::size_t len = seq.frames.size();
        if (len < w) {
            ++result.skipped_sequences;
            continue;
        }
        for (std::size_t t = 0; t + w <= len; ++t) {
            buffer.clear();
            Sample s;
            for (std::size_t k = t; k < t + w; ++k) {
                buffer.push_back(seq.frames[k].graph);
                s.window_ids.push_back(seq.frames[k].graph.frame_index.value_or(static_cast<int>(k)));
            }
            s.graph = merge_graphs(buffer);
            const std::size_t last = t + w - 1;
            const std::size_t ahead = std::min(last + static_cast<std::size_t>(horizon) * w, len - 1);
            s.recognition_label = seq.frames[last].action;
            s.prediction_label = seq.frames[ahead].action;
            result.dataset.samples.push_back(std::move(s));
        }
    }
    return result;
}

/// Relative split sizes, e.g. {10, 3, 2}.
struct SplitRatios {
    double train = 8;
    double val = 1;
    double test = 1;

    std::array<double, 3> as_array() const { return {train, val, test}; }
};

namespace detail {

/// Largest-remainder apportionment of n items over the given weights. Ties in
/// the fractional part go to the lower split index.
inline std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& weights) {
    const double total = weights[0] + weights[1] + weights[2];
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        const double quota = static_cast<double>(n) * weights[k] / total;
        counts[k] = static_cast<std::size_t>(quota);
        frac[k] = quota - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
    return counts;
}

} // namespace detail

/// Index partition into (train, val, test).
using SplitIndices = std::array<std::vector<std::size_t>, 3>;

/// Deterministic seeded partition of items carrying the given labels.
///
/// With `per_class`, items of each class are shuffled and apportioned
/// separately; every class must then have at least 3 members and each class
/// contributes at least one item to every split. Without it, the whole index
/// range is shuffled once and apportioned globally.
inline SplitIndices split_indices(std::span<const int> labels, const SplitRatios& ratios, std::uint64_t seed,
                                  bool per_class) {
    const auto w = ratios.as_array();
    if (!(w[0] > 0 && w[1] > 0 && w[2] > 0)) throw split_error("split: ratios must be positive");

    std::mt19937_64 rng(seed);
    SplitIndices out;
    auto allocate = [&](std::vector<std::size_t> members, std::array<std::size_t, 3> counts) {
        std::shuffle(members.begin(), members.end(), rng);
        std::size_t pos = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t i = 0; i < counts[k]; ++i) out[k].push_back(members[pos++]);
        }
    };

    if (per_class) {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
        for (auto& [label, members] : by_class) {
            if (members.size() < 3) {
                throw split_error("split: class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " members; per-class split needs at least 3");
            }
            auto counts = detail::apportion(members.size(), w);
            for (std::size_t k = 0; k < 3; ++k) {
                if (counts[k] == 0) {
                    auto donor = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
                    --counts[donor];
                    ++counts[k];
                }
            }
            allocate(std::move(members), counts);
        }
    } else {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        allocate(std::move(all), detail::apportion(labels.size(), w));
    }
    for (auto& part : out) std::sort(part.begin(), part.end());

    for (std::size_t k = 0; k < 3; ++k) {
        if (out[k].empty()) {
            static constexpr const char* names[] = {"train", "val", "test"};
            throw split_error(std::string("split: ") + names[k] + " partition is empty for " +
                              std::to_string(labels.size()) + " items");
        }
    }
    return out;
}

template <typename T, typename Container>
std::vector<T> gather(const Container& items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(items[i]);
    return out;
}

/// Splits samples by recognition label.
inline std::array<Dataset, 3> split_dataset(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed,
                                            bool per_class) {
    std::vector<int> labels;
    labels.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) labels.push_back(s.recognition_label);
    const auto parts = split_indices(labels, ratios, seed, per_class);

    std::array<Dataset, 3> out;
    for (std::size_t k = 0; k < 3; ++k) {
        out[k] = dataset;
        out[k].samples = gather<Sample>(dataset.samples, parts[k]);
    }
    return out;
}

/// Splits whole demonstrations by their action, so windows from one
/// demonstration never straddle two partitions.
inline std::array<SequenceStore, 3> split_sequences(const SequenceStore& store, const SplitRatios& ratios,
                                                    std::uint64_t seed, bool per_class) {
    std::vector<int> labels;
    labels.reserve(store.sequences.size());
    for (const auto& s : store.sequences) labels.push_back(s.action);
    const auto parts = split_indices(labels, ratios, seed, per_class);

    std::array<SequenceStore, 3> out;
    for (std::size_t k = 0; k < 3; ++k) {
        out[k].name = store.name;
        out[k].action_labels = store.action_labels;
        out[k].num_node_classes = store.num_node_classes;
        out[k].sequences = gather<Sequence>(store.sequences, parts[k]);
    }
    return out;
}

} // namespace gnet
