#include "gnet/graph.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace gnet;

namespace {

Graph make_graph(int n, std::vector<Edge> edges, int cls = 0) {
    Graph g;
    g.num_nodes = n;
    g.node_class.assign(static_cast<std::size_t>(n), cls);
    g.edges = std::move(edges);
    return g;
}

SequenceStore single_sequence(int frames, std::vector<int> actions = {}) {
    SequenceStore store;
    store.action_labels = {"A", "B"};
    store.num_node_classes = 2;
    Sequence s;
    s.id = "seq";
    for (int f = 0; f < frames; ++f) {
        Frame fr;
        fr.graph = make_graph(2, {{0, 1}}, f % 2);
        fr.graph.frame_index = f;
        fr.action = actions.empty() ? 0 : actions[static_cast<std::size_t>(f)];
        s.frames.push_back(fr);
    }
    s.action = s.frames.front().action;
    store.sequences.push_back(s);
    return store;
}

} // namespace

TEST(Graph, ValidateRejectsBadEdges) {
    EXPECT_NO_THROW(make_graph(3, {{0, 1}, {1, 2}}).validate());
    EXPECT_THROW(make_graph(3, {{0, 3}}).validate(), consistency_error);
    EXPECT_THROW(make_graph(3, {{1, 1}}).validate(), consistency_error);
    EXPECT_THROW(make_graph(3, {{0, 1}, {1, 0}}).validate(), consistency_error);
    auto g = make_graph(2, {});
    g.node_class.push_back(0);
    EXPECT_THROW(g.validate(), consistency_error);
}

TEST(MergeGraphs, SingleGraphIsIdentity) {
    auto g = make_graph(3, {{0, 1}, {1, 2}});
    g.node_class = {2, 0, 1};
    const std::vector<Graph> in{g};
    EXPECT_EQ(merge_graphs(in), g);
}

TEST(MergeGraphs, OffsetsSecondGraph) {
    auto a = make_graph(3, {{0, 1}, {1, 2}}, 1);
    auto b = make_graph(2, {{0, 1}}, 2);
    const std::vector<Graph> in{a, b};
    const auto m = merge_graphs(in);
    EXPECT_EQ(m.num_nodes, 5);
    ASSERT_EQ(m.num_edges(), 3u);
    EXPECT_EQ(m.edges[2], (Edge{3, 4}));
    EXPECT_EQ(m.node_class, (std::vector<int>{1, 1, 1, 2, 2}));
    EXPECT_NO_THROW(m.validate());
}

TEST(MergeGraphs, FourIsolatedNodes) {
    const std::vector<Graph> in(4, make_graph(1, {}));
    const auto m = merge_graphs(in);
    EXPECT_EQ(m.num_nodes, 4);
    EXPECT_EQ(m.num_edges(), 0u);
}

TEST(MergeGraphs, EmptyInputThrows) {
    EXPECT_THROW(merge_graphs(std::span<const Graph>{}), std::invalid_argument);
}

TEST(MergeGraphs, PreservesDegreeMultiset) {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Graph> parts;
        std::multiset<int> expected;
        const int k = 1 + trial % 4;
        for (int i = 0; i < k; ++i) {
            parts.push_back(testutil::random_graph(rng, 6, 3));
            for (int d : parts.back().degrees()) expected.insert(d);
        }
        const auto m = merge_graphs(parts);
        const auto deg = m.degrees();
        EXPECT_EQ(std::multiset<int>(deg.begin(), deg.end()), expected);
    }
}

TEST(OneHot, SingleNode) {
    const auto fm = one_hot_features(make_graph(1, {}), 3);
    EXPECT_EQ(fm.rows, 1u);
    EXPECT_EQ(fm.cols, 3u);
    EXPECT_EQ(fm.data, (std::vector<double>{1, 0, 0}));
}

TEST(OneHot, PermutedRows) {
    auto g = make_graph(2, {});
    g.node_class = {2, 0};
    EXPECT_EQ(one_hot_features(g, 3).data, (std::vector<double>{0, 0, 1, 1, 0, 0}));
}

TEST(OneHot, WidthFollowsClassCount) {
    auto g = make_graph(4, {});
    g.node_class = {0, 20, 5, 7};
    const auto fm = one_hot_features(g, 21);
    EXPECT_EQ(fm.cols, 21u);
    for (std::size_t r = 0; r < fm.rows; ++r) {
        double s = 0;
        int nonzero = 0;
        for (std::size_t c = 0; c < fm.cols; ++c) {
            s += fm(r, c);
            nonzero += fm(r, c) != 0.0;
        }
        EXPECT_EQ(s, 1.0);
        EXPECT_EQ(nonzero, 1);
    }
}

TEST(OneHot, OutOfRangeNamesNode) {
    auto g = make_graph(3, {});
    g.node_class = {0, 1, 3};
    try {
        one_hot_features(g, 3);
        FAIL() << "expected invalid_argument";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("node 2"), std::string::npos) << e.what();
    }
}

TEST(Windows, EightFramesWindowFour) {
    const auto r = build_windows(single_sequence(8), 4, 1);
    EXPECT_EQ(r.dataset.size(), 5u);
    EXPECT_EQ(r.skipped_sequences, 0u);
    for (const auto& s : r.dataset.samples) {
        EXPECT_EQ(s.graph.num_nodes, 8);
        EXPECT_EQ(s.graph.num_edges(), 4u);
    }
    EXPECT_EQ(r.dataset.samples[4].window_ids, (std::vector<int>{4, 5, 6, 7}));
}

TEST(Windows, WindowOneIsIdentity) {
    const auto store = single_sequence(5);
    const auto r = build_windows(store, 1, 0);
    ASSERT_EQ(r.dataset.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.dataset.samples[i].graph, store.sequences[0].frames[i].graph);
}

TEST(Windows, ChainedSequencePredictsNextAction) {
    std::vector<int> actions(12, 0);
    for (int f = 6; f < 12; ++f) actions[static_cast<std::size_t>(f)] = 1;
    const auto r = build_windows(single_sequence(12, actions), 4, 1);
    ASSERT_EQ(r.dataset.size(), 9u);
    EXPECT_EQ(r.dataset.samples[2].recognition_label, 0);
    EXPECT_EQ(r.dataset.samples[2].prediction_label, 1);
    // Last window: lookahead clamps to the final frame.
    EXPECT_EQ(r.dataset.samples[8].prediction_label, 1);
}

TEST(Windows, ShortSequenceSkipped) {
    auto store = single_sequence(3);
    const auto r = build_windows(store, 4, 1);
    EXPECT_TRUE(r.dataset.empty());
    EXPECT_EQ(r.skipped_sequences, 1u);
}

TEST(Windows, CountProperty) {
    for (int len = 1; len <= 10; ++len)
        for (int w = 1; w <= 5; ++w)
            EXPECT_EQ(build_windows(single_sequence(len), w, 1).dataset.size(),
                      static_cast<std::size_t>(std::max(0, len - w + 1)));
}

TEST(Windows, InvalidArguments) {
    EXPECT_THROW(build_windows(single_sequence(4), 0, 1), std::invalid_argument);
    EXPECT_THROW(build_windows(single_sequence(4), 2, -1), std::invalid_argument);
}

TEST(Split, LargestRemainderSizes) {
    std::vector<int> labels(221, 0);
    const auto parts = split_indices(labels, {8, 1, 1}, 3, false);
    EXPECT_EQ(parts[0].size(), 177u);
    EXPECT_EQ(parts[1].size(), 22u);
    EXPECT_EQ(parts[2].size(), 22u);
}

TEST(Split, PerClassFifteenGivesTenThreeTwo) {
    std::vector<int> labels;
    for (int c = 0; c < 8; ++c)
        for (int i = 0; i < 15; ++i) labels.push_back(c);
    const auto parts = split_indices(labels, {10, 3, 2}, 0, true);
    for (int c = 0; c < 8; ++c) {
        std::array<int, 3> per{};
        for (std::size_t k = 0; k < 3; ++k)
            for (auto i : parts[k]) per[k] += labels[i] == c;
        EXPECT_EQ(per, (std::array<int, 3>{10, 3, 2})) << "class " << c;
    }
}

TEST(Split, DeterministicAndSeedSensitive) {
    std::vector<int> labels(50);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
    EXPECT_EQ(split_indices(labels, {8, 1, 1}, 5, true), split_indices(labels, {8, 1, 1}, 5, true));
    EXPECT_NE(split_indices(labels, {8, 1, 1}, 5, true), split_indices(labels, {8, 1, 1}, 6, true));
}

TEST(Split, PartitionProperty) {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 9 + static_cast<std::size_t>(trial) * 7;
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(rng() % 3);
        const bool per_class = trial % 2 == 0;
        SplitIndices parts;
        try {
            parts = split_indices(labels, {10, 3, 2}, static_cast<std::uint64_t>(trial), per_class);
        } catch (const split_error&) {
            continue; // a class with fewer than 3 members
        }
        std::set<std::size_t> all;
        std::size_t total = 0;
        for (const auto& p : parts) {
            EXPECT_FALSE(p.empty());
            total += p.size();
            all.insert(p.begin(), p.end());
        }
        EXPECT_EQ(total, n);
        EXPECT_EQ(all.size(), n);
        EXPECT_EQ(*all.rbegin(), n - 1);
    }
}

TEST(Split, SmallClassNamed) {
    std::vector<int> labels{0, 0, 0, 1, 1};
    try {
        split_indices(labels, {10, 3, 2}, 0, true);
        FAIL() << "expected split_error";
    } catch (const split_error& e) {
        EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos) << e.what();
    }
}

TEST(Split, NonPositiveRatio) {
    std::vector<int> labels(10, 0);
    EXPECT_THROW(split_indices(labels, {1, 0, 1}, 0, false), split_error);
}

TEST(Split, EmptyPartitionRejected) {
    std::vector<int> labels(2, 0);
    EXPECT_THROW(split_indices(labels, {8, 1, 1}, 0, false), split_error);
}

TEST(Split, SequencesSplitWhole) {
    SequenceStore store;
    store.action_labels = {"A", "B"};
    for (int i = 0; i < 6; ++i) {
        auto s = single_sequence(5).sequences[0];
        s.id = "s" + std::to_string(i);
        s.action = i % 2;
        store.sequences.push_back(s);
    }
    const auto parts = split_sequences(store, {1, 1, 1}, 0, true);
    std::set<std::string> ids;
    for (const auto& p : parts) {
        EXPECT_EQ(p.sequences.size(), 2u);
        for (const auto& s : p.sequences) EXPECT_TRUE(ids.insert(s.id).second);
    }
}
