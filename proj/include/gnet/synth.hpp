#pragma once

#include "gnet/graph.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace gnet {

/// Parameters of the synthetic motif-sequence generator.
struct SynthSpec {
    int classes = 4;
    int seqs_per_class = 10;
    int frames = 8;
    /// 1: the class motif is always fully present; 0: every node pair is an
    /// edge with the background probability, so classes are indistinguishable.
    double strength = 1.0;
    std::uint64_t seed = 0;
    int node_classes = 1;
    double noise = 0.1;
    int extra_nodes = 2;

    void validate() const {
        if (classes < 2) throw std::invalid_argument("synth: need at least 2 classes");
        if (seqs_per_class < 1) throw std::invalid_argument("synth: seqs_per_class must be >= 1");
        if (frames < 1) throw std::invalid_argument("synth: frames must be >= 1");
        if (!(strength >= 0.0 && strength <= 1.0)) throw std::invalid_argument("synth: strength must be in [0, 1]");
        if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("synth: noise must be in [0, 1]");
        if (node_classes < 1) throw std::invalid_argument("synth: node_classes must be >= 1");
        if (extra_nodes < 0) throw std::invalid_argument("synth: extra_nodes must be >= 0");
    }
};

/// Every frame has the same node count, (classes + 1) + extra_nodes, with
/// node classes drawn uniformly. Action k plants a clique on k + 2 nodes:
/// pairs inside it are edges with probability strength + (1 - strength)·noise,
/// all other pairs with probability noise.
inline SequenceStore generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    SequenceStore store;
    store.name = "synthetic";
    store.num_node_classes = spec.node_classes;
    for (int k = 0; k < spec.classes; ++k) store.action_labels.push_back("action_" + std::to_string(k));

    std::mt19937_64 rng(spec.seed);
    std::uniform_int_distribution<int> node_class(0, spec.node_classes - 1);
    const int n = spec.classes + 1 + spec.extra_nodes;
    const double p_motif = spec.strength + (1.0 - spec.strength) * spec.noise;

    for (int k = 0; k < spec.classes; ++k) {
        const int clique = k + 2;
        std::bernoulli_distribution motif_edge(p_motif);
        std::bernoulli_distribution noise_edge(spec.noise);
        for (int s = 0; s < spec.seqs_per_class; ++s) {
            Sequence seq;
            seq.id = store.action_labels[static_cast<std::size_t>(k)] + "_" + std::to_string(s);
            seq.action = k;
            for (int f = 0; f < spec.frames; ++f) {
                Frame frame;
                frame.action = k;
                frame.graph.num_nodes = n;
                frame.graph.frame_index = f;
                frame.graph.sequence_id = seq.id;
                for (int i = 0; i < n; ++i) frame.graph.node_class.push_back(node_class(rng));
                for (int i = 0; i < n; ++i) {
                    for (int j = i + 1; j < n; ++j) {
                        const bool in_motif = i < clique && j < clique;
                        if (in_motif ? motif_edge(rng) : noise_edge(rng)) frame.graph.edges.push_back({i, j});
                    }
                }
                seq.frames.push_back(std::move(frame));
            }
            store.sequences.push_back(std::move(seq));
        }
    }
    return store;
}

} // namespace gnet
