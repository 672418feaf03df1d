#pragma once

#include "gnet/gradcheck.hpp"
#include "gnet/model.hpp"

#include <cstdint>

namespace gnet {

/// Four nodes: a triangle (0, 1, 2) with a pendant node 3 on node 2.
inline Sample gradcheck_sample() {
    Sample s;
    s.graph.num_nodes = 4;
    s.graph.node_class = {0, 1, 2, 1};
    s.graph.edges = {{0, 1}, {1, 2}, {0, 2}, {2, 3}};
    s.recognition_label = 1;
    s.prediction_label = 2;
    s.window_ids = {0};
    return s;
}

/// Small joint-mode model suited to exhaustive finite differencing.
inline GNetConfig gradcheck_config() {
    GNetConfig c;
    c.d_in = 3;
    c.w1 = 5;
    c.w2 = 4;
    c.d_z = 3;
    c.num_classes = 3;
    c.set2set_steps = 2;
    c.dropout_p = 0.5;
    // Full-gain heads keep every gradient well above the finite-difference
    // noise floor.
    c.head_init_gain = 1.0;
    return c;
}

/// Full-loss gradient check. The loss is evaluated in train mode with the
/// RNG reseeded for every evaluation, so dropout masks and latent noise are
/// fixed across the base and perturbed points.
inline GradCheckResult model_gradient_check(const GNetConfig& config, const Sample& sample, double eps,
                                            double kl_weight, std::uint64_t seed = 7) {
    GNetConfig cfg = config;
    cfg.kl_weight = kl_weight;
    GNetModel model(cfg, seed);
    auto loss = [&](ParamStore&) {
        Rng rng(seed + 1);
        const auto out = gnet_forward(model, sample, Mode::train, rng);
        return gnet_loss(out, sample.recognition_label, sample.prediction_label, kl_weight);
    };
    return finite_difference_check(loss, model.params(), eps);
}

} // namespace gnet
