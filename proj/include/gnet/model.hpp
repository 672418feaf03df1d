#pragma once

// The two-branch variational graph autoencoder.
//
//   X ─ conv1 ─ ReLU ─ conv2 ─ ReLU ─ conv3 ─ H (node level)
//   H ─ mean pool ─┬─ latent.mu ─────┐
//                  └─ latent.logvar ─┴─ z
//   recognition:  dropout(z) ─ linear ─ log-softmax
//   prediction:   set2set(H) ∥ dropout(z) ─ linear ─ log-softmax

#include "gnet/autodiff.hpp"
#include "gnet/errors.hpp"
#include "gnet/graph.hpp"
#include "gnet/layers.hpp"
#include "gnet/param_store.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace gnet {

struct GNetConfig {
    int d_in = 21;
    int w1 = 672;
    int w2 = 672;
    int d_z = 128;
    int num_classes = 8;
    int set2set_steps = 3;
    double dropout_p = 0.5;
    bool enable_recognition = true;
    bool enable_prediction = true;
    double kl_weight = 0.0;
    /// Glorot gain for the class heads and the log-variance head. Neighbour
    /// sums are unnormalized, so full-gain heads start with large logits.
    double head_init_gain = 0.05;

    void validate() const {
        if (!enable_recognition && !enable_prediction) throw config_error("model: at least one branch must be enabled");
        if (d_in < 1) throw config_error("model: d_in must be >= 1");
        if (num_classes < 2) throw config_error("model: num_classes must be >= 2");
        if (w1 < 1 || w2 < 1 || d_z < 1) throw config_error("model: widths must be >= 1");
        if (set2set_steps < 1) throw config_error("model: set2set_steps must be >= 1");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw config_error("model: dropout_p must be in [0, 1)");
        if (!(kl_weight >= 0.0)) throw config_error("model: kl_weight must be >= 0");
        if (!(head_init_gain > 0.0)) throw config_error("model: head_init_gain must be positive");
    }

    friend bool operator==(const GNetConfig&, const GNetConfig&) = default;
};

inline void to_json(nlohmann::json& j, const GNetConfig& c) {
    j = nlohmann::json{{"d_in", c.d_in},
                       {"w1", c.w1},
                       {"w2", c.w2},
                       {"d_z", c.d_z},
                       {"num_classes", c.num_classes},
                       {"set2set_steps", c.set2set_steps},
                       {"dropout_p", c.dropout_p},
                       {"enable_recognition", c.enable_recognition},
                       {"enable_prediction", c.enable_prediction},
                       {"kl_weight", c.kl_weight},
                       {"head_init_gain", c.head_init_gain}};
}

inline void from_json(const nlohmann::json& j, GNetConfig& c) {
    const GNetConfig d;
    c.d_in = j.value("d_in", d.d_in);
    c.w1 = j.value("w1", d.w1);
    c.w2 = j.value("w2", d.w2);
    c.d_z = j.value("d_z", d.d_z);
    c.num_classes = j.value("num_classes", d.num_classes);
    c.set2set_steps = j.value("set2set_steps", d.set2set_steps);
    c.dropout_p = j.value("dropout_p", d.dropout_p);
    c.enable_recognition = j.value("enable_recognition", d.enable_recognition);
    c.enable_prediction = j.value("enable_prediction", d.enable_prediction);
    c.kl_weight = j.value("kl_weight", d.kl_weight);
    c.head_init_gain = j.value("head_init_gain", d.head_init_gain);
}

class GNetModel {
public:
    /// Fresh model with seed-controlled initialization.
    GNetModel(GNetConfig config, std::uint64_t seed) : config_(std::move(config)) {
        config_.validate();
        Rng rng(seed);
        const auto d_in = static_cast<std::size_t>(config_.d_in);
        const auto w1 = static_cast<std::size_t>(config_.w1);
        const auto w2 = static_cast<std::size_t>(config_.w2);
        const auto dz = static_cast<std::size_t>(config_.d_z);
        const auto nc = static_cast<std::size_t>(config_.num_classes);
        GraphConvParams::create(params_, "encoder.conv1", d_in, w1, rng);
        GraphConvParams::create(params_, "encoder.conv2", w1, w2, rng);
        GraphConvParams::create(params_, "encoder.conv3", w2, w2, rng);
        LinearParams::create(params_, "latent.mu", w2, dz, rng);
        LinearParams::create(params_, "latent.logvar", w2, dz, rng, config_.head_init_gain);
        if (config_.enable_recognition) LinearParams::create(params_, "recognition.head", dz, nc, rng, config_.head_init_gain);
        if (config_.enable_prediction) {
            LstmParams::create(params_, "prediction.set2set", 2 * w2, w2, rng);
            LinearParams::create(params_, "prediction.head", 2 * w2 + dz, nc, rng, config_.head_init_gain);
        }
    }

    /// Model around existing parameters; shapes are checked against the config.
    GNetModel(GNetConfig config, ParamStore params) : config_(std::move(config)), params_(std::move(params)) {
        config_.validate();
        const GNetModel reference(config_, 0);
        if (reference.params_.size() != params_.size()) {
            throw config_error("model: checkpoint has " + std::to_string(params_.size()) + " parameters, config needs " +
                               std::to_string(reference.params_.size()));
        }
        for (const auto& [path, v] : reference.params_) {
            if (!params_.contains(path)) throw config_error("model: checkpoint lacks parameter '" + path + "'");
            const auto& got = params_.at(path);
            if (got.rows() != v.rows() || got.cols() != v.cols()) {
                throw config_error("model: parameter '" + path + "' has shape " + got.shape_str() + ", config needs " +
                                   v.shape_str());
            }
        }
    }

    const GNetConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

private:
    GNetConfig config_;
    ParamStore params_;
};

struct GNetOutput {
    std::optional<ad::Value> logp_recognition; // 1 × C, absent when the branch is disabled
    std::optional<ad::Value> logp_prediction;  // 1 × C
    LatentState latent;
    ad::Value node_hidden;                     // N × w2
};

/// Encoder and both decoder heads for one sample. In eval mode z = mu and
/// dropout is the identity, so the result is deterministic.
inline GNetOutput gnet_forward(const GNetModel& model, const Sample& sample, Mode mode, Rng& rng) {
    const auto& cfg = model.config();
    const auto& ps = model.params();
    const auto& g = sample.graph;
    if (g.num_nodes < 1) throw std::invalid_argument("gnet_forward: sample graph has no nodes");

    FeatureMatrix fm;
    try {
        fm = one_hot_features(g, cfg.d_in);
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("gnet_forward: node classes do not fit d_in = ") + std::to_string(cfg.d_in) +
                           " (" + e.what() + ")");
    }
    auto edges = std::make_shared<const std::vector<Edge>>(g.edges);
    auto x = ad::Value::from_features(fm);

    auto h1 = ad::relu(graph_conv(GraphConvParams::bind(ps, "encoder.conv1"), x, edges));
    auto h2 = ad::relu(graph_conv(GraphConvParams::bind(ps, "encoder.conv2"), h1, edges));
    auto hidden = graph_conv(GraphConvParams::bind(ps, "encoder.conv3"), h2, edges);

    auto pooled = global_mean_pool(hidden);
    GNetOutput out;
    out.node_hidden = hidden;
    out.latent.mu = linear(LinearParams::bind(ps, "latent.mu"), pooled);
    out.latent.logvar = linear(LinearParams::bind(ps, "latent.logvar"), pooled);
    out.latent.z = reparameterize(out.latent.mu, out.latent.logvar, mode, rng);

    if (cfg.enable_recognition) {
        auto zr = dropout(out.latent.z, cfg.dropout_p, mode, rng);
        out.logp_recognition = log_softmax(linear(LinearParams::bind(ps, "recognition.head"), zr));
    }
    if (cfg.enable_prediction) {
        auto readout = set2set(LstmParams::bind(ps, "prediction.set2set"), hidden, cfg.set2set_steps).output;
        auto zp = dropout(out.latent.z, cfg.dropout_p, mode, rng);
        out.logp_prediction =
            log_softmax(linear(LinearParams::bind(ps, "prediction.head"), ad::concat_cols(readout, zp)));
    }
    return out;
}

/// −logp[label] for a 1 × C log-probability row.
inline ad::Value nll(const ad::Value& logp, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logp.cols()) {
        throw std::invalid_argument("nll: label " + std::to_string(label) + " outside [0, " +
                                    std::to_string(logp.cols()) + ")");
    }
    std::vector<double> pick(logp.cols(), 0.0);
    pick[static_cast<std::size_t>(label)] = 1.0;
    return ad::scalar_mul(ad::matmul(logp, ad::Value::constant(logp.cols(), 1, std::move(pick))), -1.0);
}

/// KL(N(mu, exp(logvar)) ‖ N(0, I)) = ½ Σ (exp(logvar) + mu² − 1 − logvar).
inline ad::Value kl_divergence(const ad::Value& mu, const ad::Value& logvar) {
    auto inner = ad::sub(ad::add(ad::exp(logvar), ad::mul(mu, mu)), logvar);
    return ad::scalar_mul(ad::sum(ad::add_scalar(inner, -1.0)), 0.5);
}

struct LossTerms {
    ad::Value total;
    std::optional<ad::Value> recognition;
    std::optional<ad::Value> prediction;
    std::optional<ad::Value> kl;
};

/// L = NLL_R + NLL_P + β·KL. Disabled branches contribute nothing and the KL
/// term is omitted entirely when β = 0.
inline LossTerms gnet_loss_terms(const GNetOutput& out, int label_recognition, int label_prediction, double kl_weight) {
    LossTerms terms;
    std::optional<ad::Value> total;
    auto accumulate = [&](const ad::Value& v) { total = total ? ad::add(*total, v) : v; };
    if (out.logp_recognition) {
        terms.recognition = nll(*out.logp_recognition, label_recognition);
        accumulate(*terms.recognition);
    }
    if (out.logp_prediction) {
        terms.prediction = nll(*out.logp_prediction, label_prediction);
        accumulate(*terms.prediction);
    }
    if (kl_weight != 0.0) {
        terms.kl = kl_divergence(out.latent.mu, out.latent.logvar);
        accumulate(ad::scalar_mul(*terms.kl, kl_weight));
    }
    if (!total) throw std::invalid_argument("gnet_loss: no branch output to score");
    terms.total = *total;
    return terms;
}

inline ad::Value gnet_loss(const GNetOutput& out, int label_recognition, int label_prediction, double kl_weight) {
    return gnet_loss_terms(out, label_recognition, label_prediction, kl_weight).total;
}

/// Index of the largest entry; ties resolve to the lowest index.
inline int argmax_lowest(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<int>(best);
}

struct BranchPrediction {
    int label = 0;
    double confidence = 0.0;
};

struct Prediction {
    std::optional<BranchPrediction> recognition;
    std::optional<BranchPrediction> prediction;
};

inline BranchPrediction decide(const ad::Value& logp) {
    BranchPrediction b;
    b.label = argmax_lowest(logp.data());
    b.confidence = std::exp(logp.data()[static_cast<std::size_t>(b.label)]);
    return b;
}

/// Eval-mode labels and confidences for both enabled branches.
inline Prediction predict(const GNetModel& model, const Sample& sample) {
    ad::NoGradGuard guard;
    Rng unused(0);
    const auto out = gnet_forward(model, sample, Mode::eval, unused);
    Prediction p;
    if (out.logp_recognition) p.recognition = decide(*out.logp_recognition);
    if (out.logp_prediction) p.prediction = decide(*out.logp_prediction);
    return p;
}

} // namespace gnet
