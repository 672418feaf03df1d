#pragma once

// Neural building blocks as functions over ad::Value: GraphConv, mean
// pooling, LSTM cell, Set2Set readout, linear, log-softmax, dropout and the
// variational reparameterization.

#include "gnet/autodiff.hpp"
#include "gnet/errors.hpp"
#include "gnet/graph.hpp"
#include "gnet/param_store.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace gnet {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

/// Uniform in ±gain·sqrt(6 / (fan_in + fan_out)).
inline std::vector<double> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain = 1.0) {
    const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(fan_in * fan_out);
    for (auto& x : w) x = dist(rng);
    return w;
}

// ---------------------------------------------------------------- GraphConv

struct GraphConvParams {
    ad::Value theta1; // d_in × d_out, applied to the node itself
    ad::Value theta2; // d_in × d_out, applied to the neighbour sum
    ad::Value bias;   // 1 × d_out

    std::size_t in_dim() const { return theta1.rows(); }
    std::size_t out_dim() const { return theta1.cols(); }

    static GraphConvParams create(ParamStore& store, const std::string& prefix, std::size_t d_in, std::size_t d_out,
                                  Rng& rng) {
        store.add(prefix + ".theta1", d_in, d_out, glorot_uniform(d_in, d_out, rng));
        store.add(prefix + ".theta2", d_in, d_out, glorot_uniform(d_in, d_out, rng));
        store.add(prefix + ".bias", 1, d_out, std::vector<double>(d_out, 0.0));
        return bind(store, prefix);
    }

    static GraphConvParams bind(const ParamStore& store, const std::string& prefix) {
        GraphConvParams p{store.at(prefix + ".theta1"), store.at(prefix + ".theta2"), store.at(prefix + ".bias")};
        if (p.theta1.rows() != p.theta2.rows() || p.theta1.cols() != p.theta2.cols()) {
            throw shape_error(prefix + ": theta1 " + p.theta1.shape_str() + " and theta2 " + p.theta2.shape_str() +
                              " differ");
        }
        if (p.bias.rows() != 1 || p.bias.cols() != p.theta1.cols()) {
            throw shape_error(prefix + ": bias shape " + p.bias.shape_str());
        }
        return p;
    }
};

/// out_i = x_i·θ1 + (Σ_{j∈N(i)} x_j)·θ2 + b over undirected unit-weight edges.
inline ad::Value graph_conv(const GraphConvParams& p, const ad::Value& x,
                            const std::shared_ptr<const std::vector<Edge>>& edges) {
    if (x.cols() != p.in_dim()) {
        throw shape_error("graph_conv: features have width " + std::to_string(x.cols()) + ", theta1 expects " +
                          std::to_string(p.in_dim()));
    }
    auto self_term = ad::matmul(x, p.theta1);
    auto neigh_term = ad::matmul(ad::neighbor_sum(x, edges), p.theta2);
    return ad::broadcast_add_row(ad::add(self_term, neigh_term), p.bias);
}

inline ad::Value graph_conv(const GraphConvParams& p, const ad::Value& x, const std::vector<Edge>& edges) {
    return graph_conv(p, x, std::make_shared<const std::vector<Edge>>(edges));
}

// ---------------------------------------------------------------- pooling

/// Row g of the result is the mean of the rows of x assigned to group g.
inline ad::Value global_mean_pool(const ad::Value& x, const std::vector<int>& groups, int num_groups) {
    if (groups.size() != x.rows()) {
        throw std::invalid_argument("global_mean_pool: " + std::to_string(groups.size()) + " assignments for " +
                                    std::to_string(x.rows()) + " nodes");
    }
    const auto g = static_cast<std::size_t>(num_groups);
    std::vector<std::size_t> counts(g, 0);
    for (int a : groups) {
        if (a < 0 || a >= num_groups) throw std::invalid_argument("global_mean_pool: group id out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    for (std::size_t k = 0; k < g; ++k) {
        if (counts[k] == 0) throw std::invalid_argument("global_mean_pool: group " + std::to_string(k) + " is empty");
    }
    std::vector<double> pool(g * x.rows(), 0.0);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto a = static_cast<std::size_t>(groups[i]);
        pool[a * x.rows() + i] = 1.0 / static_cast<double>(counts[a]);
    }
    return ad::matmul(ad::Value::constant(g, x.rows(), std::move(pool)), x);
}

/// Mean over all rows (a single group).
inline ad::Value global_mean_pool(const ad::Value& x) {
    return global_mean_pool(x, std::vector<int>(x.rows(), 0), 1);
}

// ---------------------------------------------------------------- linear

struct LinearParams {
    ad::Value weight; // d_in × d_out
    ad::Value bias;   // 1 × d_out

    static LinearParams create(ParamStore& store, const std::string& prefix, std::size_t d_in, std::size_t d_out,
                               Rng& rng, double gain = 1.0) {
        store.add(prefix + ".weight", d_in, d_out, glorot_uniform(d_in, d_out, rng, gain));
        store.add(prefix + ".bias", 1, d_out, std::vector<double>(d_out, 0.0));
        return bind(store, prefix);
    }

    static LinearParams bind(const ParamStore& store, const std::string& prefix) {
        return {store.at(prefix + ".weight"), store.at(prefix + ".bias")};
    }
};

inline ad::Value linear(const LinearParams& p, const ad::Value& x) {
    return ad::broadcast_add_row(ad::matmul(x, p.weight), p.bias);
}

inline ad::Value log_softmax(const ad::Value& x) { return ad::log_softmax_rows(x); }

// ---------------------------------------------------------------- LSTM

/// One gate's affine map: x·w_x + h·w_h + b.
struct LstmGate {
    ad::Value w_x;
    ad::Value w_h;
    ad::Value bias;
};

/// Standard LSTM cell with input (i), forget (f), cell (g) and output (o) gates.
struct LstmParams {
    LstmGate input, forget, cell, output;

    std::size_t input_size() const { return input.w_x.rows(); }
    std::size_t hidden_size() const { return input.w_h.rows(); }

    static constexpr const char* kGateNames[4] = {"input", "forget", "cell", "output"};

    static LstmParams create(ParamStore& store, const std::string& prefix, std::size_t d_in, std::size_t hidden,
                             Rng& rng) {
        for (const char* gate : kGateNames) {
            const std::string base = prefix + "." + gate;
            store.add(base + ".w_x", d_in, hidden, glorot_uniform(d_in, hidden, rng));
            store.add(base + ".w_h", hidden, hidden, glorot_uniform(hidden, hidden, rng));
            const double b0 = std::string(gate) == "forget" ? 1.0 : 0.0;
            store.add(base + ".bias", 1, hidden, std::vector<double>(hidden, b0));
        }
        return bind(store, prefix);
    }

    static LstmParams bind(const ParamStore& store, const std::string& prefix) {
        auto gate = [&](const char* name) {
            const std::string base = prefix + "." + name;
            return LstmGate{store.at(base + ".w_x"), store.at(base + ".w_h"), store.at(base + ".bias")};
        };
        LstmParams p{gate("input"), gate("forget"), gate("cell"), gate("output")};
        const std::size_t d_in = p.input_size(), h = p.hidden_size();
        for (const auto* g : {&p.input, &p.forget, &p.cell, &p.output}) {
            if (g->w_x.rows() != d_in || g->w_x.cols() != h || g->w_h.rows() != h || g->w_h.cols() != h ||
                g->bias.rows() != 1 || g->bias.cols() != h) {
                throw shape_error(prefix + ": inconsistent LSTM gate shapes");
            }
        }
        return p;
    }
};

struct LstmState {
    ad::Value h;
    ad::Value c;
};

/// c' = f⊙c + i⊙g, h' = o⊙tanh(c'), with i, f, o sigmoid-squashed and g tanh-squashed.
inline LstmState lstm_cell(const LstmParams& p, const ad::Value& x, const ad::Value& h, const ad::Value& c) {
    const std::size_t hs = p.hidden_size();
    if (x.rows() != 1 || x.cols() != p.input_size()) {
        throw shape_error("lstm_cell: input " + x.shape_str() + ", expected (1, " + std::to_string(p.input_size()) + ")");
    }
    if (h.rows() != 1 || h.cols() != hs || c.rows() != 1 || c.cols() != hs) {
        throw shape_error("lstm_cell: state shapes " + h.shape_str() + ", " + c.shape_str() + " for hidden size " +
                          std::to_string(hs));
    }
    auto affine = [&](const LstmGate& g) {
        return ad::add(ad::add(ad::matmul(x, g.w_x), ad::matmul(h, g.w_h)), g.bias);
    };
    auto i = ad::sigmoid(affine(p.input));
    auto f = ad::sigmoid(affine(p.forget));
    auto g = ad::tanh(affine(p.cell));
    auto o = ad::sigmoid(affine(p.output));
    auto c_next = ad::add(ad::mul(f, c), ad::mul(i, g));
    auto h_next = ad::mul(o, ad::tanh(c_next));
    return {h_next, c_next};
}

// ---------------------------------------------------------------- Set2Set

struct Set2SetResult {
    ad::Value output;                  // 1 × 2d
    std::vector<ad::Value> attention;  // one 1 × N weight row per step
    std::vector<ad::Value> readouts;   // r_t, one 1 × d row per step
};

/// Order-invariant attention readout. Starting from a zero query q*_0 of
/// width 2d and a zero LSTM state, each step computes q_t = LSTM(q*_{t-1}),
/// attention α_t = softmax(X·q_tᵀ), readout r_t = α_t·X and q*_t = q_t ∥ r_t.
inline Set2SetResult set2set(const LstmParams& p, const ad::Value& x, int steps) {
    const std::size_t d = x.cols();
    if (p.hidden_size() != d || p.input_size() != 2 * d) {
        throw config_error("set2set: LSTM (input " + std::to_string(p.input_size()) + ", hidden " +
                           std::to_string(p.hidden_size()) + ") does not match feature width " + std::to_string(d));
    }
    if (steps < 1) throw config_error("set2set: steps must be >= 1");
    if (x.rows() == 0) throw std::invalid_argument("set2set: empty node set");

    Set2SetResult res;
    auto q_star = ad::Value::zeros(1, 2 * d);
    auto h = ad::Value::zeros(1, d);
    auto c = ad::Value::zeros(1, d);
    for (int t = 0; t < steps; ++t) {
        auto state = lstm_cell(p, q_star, h, c);
        h = state.h;
        c = state.c;
        auto scores = ad::transpose(ad::matmul(x, ad::transpose(h))); // 1 × N
        auto alpha = ad::exp(ad::log_softmax_rows(scores));
        auto r = ad::matmul(alpha, x); // 1 × d
        q_star = ad::concat_cols(h, r);
        res.attention.push_back(alpha);
        res.readouts.push_back(r);
    }
    res.output = q_star;
    return res;
}

// ---------------------------------------------------------------- stochastic layers

struct LatentState {
    ad::Value mu;
    ad::Value logvar;
    ad::Value z;
};

/// train: z = mu + exp(0.5·logvar)⊙ε with ε ~ N(0, I); eval: z = mu.
inline ad::Value reparameterize(const ad::Value& mu, const ad::Value& logvar, Mode mode, Rng& rng) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) {
        throw shape_error("reparameterize: mu " + mu.shape_str() + " vs logvar " + logvar.shape_str());
    }
    if (mode == Mode::eval) return mu;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> eps(mu.size());
    for (auto& e : eps) e = normal(rng);
    auto noise = ad::Value::constant(mu.rows(), mu.cols(), std::move(eps));
    return ad::add(mu, ad::mul(ad::exp(ad::scalar_mul(logvar, 0.5)), noise));
}

/// Inverted dropout: in train mode each entry is zeroed with probability p and
/// survivors are scaled by 1/(1-p). Identity in eval mode.
inline ad::Value dropout(const ad::Value& x, double p, Mode mode, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p = " + std::to_string(p) + " outside [0, 1)");
    if (mode == Mode::eval || p == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const double scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = keep(rng) ? scale : 0.0;
    return ad::mul(x, ad::Value::constant(x.rows(), x.cols(), std::move(mask)));
}

} // namespace gnet
