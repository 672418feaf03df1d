#include "gnet/layers.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace gnet;
using ad::Value;

namespace {

std::vector<double> vec(const Value& v) { return {v.data().begin(), v.data().end()}; }

GraphConvParams conv_params(Value t1, Value t2, Value b) { return {std::move(t1), std::move(t2), std::move(b)}; }

LstmParams zero_lstm(std::size_t din, std::size_t h) {
    auto gate = [&] { return LstmGate{Value::zeros(din, h, true), Value::zeros(h, h, true), Value::zeros(1, h, true)}; };
    return {gate(), gate(), gate(), gate()};
}

} // namespace

// ---------------------------------------------------------------- graph_conv

TEST(GraphConv, NoEdgesIsSelfTerm) {
    Rng rng(1);
    const auto x = testutil::random_param(rng, 3, 2);
    const auto p = conv_params(testutil::random_param(rng, 2, 4), testutil::random_param(rng, 2, 4),
                               testutil::random_param(rng, 1, 4));
    const auto y = graph_conv(p, x, std::vector<Edge>{});
    const auto expected = ad::broadcast_add_row(ad::matmul(x, p.theta1), p.bias);
    EXPECT_EQ(vec(y), vec(expected));
}

TEST(GraphConv, IdentityConfiguration) {
    Rng rng(2);
    const auto x = testutil::random_param(rng, 4, 3);
    std::vector<double> eye(9, 0.0);
    for (int i = 0; i < 3; ++i) eye[static_cast<std::size_t>(4 * i)] = 1.0;
    const auto p = conv_params(Value::constant(3, 3, eye), Value::zeros(3, 3), Value::zeros(1, 3));
    const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 3}};
    EXPECT_EQ(vec(graph_conv(p, x, edges)), vec(x));
}

TEST(GraphConv, TwoNodeHandExample) {
    const auto x = Value::constant(2, 1, {1, 2});
    const auto p = conv_params(Value::constant(1, 1, {1}), Value::constant(1, 1, {1}), Value::zeros(1, 1));
    EXPECT_EQ(vec(graph_conv(p, x, {{0, 1}})), (std::vector<double>{3, 3}));
}

TEST(GraphConv, IsolatedNodeGetsOnlySelfTerm) {
    const auto x = Value::constant(3, 1, {1, 2, 5});
    const auto p = conv_params(Value::constant(1, 1, {2}), Value::constant(1, 1, {10}), Value::constant(1, 1, {0.5}));
    EXPECT_EQ(vec(graph_conv(p, x, {{0, 1}})), (std::vector<double>{22.5, 14.5, 10.5}));
}

TEST(GraphConv, WidthMismatch) {
    const auto p = conv_params(Value::zeros(2, 2), Value::zeros(2, 2), Value::zeros(1, 2));
    EXPECT_THROW(graph_conv(p, Value::zeros(3, 3), std::vector<Edge>{}), shape_error);
}

TEST(GraphConv, PermutationEquivariantExactly) {
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
        const auto g = testutil::random_graph(rng, 7, 3);
        const auto n = static_cast<std::size_t>(g.num_nodes);
        const auto perm = testutil::random_permutation(rng, g.num_nodes);
        const auto pg = testutil::permute_graph(g, perm);
        const auto xd = testutil::uniform_values(rng, n * 3);
        const auto p = conv_params(testutil::random_param(rng, 3, 4), testutil::random_param(rng, 3, 4),
                                   testutil::random_param(rng, 1, 4));
        const auto y = graph_conv(p, Value::constant(n, 3, xd), g.edges);
        const auto yp = graph_conv(p, Value::constant(n, 3, testutil::permute_rows(xd, 3, perm)), pg.edges);
        // Neighbour sums may add in a different order; allow a few ulps.
        EXPECT_LT(testutil::max_abs_diff(testutil::permute_rows(y.data(), 4, perm), yp.data()), 1e-14);
    }
}

// ---------------------------------------------------------------- pooling

TEST(MeanPool, Examples) {
    const auto one = Value::constant(1, 3, {1, 2, 3});
    EXPECT_EQ(vec(global_mean_pool(one)), vec(one));
    EXPECT_EQ(vec(global_mean_pool(Value::constant(2, 2, {0, 2, 2, 0}))), (std::vector<double>{1, 1}));
    EXPECT_EQ(vec(global_mean_pool(Value::constant(3, 1, {1, 2, 3}))), (std::vector<double>{2}));
}

TEST(MeanPool, Groups) {
    const auto x = Value::constant(4, 1, {1, 10, 3, 20});
    EXPECT_EQ(vec(global_mean_pool(x, {0, 1, 0, 1}, 2)), (std::vector<double>{2, 15}));
    EXPECT_THROW(global_mean_pool(x, {0, 0, 0, 0}, 2), std::invalid_argument);
    EXPECT_THROW(global_mean_pool(x, {0, 0}, 1), std::invalid_argument);
}

// ---------------------------------------------------------------- linear / log-softmax

TEST(LogSoftmax, Uniform) {
    for (double v : vec(log_softmax(Value::constant(1, 3, {0, 0, 0})))) EXPECT_NEAR(v, std::log(1.0 / 3.0), 1e-15);
    EXPECT_NEAR(std::log(1.0 / 3.0), -1.0986, 5e-5);
}

TEST(LogSoftmax, KnownValues) {
    const auto y = vec(log_softmax(Value::constant(1, 3, {1, 2, 3})));
    const std::vector<double> expected{-2.4076, -1.4076, -0.4076};
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], expected[i], 5e-5);
}

TEST(LogSoftmax, ShiftInvariantAndNormalized) {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const auto x = testutil::uniform_values(rng, 6, -20, 20);
        const double c = testutil::uniform_values(rng, 1, -100, 100)[0];
        auto shifted = x;
        for (auto& v : shifted) v += c;
        const auto a = log_softmax(Value::constant(2, 3, x));
        const auto b = log_softmax(Value::constant(2, 3, shifted));
        EXPECT_LT(testutil::max_abs_diff(a.data(), b.data()), 1e-12);
        for (std::size_t r = 0; r < 2; ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) s += std::exp(a(r, j));
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Linear, Affine) {
    const LinearParams p{Value::constant(2, 1, {2, 3}), Value::constant(1, 1, {1})};
    EXPECT_EQ(linear(p, Value::constant(1, 2, {1, 1})).item(), 6.0);
}

// ---------------------------------------------------------------- LSTM

TEST(Lstm, ZeroWeightsGiveZeroState) {
    const auto p = zero_lstm(3, 2);
    const auto s = lstm_cell(p, Value::constant(1, 3, {1, -1, 2}), Value::zeros(1, 2), Value::zeros(1, 2));
    EXPECT_EQ(vec(s.h), (std::vector<double>{0, 0}));
    EXPECT_EQ(vec(s.c), (std::vector<double>{0, 0}));
}

TEST(Lstm, SaturatedForgetKeepsCell) {
    auto p = zero_lstm(2, 2);
    for (auto& b : p.forget.bias.data()) b = 50.0;
    for (auto& b : p.input.bias.data()) b = -50.0;
    const auto c = Value::constant(1, 2, {0.7, -1.3});
    const auto s = lstm_cell(p, Value::constant(1, 2, {0.3, 0.4}), Value::constant(1, 2, {0.1, 0.2}), c);
    EXPECT_LT(testutil::max_abs_diff(s.c.data(), c.data()), 1e-6);
}

TEST(Lstm, ForgetBiasInitializedToOne) {
    Rng rng(5);
    ParamStore store;
    const auto p = LstmParams::create(store, "l", 4, 3, rng);
    for (double b : p.forget.bias.data()) EXPECT_EQ(b, 1.0);
    for (double b : p.input.bias.data()) EXPECT_EQ(b, 0.0);
    EXPECT_EQ(p.input_size(), 4u);
    EXPECT_EQ(p.hidden_size(), 3u);
    EXPECT_EQ(store.size(), 12u);
}

TEST(Lstm, RandomTwoUnitGradients) {
    Rng rng(6);
    ParamStore store;
    const auto p = LstmParams::create(store, "l", 3, 2, rng);
    std::vector<Value> in{testutil::random_param(rng, 1, 3), testutil::random_param(rng, 1, 2),
                          testutil::random_param(rng, 1, 2)};
    for (auto& [_, v] : store) in.push_back(v);
    auto f = [&] {
        const auto s = lstm_cell(p, in[0], in[1], in[2]);
        return ad::add(ad::sum(ad::mul(s.h, s.h)), ad::sum(s.c));
    };
    EXPECT_LT(testutil::numeric_gradient_error(f, in), 1e-6);
}

TEST(Lstm, ShapeMismatch) {
    const auto p = zero_lstm(3, 2);
    EXPECT_THROW(lstm_cell(p, Value::zeros(1, 2), Value::zeros(1, 2), Value::zeros(1, 2)), shape_error);
    EXPECT_THROW(lstm_cell(p, Value::zeros(1, 3), Value::zeros(1, 3), Value::zeros(1, 2)), shape_error);
}

// ---------------------------------------------------------------- Set2Set

TEST(Set2Set, SingleNodeReadsNodeExactly) {
    Rng rng(7);
    ParamStore store;
    const auto p = LstmParams::create(store, "s", 6, 3, rng);
    const auto x = testutil::random_param(rng, 1, 3);
    const auto r = set2set(p, x, 4);
    ASSERT_EQ(r.readouts.size(), 4u);
    for (std::size_t t = 0; t < 4; ++t) {
        EXPECT_EQ(r.attention[t].data()[0], 1.0);
        EXPECT_EQ(vec(r.readouts[t]), vec(x));
    }
    const auto out = vec(r.output);
    EXPECT_EQ(std::vector<double>(out.begin() + 3, out.end()), vec(x));
}

TEST(Set2Set, IdenticalRowsGiveEqualAttention) {
    Rng rng(8);
    ParamStore store;
    const auto p = LstmParams::create(store, "s", 4, 2, rng);
    const auto r = set2set(p, Value::constant(2, 2, {0.3, -0.8, 0.3, -0.8}), 3);
    for (const auto& a : r.attention) {
        EXPECT_EQ(a.data()[0], 0.5);
        EXPECT_EQ(a.data()[1], 0.5);
    }
    for (const auto& rt : r.readouts) EXPECT_EQ(vec(rt), (std::vector<double>{0.3, -0.8}));
}

TEST(Set2Set, ShapeAndAttentionNormalization) {
    Rng rng(9);
    for (std::size_t n : {1u, 2u, 5u, 9u})
        for (std::size_t d : {1u, 3u, 6u})
            for (int steps : {1, 2, 4}) {
                ParamStore store;
                const auto p = LstmParams::create(store, "s", 2 * d, d, rng);
                const auto r = set2set(p, testutil::random_param(rng, n, d, -3, 3), steps);
                EXPECT_EQ(r.output.rows(), 1u);
                EXPECT_EQ(r.output.cols(), 2 * d);
                EXPECT_EQ(r.attention.size(), static_cast<std::size_t>(steps));
                for (const auto& a : r.attention) {
                    double s = 0.0;
                    for (double v : a.data()) s += v;
                    EXPECT_NEAR(s, 1.0, 1e-12);
                }
            }
}

TEST(Set2Set, PermutationInvariant) {
    Rng rng(10);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = 1 + rng() % 8, d = 1 + rng() % 4;
        ParamStore store;
        const auto p = LstmParams::create(store, "s", 2 * d, d, rng);
        const auto xd = testutil::uniform_values(rng, n * d, -2, 2);
        const auto perm = testutil::random_permutation(rng, static_cast<int>(n));
        const auto a = set2set(p, Value::constant(n, d, xd), 3).output;
        const auto b = set2set(p, Value::constant(n, d, testutil::permute_rows(xd, d, perm)), 3).output;
        EXPECT_LT(testutil::max_abs_diff(a.data(), b.data()), 1e-9);
        const auto pa = global_mean_pool(Value::constant(n, d, xd));
        const auto pb = global_mean_pool(Value::constant(n, d, testutil::permute_rows(xd, d, perm)));
        EXPECT_LT(testutil::max_abs_diff(pa.data(), pb.data()), 1e-9);
    }
}

TEST(Set2Set, ConfigurationErrors) {
    Rng rng(11);
    ParamStore store;
    const auto p = LstmParams::create(store, "s", 6, 3, rng);
    EXPECT_THROW(set2set(p, Value::zeros(2, 2), 2), config_error);
    EXPECT_THROW(set2set(p, Value::zeros(2, 3), 0), config_error);
    ParamStore other;
    const auto q = LstmParams::create(other, "s", 5, 3, rng);
    EXPECT_THROW(set2set(q, Value::zeros(2, 3), 1), config_error);
}

// ---------------------------------------------------------------- stochastic layers

TEST(Reparameterize, EvalIsMu) {
    Rng rng(12);
    const auto mu = testutil::random_param(rng, 1, 4);
    const auto lv = testutil::random_param(rng, 1, 4);
    EXPECT_EQ(vec(reparameterize(mu, lv, Mode::eval, rng)), vec(mu));
}

TEST(Reparameterize, VanishingVariance) {
    Rng rng(13);
    const auto mu = testutil::random_param(rng, 1, 5);
    const auto lv = Value::constant(1, 5, std::vector<double>(5, -60.0));
    EXPECT_LT(testutil::max_abs_diff(reparameterize(mu, lv, Mode::train, rng).data(), mu.data()), 1e-10);
}

TEST(Reparameterize, SeededDeterminism) {
    const auto mu = Value::constant(1, 3, {0.1, 0.2, 0.3});
    const auto lv = Value::constant(1, 3, {0.0, -1.0, 1.0});
    Rng a(42), b(42);
    EXPECT_EQ(vec(reparameterize(mu, lv, Mode::train, a)), vec(reparameterize(mu, lv, Mode::train, b)));
    EXPECT_THROW(reparameterize(mu, Value::zeros(1, 2), Mode::eval, a), shape_error);
}

TEST(Dropout, IdentityCases) {
    Rng rng(14);
    const auto x = testutil::random_param(rng, 2, 3);
    EXPECT_EQ(vec(dropout(x, 0.5, Mode::eval, rng)), vec(x));
    EXPECT_EQ(vec(dropout(x, 0.0, Mode::train, rng)), vec(x));
    EXPECT_EQ(vec(dropout(x, 0.0, Mode::eval, rng)), vec(x));
}

TEST(Dropout, PreservesExpectation) {
    Rng rng(15);
    const auto y = dropout(Value::constant(1, 10000, std::vector<double>(10000, 1.0)), 0.5, Mode::train, rng);
    double s = 0.0;
    int zeros = 0;
    for (double v : y.data()) {
        s += v;
        zeros += v == 0.0;
        EXPECT_TRUE(v == 0.0 || v == 2.0);
    }
    EXPECT_NEAR(s / 10000.0, 1.0, 0.05);
    EXPECT_GT(zeros, 0);
}

TEST(Dropout, RangeChecked) {
    Rng rng(16);
    const auto x = Value::zeros(1, 2);
    EXPECT_THROW(dropout(x, 1.0, Mode::train, rng), std::invalid_argument);
    EXPECT_THROW(dropout(x, -0.1, Mode::eval, rng), std::invalid_argument);
}

TEST(Init, GlorotBoundsAndSeed) {
    Rng a(3), b(3);
    const auto w = glorot_uniform(10, 20, a);
    EXPECT_EQ(w, glorot_uniform(10, 20, b));
    const double limit = std::sqrt(6.0 / 30.0);
    for (double v : w) EXPECT_LE(std::abs(v), limit);
    Rng c(3);
    const auto scaled = glorot_uniform(10, 20, c, 0.5);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(scaled[i], 0.5 * w[i]);
}

TEST(LayerGradients, RandomizedSuites) {
    for (const auto& r : testutil::run_layer_gradient_suites(77)) {
        EXPECT_GE(r.instances, 20);
        EXPECT_LT(r.max_error, 1e-6) << r.op;
    }
}
