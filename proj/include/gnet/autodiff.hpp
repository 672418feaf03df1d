#pragma once

// Dense double-precision tensors (matrices) with a dynamically recorded
// computation graph and reverse-mode differentiation.

#include "gnet/errors.hpp"
#include "gnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace gnet::ad {

class Value;

namespace detail {

struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    /// Allocated (same shape as data) only when requires_grad is set.
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    /// Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward;
    bool requires_grad = false;
    const char* op = "leaf";

    bool is_leaf() const { return parents.empty(); }
};

inline thread_local bool grad_disabled = false;

} // namespace detail

/// Test hooks for negative controls. Not for production use.
namespace testing_hooks {
/// Scales the gradient matmul sends to its left operand. 1.0 means exact.
inline double matmul_left_grad_scale = 1.0;
} // namespace testing_hooks

/// While alive, newly created op results on this thread record no history.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_disabled) { detail::grad_disabled = true; }
    ~NoGradGuard() { detail::grad_disabled = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Handle to a node of the computation graph. Copies share the node.
class Value {
public:
    Value() = default;

    static Value zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
        return from_data(rows, cols, std::vector<double>(rows * cols, 0.0), requires_grad);
    }

    static Value constant(std::size_t rows, std::size_t cols, std::vector<double> data) {
        return from_data(rows, cols, std::move(data), false);
    }

    static Value parameter(std::size_t rows, std::size_t cols, std::vector<double> data) {
        return from_data(rows, cols, std::move(data), true);
    }

    static Value scalar(double v) { return constant(1, 1, {v}); }

    static Value from_features(const FeatureMatrix& fm) { return constant(fm.rows, fm.cols, fm.data); }

    static Value from_data(std::size_t rows, std::size_t cols, std::vector<double> data, bool requires_grad) {
        if (data.size() != rows * cols) {
            throw shape_error("value: " + std::to_string(data.size()) + " entries for shape (" +
                              std::to_string(rows) + ", " + std::to_string(cols) + ")");
        }
        auto n = std::make_shared<detail::Node>();
        n->rows = rows;
        n->cols = cols;
        n->data = std::move(data);
        n->requires_grad = requires_grad;
        if (requires_grad) n->grad.assign(n->data.size(), 0.0);
        return Value(std::move(n));
    }

    bool valid() const { return static_cast<bool>(node_); }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->data.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    const char* op() const { return node_->op; }

    std::span<double> data() { return node_->data; }
    std::span<const double> data() const { return node_->data; }
    std::span<double> grad() { return node_->grad; }
    std::span<const double> grad() const { return node_->grad; }

    double operator()(std::size_t r, std::size_t c) const { return node_->data[r * node_->cols + c]; }
    double item() const {
        if (size() != 1) throw shape_error("item: value is not scalar");
        return node_->data[0];
    }

    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    std::string shape_str() const { return "(" + std::to_string(rows()) + ", " + std::to_string(cols()) + ")"; }

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

    friend bool same_node(const Value& a, const Value& b) { return a.node_ == b.node_; }

private:
    explicit Value(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;

    friend Value make_op(const char*, std::size_t, std::size_t, std::vector<double>, std::initializer_list<Value>,
                         std::function<void(detail::Node&)>);
};

/// Creates an op result. History is recorded only when some input needs a
/// gradient and recording is not disabled on this thread.
inline Value make_op(const char* name, std::size_t rows, std::size_t cols, std::vector<double> data,
                     std::initializer_list<Value> inputs, std::function<void(detail::Node&)> backward) {
    auto n = std::make_shared<detail::Node>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(data);
    n->op = name;
    bool needs = false;
    if (!detail::grad_disabled) {
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
        n->requires_grad = true;
        n->grad.assign(n->data.size(), 0.0);
        for (const auto& in : inputs) n->parents.push_back(in.node_ptr());
        n->backward = std::move(backward);
    }
    return Value(std::move(n));
}

namespace detail {

[[noreturn]] inline void shape_mismatch(const char* op, const Value& a, const Value& b) {
    throw shape_error(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

inline void require_same_shape(const char* op, const Value& a, const Value& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a, b);
}

/// Grad buffer of parent i if it participates in differentiation, else null.
inline double* parent_grad(Node& self, std::size_t i) {
    auto& p = *self.parents[i];
    return p.requires_grad ? p.grad.data() : nullptr;
}

template <typename F, typename D>
Value unary(const char* name, const Value& x, F f, D dfdx) {
    std::vector<double> out(x.size());
    const auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
    return make_op(name, x.rows(), x.cols(), std::move(out), {x}, [dfdx](Node& self) {
        double* g = parent_grad(self, 0);
        if (!g) return;
        const auto& xin = self.parents[0]->data;
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * dfdx(xin[i], self.data[i]);
    });
}

} // namespace detail

/// Lower clamp applied inside log.
inline constexpr double kLogFloor = 1e-12;

inline Value matmul(const Value& a, const Value& b) {
    if (a.cols() != b.rows()) detail::shape_mismatch("matmul", a, b);
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    std::vector<double> out(n * m, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = B + p * m;
            for (std::size_t j = 0; j < m; ++j) row[j] += av * brow[j];
        }
    }
    return make_op("matmul", n, m, std::move(out), {a, b}, [n, k, m](detail::Node& self) {
        const double* G = self.grad.data();
        const double* A = self.parents[0]->data.data();
        const double* B = self.parents[1]->data.data();
        if (double* ga = detail::parent_grad(self, 0)) {
            const double scale = testing_hooks::matmul_left_grad_scale;
            for (std::size_t i = 0; i < n; ++i) {
                const double* grow = G + i * m;
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = B + p * m;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
                    ga[i * k + p] += scale * acc;
                }
            }
        }
        if (double* gb = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* grow = G + i * m;
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    if (av == 0.0) continue;
                    double* gbrow = gb + p * m;
                    for (std::size_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

inline Value add(const Value& a, const Value& b) {
    detail::require_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_op("add", a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (double* g = detail::parent_grad(self, p)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        }
    });
}

inline Value sub(const Value& a, const Value& b) {
    detail::require_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op("sub", a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

/// Element-wise (Hadamard) product.
inline Value mul(const Value& a, const Value& b) {
    detail::require_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op("mul", a.rows(), a.cols(), std::move(out), {a, b}, [](detail::Node& self) {
        const auto& av = self.parents[0]->data;
        const auto& bv = self.parents[1]->data;
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (double* g = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
        }
    });
}

inline Value relu(const Value& x) {
    return detail::unary(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Value tanh(const Value& x) {
    return detail::unary(
        "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Value sigmoid(const Value& x) {
    return detail::unary(
        "sigmoid", x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

inline Value exp(const Value& x) {
    return detail::unary(
        "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

/// log(max(x, 1e-12)); the clamped region has zero gradient.
inline Value log(const Value& x) {
    return detail::unary(
        "log", x, [](double v) { return std::log(std::max(v, kLogFloor)); },
        [](double v, double) { return v > kLogFloor ? 1.0 / v : 0.0; });
}

inline Value scalar_mul(const Value& x, double s) {
    return detail::unary(
        "scalar_mul", x, [s](double v) { return s * v; }, [s](double, double) { return s; });
}

inline Value add_scalar(const Value& x, double s) {
    return detail::unary(
        "add_scalar", x, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

inline Value sum(const Value& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return make_op("sum", 1, 1, {acc}, {x}, [](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            const double gv = self.grad[0];
            for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) g[i] += gv;
        }
    });
}

inline Value mean(const Value& x) {
    if (x.size() == 0) throw shape_error("mean: empty input");
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double n = static_cast<double>(x.size());
    return make_op("mean", 1, 1, {acc / n}, {x}, [n](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            const double gv = self.grad[0] / n;
            for (std::size_t i = 0; i < self.parents[0]->data.size(); ++i) g[i] += gv;
        }
    });
}

/// [a | b]: column-wise concatenation of two matrices with equal row counts.
inline Value concat_cols(const Value& a, const Value& b) {
    if (a.rows() != b.rows()) detail::shape_mismatch("concat_cols", a, b);
    const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols(), c = ca + cb;
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(a.data().data() + i * ca, ca, out.data() + i * c);
        std::copy_n(b.data().data() + i * cb, cb, out.data() + i * c + ca);
    }
    return make_op("concat_cols", r, c, std::move(out), {a, b}, [r, ca, cb, c](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < ca; ++j) g[i * ca + j] += self.grad[i * c + j];
        }
        if (double* g = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < cb; ++j) g[i * cb + j] += self.grad[i * c + ca + j];
        }
    });
}

/// Gathers rows by index; repeated indices are allowed and their gradients add.
inline Value row_select(const Value& x, std::vector<std::size_t> rows) {
    const std::size_t c = x.cols();
    std::vector<double> out(rows.size() * c);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= x.rows()) {
            throw shape_error("row_select: row " + std::to_string(rows[k]) + " outside shape " + x.shape_str());
        }
        std::copy_n(x.data().data() + rows[k] * c, c, out.data() + k * c);
    }
    const std::size_t n = rows.size();
    return make_op("row_select", n, c, std::move(out), {x}, [rows = std::move(rows), c](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t k = 0; k < rows.size(); ++k)
                for (std::size_t j = 0; j < c; ++j) g[rows[k] * c + j] += self.grad[k * c + j];
        }
    });
}

/// Adds a 1×d row vector to every row of an N×d matrix.
inline Value broadcast_add_row(const Value& x, const Value& row) {
    if (row.rows() != 1 || row.cols() != x.cols()) detail::shape_mismatch("broadcast_add_row", x, row);
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += row.data()[j];
    return make_op("broadcast_add_row", r, c, std::move(out), {x, row}, [r, c](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (double* g = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
        }
    });
}

inline Value transpose(const Value& x) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.data()[i * c + j];
    return make_op("transpose", c, r, std::move(out), {x}, [r, c](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
        }
    });
}

/// Row-wise log-softmax, computed with max subtraction.
inline Value log_softmax_rows(const Value& x) {
    const std::size_t r = x.rows(), c = x.cols();
    if (c == 0) throw shape_error("log_softmax: zero columns");
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = x.data().data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
    }
    return make_op("log_softmax", r, c, std::move(out), {x}, [r, c](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < r; ++i) {
                double gs = 0.0;
                for (std::size_t j = 0; j < c; ++j) gs += self.grad[i * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    g[i * c + j] += self.grad[i * c + j] - std::exp(self.data[i * c + j]) * gs;
                }
            }
        }
    });
}

/// Row i of the result is the sum of rows j of x over the undirected
/// neighbours j of i (each edge carries weight 1 in both directions).
inline Value neighbor_sum(const Value& x, std::shared_ptr<const std::vector<Edge>> edges) {
    const std::size_t n = x.rows(), c = x.cols();
    std::vector<double> out(n * c, 0.0);
    const double* X = x.data().data();
    for (const auto& e : *edges) {
        const auto u = static_cast<std::size_t>(e.u), v = static_cast<std::size_t>(e.v);
        if (u >= n || v >= n) {
            throw shape_error("neighbor_sum: edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                              ") outside " + std::to_string(n) + " rows");
        }
        for (std::size_t j = 0; j < c; ++j) {
            out[u * c + j] += X[v * c + j];
            out[v * c + j] += X[u * c + j];
        }
    }
    return make_op("neighbor_sum", n, c, std::move(out), {x}, [edges = std::move(edges), c](detail::Node& self) {
        if (double* g = detail::parent_grad(self, 0)) {
            for (const auto& e : *edges) {
                const auto u = static_cast<std::size_t>(e.u), v = static_cast<std::size_t>(e.v);
                for (std::size_t j = 0; j < c; ++j) {
                    g[v * c + j] += self.grad[u * c + j];
                    g[u * c + j] += self.grad[v * c + j];
                }
            }
        }
    });
}

inline Value neighbor_sum(const Value& x, const std::vector<Edge>& edges) {
    return neighbor_sum(x, std::make_shared<const std::vector<Edge>>(edges));
}

enum class OpKind {
    matmul,
    add,
    sub,
    mul,
    relu,
    tanh,
    sigmoid,
    exp,
    log,
    sum,
    mean,
    concat_cols,
    row_select,
    scalar_mul,
    broadcast_add_row,
};

inline const char* to_string(OpKind k) {
    switch (k) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::relu: return "relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::sum: return "sum";
    case OpKind::mean: return "mean";
    case OpKind::concat_cols: return "concat_cols";
    case OpKind::row_select: return "row_select";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::broadcast_add_row: return "broadcast_add_row";
    }
    return "?";
}

/// Extra non-tensor arguments for op_forward.
struct OpArgs {
    double scalar = 1.0;
    std::vector<std::size_t> rows;
};

/// Generic dispatch by op kind.
inline Value op_forward(OpKind kind, std::span<const Value> in, const OpArgs& args = {}) {
    const std::size_t arity = [&] {
        switch (kind) {
        case OpKind::matmul:
        case OpKind::add:
        case OpKind::sub:
        case OpKind::mul:
        case OpKind::concat_cols:
        case OpKind::broadcast_add_row: return std::size_t{2};
        default: return std::size_t{1};
        }
    }();
    if (in.size() != arity) {
        throw std::invalid_argument(std::string("op_forward: ") + to_string(kind) + " takes " +
                                    std::to_string(arity) + " input(s), got " + std::to_string(in.size()));
    }
    switch (kind) {
    case OpKind::matmul: return matmul(in[0], in[1]);
    case OpKind::add: return add(in[0], in[1]);
    case OpKind::sub: return sub(in[0], in[1]);
    case OpKind::mul: return mul(in[0], in[1]);
    case OpKind::relu: return relu(in[0]);
    case OpKind::tanh: return tanh(in[0]);
    case OpKind::sigmoid: return sigmoid(in[0]);
    case OpKind::exp: return exp(in[0]);
    case OpKind::log: return log(in[0]);
    case OpKind::sum: return sum(in[0]);
    case OpKind::mean: return mean(in[0]);
    case OpKind::concat_cols: return concat_cols(in[0], in[1]);
    case OpKind::row_select: return row_select(in[0], args.rows);
    case OpKind::scalar_mul: return scalar_mul(in[0], args.scalar);
    case OpKind::broadcast_add_row: return broadcast_add_row(in[0], in[1]);
    }
    throw std::invalid_argument("op_forward: unknown op kind");
}

/// Reverse-mode sweep from a 1×1 root.
///
/// Interior gradients are reset on every call and the root is seeded with 1,
/// so leaf gradients (parameters) accumulate across repeated calls while the
/// root's own gradient is 1 afterwards. Nodes are visited in reverse
/// topological order fixed by construction order, making accumulation
/// deterministic.
inline void backward(const Value& root) {
    if (root.rows() != 1 || root.cols() != 1) {
        throw std::invalid_argument("backward: root must be 1x1, got " + root.shape_str());
    }
    if (!root.requires_grad()) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* n : order) {
        if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
    if (root.node()->is_leaf()) {
        root.node()->grad[0] += 1.0;
    } else {
        root.node()->grad[0] = 1.0;
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

} // namespace gnet::ad
