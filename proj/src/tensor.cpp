#include "anocast/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace anocast {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shapes " + a.shape.str() + " and " +
                     b.shape.str() + " do not conform");
}

NodePtr make_node(Tensor value, OpKind op, std::vector<NodePtr> parents, BackwardFn fn) {
    auto n = std::make_shared<Node>(std::move(value));
    n->op = op;
    n->parents = std::move(parents);
    n->backward_fn = fn;
    return n;
}

// Adds g into target's grad buffer; scalar targets absorb the full sum.
void accumulate(Node& target, const std::vector<double>& g) {
    target.ensure_grad();
    if (target.value.numel() == 1) {
        double s = 0.0;
        for (double v : g) s += v;
        target.grad.data[0] += s;
    } else {
        for (std::size_t i = 0; i < g.size(); ++i) target.grad.data[i] += g[i];
    }
}

// --- backward kernels ------------------------------------------------------

void backward_add(Node& n) {
    accumulate(*n.parents[0], n.grad.data);
    accumulate(*n.parents[1], n.grad.data);
}

void backward_sub(Node& n) {
    accumulate(*n.parents[0], n.grad.data);
    Node& b = *n.parents[1];
    b.ensure_grad();
    if (b.value.numel() == 1) {
        double s = 0.0;
        for (double v : n.grad.data) s += v;
        b.grad.data[0] -= s;
    } else {
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) b.grad.data[i] -= n.grad.data[i];
    }
}

void backward_mul(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    a.ensure_grad();
    b.ensure_grad();
    const std::size_t out_n = n.grad.data.size();
    const bool a_scalar = a.value.numel() == 1;
    const bool b_scalar = b.value.numel() == 1;
    for (std::size_t i = 0; i < out_n; ++i) {
        const double g = n.grad.data[i];
        const double av = a.value.data[a_scalar ? 0 : i];
        const double bv = b.value.data[b_scalar ? 0 : i];
        a.grad.data[a_scalar ? 0 : i] += g * bv;
        b.grad.data[b_scalar ? 0 : i] += g * av;
    }
}

void backward_scale(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        a.grad.data[i] += n.aux_scalar * n.grad.data[i];
}

void backward_matmul(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    a.ensure_grad();
    b.ensure_grad();
    // aux = {m, k}; n over columns of b implied by sizes
    const std::size_t m = n.aux[0];
    const std::size_t k = n.aux[1];
    const std::size_t cols = b.value.numel() / k;
    // dA = G * B^T, dB = A^T * G
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const double g = n.grad.data[i * cols + j];
            if (g == 0.0) continue;
            for (std::size_t t = 0; t < k; ++t) {
                a.grad.data[i * k + t] += g * b.value.data[t * cols + j];
                b.grad.data[t * cols + j] += g * a.value.data[i * k + t];
            }
        }
    }
}

void backward_tanh(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
        const double y = n.value.data[i];
        a.grad.data[i] += n.grad.data[i] * (1.0 - y * y);
    }
}

void backward_sigmoid(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
        const double y = n.value.data[i];
        a.grad.data[i] += n.grad.data[i] * y * (1.0 - y);
    }
}

void backward_exp(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        a.grad.data[i] += n.grad.data[i] * n.value.data[i];
}

void backward_expm1(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        a.grad.data[i] += n.grad.data[i] * (n.value.data[i] + 1.0);
}

void backward_log(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        a.grad.data[i] += n.grad.data[i] / a.value.data[i];
}

void backward_concat(Node& n) {
    std::size_t off = 0;
    for (auto& p : n.parents) {
        p->ensure_grad();
        const std::size_t len = p->value.numel();
        for (std::size_t i = 0; i < len; ++i) p->grad.data[i] += n.grad.data[off + i];
        off += len;
    }
}

void backward_slice(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    const std::size_t start = n.aux[0];
    for (std::size_t i = 0; i < n.grad.data.size(); ++i)
        a.grad.data[start + i] += n.grad.data[i];
}

void backward_sum(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    const double g = n.grad.data[0];
    for (double& v : a.grad.data) v += g;
}

void backward_mse(Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    a.ensure_grad();
    b.ensure_grad();
    const double g = n.grad.data[0];
    const double inv_n = 1.0 / static_cast<double>(a.value.numel());
    for (std::size_t i = 0; i < a.value.numel(); ++i) {
        const double d = 2.0 * (a.value.data[i] - b.value.data[i]) * inv_n * g;
        a.grad.data[i] += d;
        b.grad.data[i] -= d;
    }
}

void backward_softmax(Node& n) {
    Node& a = *n.parents[0];
    a.ensure_grad();
    const std::size_t rows = n.aux[0];
    const std::size_t cols = n.aux[1];
    for (std::size_t r = 0; r < rows; ++r) {
        const double* y = n.value.data.data() + r * cols;
        const double* g = n.grad.data.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += y[j] * g[j];
        double* out = a.grad.data.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += y[j] * (g[j] - dot);
    }
}

} // namespace

NodePtr leaf(Tensor v) { return std::make_shared<Node>(std::move(v)); }

NodePtr add(const NodePtr& a, const NodePtr& b) {
    const bool a_scalar = a->value.numel() == 1;
    const bool b_scalar = b->value.numel() == 1;
    if (a->value.shape != b->value.shape && !a_scalar && !b_scalar)
        shape_mismatch("add", a->value, b->value);
    const Tensor& big = a_scalar ? b->value : a->value;
    Tensor out(big.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = a->value.data[a_scalar ? 0 : i] + b->value.data[b_scalar ? 0 : i];
    return make_node(std::move(out), OpKind::Add, {a, b}, &backward_add);
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    const bool a_scalar = a->value.numel() == 1;
    const bool b_scalar = b->value.numel() == 1;
    if (a->value.shape != b->value.shape && !a_scalar && !b_scalar)
        shape_mismatch("sub", a->value, b->value);
    const Tensor& big = a_scalar ? b->value : a->value;
    Tensor out(big.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = a->value.data[a_scalar ? 0 : i] - b->value.data[b_scalar ? 0 : i];
    return make_node(std::move(out), OpKind::Sub, {a, b}, &backward_sub);
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    const bool a_scalar = a->value.numel() == 1;
    const bool b_scalar = b->value.numel() == 1;
    if (a->value.shape != b->value.shape && !a_scalar && !b_scalar)
        shape_mismatch("mul", a->value, b->value);
    const Tensor& big = a_scalar ? b->value : a->value;
    Tensor out(big.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = a->value.data[a_scalar ? 0 : i] * b->value.data[b_scalar ? 0 : i];
    return make_node(std::move(out), OpKind::Mul, {a, b}, &backward_mul);
}

NodePtr scale(const NodePtr& a, double c) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = c * a->value.data[i];
    auto n = make_node(std::move(out), OpKind::Scale, {a}, &backward_scale);
    n->aux_scalar = c;
    return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    std::size_t m, k, cols;
    Shape out_shape;
    if (av.rank() == 2 && bv.rank() == 2) {
        m = av.shape[0];
        k = av.shape[1];
        cols = bv.shape[1];
        if (bv.shape[0] != k) shape_mismatch("matmul", av, bv);
        out_shape = {m, cols};
    } else if (av.rank() == 2 && bv.rank() == 1) {
        m = av.shape[0];
        k = av.shape[1];
        cols = 1;
        if (bv.shape[0] != k) shape_mismatch("matmul", av, bv);
        out_shape = {m};
    } else if (av.rank() == 1 && bv.rank() == 1) {
        m = 1;
        k = av.shape[0];
        cols = 1;
        if (bv.shape[0] != k) shape_mismatch("matmul", av, bv);
        out_shape = {1};
    } else {
        shape_mismatch("matmul", av, bv);
    }
    Tensor out(out_shape);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double x = av.data[i * k + t];
            if (x == 0.0) continue;
            const double* brow = bv.data.data() + t * cols;
            double* orow = out.data.data() + i * cols;
            for (std::size_t j = 0; j < cols; ++j) orow[j] += x * brow[j];
        }
    }
    auto n = make_node(std::move(out), OpKind::MatMul, {a, b}, &backward_matmul);
    n->aux = {m, k};
    return n;
}

NodePtr tanh(const NodePtr& a) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::tanh(a->value.data[i]);
    return make_node(std::move(out), OpKind::Tanh, {a}, &backward_tanh);
}

NodePtr sigmoid(const NodePtr& a) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data[i] = 1.0 / (1.0 + std::exp(-a->value.data[i]));
    return make_node(std::move(out), OpKind::Sigmoid, {a}, &backward_sigmoid);
}

NodePtr exp(const NodePtr& a) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::exp(a->value.data[i]);
    return make_node(std::move(out), OpKind::Exp, {a}, &backward_exp);
}

NodePtr expm1(const NodePtr& a) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::expm1(a->value.data[i]);
    return make_node(std::move(out), OpKind::Expm1, {a}, &backward_expm1);
}

NodePtr log(const NodePtr& a) {
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = std::log(a->value.data[i]);
    return make_node(std::move(out), OpKind::Log, {a}, &backward_log);
}

NodePtr concat(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::size_t total = 0;
    for (auto& p : parts) {
        if (p->value.rank() != 1)
            throw ShapeError("concat: rank-1 operands required, got " + p->value.shape.str());
        total += p->value.numel();
    }
    Tensor out({total});
    std::size_t off = 0;
    for (auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
        off += p->value.numel();
    }
    return make_node(std::move(out), OpKind::Concat, parts, &backward_concat);
}

NodePtr slice(const NodePtr& a, std::size_t start, std::size_t len) {
    if (start + len > a->value.numel())
        throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") out of range for " + a->value.shape.str());
    Tensor out({len});
    std::copy(a->value.data.begin() + start, a->value.data.begin() + start + len,
              out.data.begin());
    auto n = make_node(std::move(out), OpKind::Slice, {a}, &backward_slice);
    n->aux = {start, len};
    return n;
}

NodePtr sum(const NodePtr& a) {
    double s = 0.0;
    for (double v : a->value.data) s += v;
    return make_node(Tensor::scalar(s), OpKind::Sum, {a}, &backward_sum);
}

NodePtr mse(const NodePtr& a, const NodePtr& b) {
    if (a->value.shape != b->value.shape) shape_mismatch("mse", a->value, b->value);
    double s = 0.0;
    for (std::size_t i = 0; i < a->value.numel(); ++i) {
        const double d = a->value.data[i] - b->value.data[i];
        s += d * d;
    }
    s /= static_cast<double>(a->value.numel());
    return make_node(Tensor::scalar(s), OpKind::Mse, {a, b}, &backward_mse);
}

NodePtr softmax(const NodePtr& a) {
    const Tensor& v = a->value;
    std::size_t rows, cols;
    if (v.rank() == 1) {
        rows = 1;
        cols = v.shape[0];
    } else if (v.rank() == 2) {
        rows = v.shape[0];
        cols = v.shape[1];
    } else {
        throw ShapeError("softmax: rank-1 or rank-2 required, got " + v.shape.str());
    }
    Tensor out(v.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = v.data.data() + r * cols;
        double* y = out.data.data() + r * cols;
        double mx = x[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
    }
    auto n = make_node(std::move(out), OpKind::Softmax, {a}, &backward_softmax);
    n->aux = {rows, cols};
    return n;
}

void backward(const NodePtr& root) {
    if (!root) throw ContractError("backward: null root");
    if (root->value.numel() != 1)
        throw ContractError("backward: root must be scalar, got " + root->value.shape.str());

    // Iterative post-order DFS; child order is parent-vector order, so the
    // sweep is reproducible run to run.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->zero_grad();
    root->grad.data[0] = 1.0;

    // order is post-order, so reverse iteration visits each node before its
    // parents' gradients are needed.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

} // namespace anocast
