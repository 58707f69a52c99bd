#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "anocast/common.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Shape: up to rank 3, stored inline to keep tensor construction cheap.
// ---------------------------------------------------------------------------

class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) {
        if (dims.size() > 3) throw ShapeError("rank > 3 not supported");
        for (std::size_t d : dims) dims_[rank_++] = d;
    }

    std::size_t rank() const { return rank_; }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
        return rank_ == 0 ? 0 : n;
    }

    bool operator==(const Shape& o) const {
        if (rank_ != o.rank_) return false;
        for (std::size_t i = 0; i < rank_; ++i)
            if (dims_[i] != o.dims_[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < rank_; ++i) {
            if (i) s += "x";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    std::array<std::size_t, 3> dims_{0, 0, 0};
    std::size_t rank_ = 0;
};

// ---------------------------------------------------------------------------
// Dense tensor, row-major, 64-bit.
// ---------------------------------------------------------------------------

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), data(s.numel(), 0.0) {}
    Tensor(Shape s, std::vector<double> d) : shape(s), data(std::move(d)) {
        if (data.size() != shape.numel())
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape.str());
    }

    static Tensor zeros(Shape s) { return Tensor(s); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor vec(std::vector<double> v) {
        const std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.rank(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // rank-2 access
    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Reverse-mode graph. Nodes are created eagerly by the op functions below;
// backward() runs one reverse topological sweep and accumulates gradients
// across fan-out. Gradient buffers are only allocated when backward touches
// a node, so forward-only inference stays cheap.
// ---------------------------------------------------------------------------

enum class OpKind : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale,
    MatMul,
    Tanh,
    Sigmoid,
    Exp,
    Expm1,
    Log,
    Concat,
    Slice,
    Sum,
    Mse,
    Softmax,
    Conv1d,
};

class Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = void (*)(Node&);

class Node {
public:
    Tensor value;
    Tensor grad; // empty until backward reaches this node
    OpKind op = OpKind::Leaf;
    std::vector<NodePtr> parents;
    BackwardFn backward_fn = nullptr;
    std::array<std::size_t, 2> aux{0, 0}; // slice offsets etc.
    double aux_scalar = 0.0;              // scale factor

    explicit Node(Tensor v) : value(std::move(v)) {}

    void ensure_grad() {
        if (grad.data.size() != value.numel()) grad = Tensor(value.shape);
    }
    void zero_grad() {
        ensure_grad();
        std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
    bool has_grad() const { return grad.data.size() == value.numel(); }
};

// Leaf node holding a constant or a trainable parameter.
NodePtr leaf(Tensor v);

// Elementwise; either identical shapes or one scalar operand.
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);

// Multiply by a compile-time constant (no gradient through the constant).
NodePtr scale(const NodePtr& a, double c);

// [m x k]*[k x n] -> [m x n]; [m x k]*[k] -> [m]; [k]*[k] -> [1] (dot).
NodePtr matmul(const NodePtr& a, const NodePtr& b);

NodePtr tanh(const NodePtr& a);
NodePtr sigmoid(const NodePtr& a);
NodePtr exp(const NodePtr& a);
NodePtr expm1(const NodePtr& a); // e^x - 1, accurate near zero
NodePtr log(const NodePtr& a);

// Concatenation of rank-1 tensors.
NodePtr concat(const std::vector<NodePtr>& parts);

// Contiguous flat slice -> rank-1 tensor of length len.
NodePtr slice(const NodePtr& a, std::size_t start, std::size_t len);

// Reduce to scalar.
NodePtr sum(const NodePtr& a);

// Mean squared error between two same-shape tensors -> scalar.
NodePtr mse(const NodePtr& a, const NodePtr& b);

// Rank-1: softmax over the whole vector. Rank-2: row-wise.
NodePtr softmax(const NodePtr& a);

// Reverse sweep from a scalar root. Gradients of every node reachable from
// the root are (re)computed; unreachable nodes are left untouched.
void backward(const NodePtr& root);

} // namespace anocast
