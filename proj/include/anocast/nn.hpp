#pragma once

#include <string>
#include <utility>
#include <vector>

#include "anocast/tensor.hpp"

namespace anocast {

// Named trainable leaf. Models expose their parameters as vectors of these
// so the optimizer and the serializer can walk them generically.
struct Param {
    std::string name;
    NodePtr node;
};

// Uniform init on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Tensor xavier_uniform(Shape s, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---------------------------------------------------------------------------
// LSTM cell. W*: [hidden x input], U*: [hidden x hidden], b*: [hidden].
// ---------------------------------------------------------------------------

struct LstmParams {
    NodePtr wi, ui, bi;
    NodePtr wf, uf, bf;
    NodePtr wo, uo, bo;
    NodePtr wc, uc, bc;

    LstmParams(std::size_t input_dim, std::size_t hidden_dim, const std::string& prefix,
               Rng& rng, std::vector<Param>& out);

    std::size_t hidden_dim() const { return bi->value.numel(); }
};

struct LstmState {
    NodePtr h;
    NodePtr c;
};

LstmState lstm_zero_state(std::size_t hidden_dim);

// One recurrence step: gates from x and prev.h, returns new (h, c).
LstmState lstm_step(const LstmParams& p, const NodePtr& x, const LstmState& prev);

// ---------------------------------------------------------------------------
// 1-d convolution over time with same padding (odd kernel width required).
// x: [T x C], kernel: [F x K x C], bias: [F] -> [T x F]. Cross-correlation:
// out[t][f] = bias[f] + sum_{k,c} kernel[f][k][c] * x[t + k - K/2][c].
// ---------------------------------------------------------------------------

NodePtr conv1d(const NodePtr& x, const NodePtr& kernel, const NodePtr& bias);

// ---------------------------------------------------------------------------
// Adam optimizer. step() consumes the gradients accumulated by backward()
// and zeroes them; a parameter whose gradient buffer was never touched is
// treated as having zero gradient for that step.
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(std::vector<Param> params, AdamConfig cfg = {});

    void step();
    std::size_t steps_taken() const { return t_; }

private:
    std::vector<Param> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
};

} // namespace anocast
