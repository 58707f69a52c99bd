#include "anocast/nn.hpp"

#include <cmath>

namespace anocast {

Tensor xavier_uniform(Shape s, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    if (fan_in + fan_out == 0) throw ContractError("xavier_uniform: zero fan");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(s);
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

namespace {

NodePtr gate_weight(std::size_t rows, std::size_t cols, const std::string& name, Rng& rng,
                    std::vector<Param>& out) {
    auto n = leaf(xavier_uniform({rows, cols}, cols, rows, rng));
    out.push_back({name, n});
    return n;
}

NodePtr gate_bias(std::size_t dim, const std::string& name, std::vector<Param>& out) {
    auto n = leaf(Tensor({dim}));
    out.push_back({name, n});
    return n;
}

} // namespace

LstmParams::LstmParams(std::size_t input_dim, std::size_t hidden_dim, const std::string& prefix,
                       Rng& rng, std::vector<Param>& out) {
    if (input_dim == 0 || hidden_dim == 0)
        throw ContractError("LstmParams: zero dimension");
    wi = gate_weight(hidden_dim, input_dim, prefix + ".wi", rng, out);
    ui = gate_weight(hidden_dim, hidden_dim, prefix + ".ui", rng, out);
    bi = gate_bias(hidden_dim, prefix + ".bi", out);
    wf = gate_weight(hidden_dim, input_dim, prefix + ".wf", rng, out);
    uf = gate_weight(hidden_dim, hidden_dim, prefix + ".uf", rng, out);
    bf = gate_bias(hidden_dim, prefix + ".bf", out);
    wo = gate_weight(hidden_dim, input_dim, prefix + ".wo", rng, out);
    uo = gate_weight(hidden_dim, hidden_dim, prefix + ".uo", rng, out);
    bo = gate_bias(hidden_dim, prefix + ".bo", out);
    wc = gate_weight(hidden_dim, input_dim, prefix + ".wc", rng, out);
    uc = gate_weight(hidden_dim, hidden_dim, prefix + ".uc", rng, out);
    bc = gate_bias(hidden_dim, prefix + ".bc", out);
}

LstmState lstm_zero_state(std::size_t hidden_dim) {
    return {leaf(Tensor({hidden_dim})), leaf(Tensor({hidden_dim}))};
}

LstmState lstm_step(const LstmParams& p, const NodePtr& x, const LstmState& prev) {
    auto gate = [&](const NodePtr& w, const NodePtr& u, const NodePtr& b) {
        return add(add(matmul(w, x), matmul(u, prev.h)), b);
    };
    auto i = sigmoid(gate(p.wi, p.ui, p.bi));
    auto f = sigmoid(gate(p.wf, p.uf, p.bf));
    auto o = sigmoid(gate(p.wo, p.uo, p.bo));
    auto g = tanh(gate(p.wc, p.uc, p.bc));
    auto c = add(mul(f, prev.c), mul(i, g));
    auto h = mul(o, tanh(c));
    return {h, c};
}

namespace {

void backward_conv1d(Node& n) {
    Node& x = *n.parents[0];
    Node& ker = *n.parents[1];
    Node& bias = *n.parents[2];
    x.ensure_grad();
    ker.ensure_grad();
    bias.ensure_grad();
    const std::size_t steps = x.value.shape[0];
    const std::size_t chans = x.value.shape[1];
    const std::size_t filters = ker.value.shape[0];
    const std::size_t width = ker.value.shape[1];
    const std::size_t pad = width / 2;
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t f = 0; f < filters; ++f) {
            const double g = n.grad.data[t * filters + f];
            if (g == 0.0) continue;
            bias.grad.data[f] += g;
            for (std::size_t k = 0; k < width; ++k) {
                const std::size_t src = t + k; // minus pad, guarded below
                if (src < pad || src - pad >= steps) continue;
                const std::size_t row = src - pad;
                for (std::size_t c = 0; c < chans; ++c) {
                    const std::size_t kid = (f * width + k) * chans + c;
                    ker.grad.data[kid] += g * x.value.data[row * chans + c];
                    x.grad.data[row * chans + c] += g * ker.value.data[kid];
                }
            }
        }
    }
}

} // namespace

NodePtr conv1d(const NodePtr& x, const NodePtr& kernel, const NodePtr& bias) {
    const Tensor& xv = x->value;
    const Tensor& kv = kernel->value;
    const Tensor& bv = bias->value;
    if (xv.rank() != 2 || kv.rank() != 3 || bv.rank() != 1)
        throw ShapeError("conv1d: need x[TxC], kernel[FxKxC], bias[F], got " + xv.shape.str() +
                         ", " + kv.shape.str() + ", " + bv.shape.str());
    const std::size_t steps = xv.shape[0];
    const std::size_t chans = xv.shape[1];
    const std::size_t filters = kv.shape[0];
    const std::size_t width = kv.shape[1];
    if (kv.shape[2] != chans)
        throw ShapeError("conv1d: kernel channels " + std::to_string(kv.shape[2]) +
                         " vs input channels " + std::to_string(chans));
    if (bv.shape[0] != filters)
        throw ShapeError("conv1d: bias size " + std::to_string(bv.shape[0]) + " vs filters " +
                         std::to_string(filters));
    if (width % 2 == 0) throw ShapeError("conv1d: kernel width must be odd for same padding");
    const std::size_t pad = width / 2;

    Tensor out({steps, filters});
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t f = 0; f < filters; ++f) {
            double acc = bv.data[f];
            for (std::size_t k = 0; k < width; ++k) {
                const std::size_t src = t + k;
                if (src < pad || src - pad >= steps) continue;
                const std::size_t row = src - pad;
                for (std::size_t c = 0; c < chans; ++c)
                    acc += kv.data[(f * width + k) * chans + c] * xv.data[row * chans + c];
            }
            out.data[t * filters + f] = acc;
        }
    }

    auto n = std::make_shared<Node>(std::move(out));
    n->op = OpKind::Conv1d;
    n->parents = {x, kernel, bias};
    n->backward_fn = &backward_conv1d;
    return n;
}

Adam::Adam(std::vector<Param> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    if (params_.empty()) throw ContractError("Adam: no parameters");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto& p : params_) {
        m_.emplace_back(p.node->value.numel(), 0.0);
        v_.emplace_back(p.node->value.numel(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Node& node = *params_[pi].node;
        const bool live = node.has_grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < node.value.numel(); ++i) {
            const double g = live ? node.grad.data[i] : 0.0;
            if (!std::isfinite(g))
                throw TrainingError("non-finite gradient in " + params_[pi].name);
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            node.value.data[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
        if (live) std::fill(node.grad.data.begin(), node.grad.data.end(), 0.0);
    }
}

} // namespace anocast
