#include "anocast/darnn.hpp"

#include <algorithm>
#include <cmath>

#include "anocast/params_io.hpp"
#include "train_util.hpp"

namespace anocast {

namespace {

NodePtr named(std::vector<Param>& out, const std::string& name, Tensor t) {
    auto n = leaf(std::move(t));
    out.push_back({name, n});
    return n;
}

} // namespace

DarnnModel::DarnnModel(DarnnConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.window < 1 || cfg.driver_dim < 1 || cfg.enc_hidden < 1 || cfg.dec_hidden < 1)
        throw ConfigError("model dimensions must be positive");
    Rng rng(Rng::derive(seed, 0xDA));
    const std::size_t T = cfg.window;
    const std::size_t D = cfg.driver_dim;
    const std::size_t m = cfg.enc_hidden;
    const std::size_t p = cfg.dec_hidden;

    we_ = named(params_, "enc_att.w", xavier_uniform({T, 2 * m}, 2 * m, T, rng));
    ue_ = named(params_, "enc_att.u", xavier_uniform({T, T}, T, T, rng));
    ve_ = named(params_, "enc_att.v", xavier_uniform({T}, T, 1, rng));
    enc_ = std::make_unique<LstmParams>(D, m, "enc", rng, params_);
    wd_ = named(params_, "dec_att.w", xavier_uniform({m, 2 * p}, 2 * p, m, rng));
    ud_ = named(params_, "dec_att.u", xavier_uniform({m, m}, m, m, rng));
    vd_ = named(params_, "dec_att.v", xavier_uniform({m}, m, 1, rng));
    dec_ = std::make_unique<LstmParams>(1, p, "dec", rng, params_);
    wt_ = named(params_, "dec_in.w", xavier_uniform({m + 1}, m + 1, 1, rng));
    bt_ = named(params_, "dec_in.b", Tensor({1}));
    wy_ = named(params_, "head.w", xavier_uniform({p, p + m}, p + m, p, rng));
    by_ = named(params_, "head.b", Tensor({p}));
    vy_ = named(params_, "head.v", xavier_uniform({p}, p, 1, rng));
    bv_ = named(params_, "head.c", Tensor({1}));
}

DarnnOutput DarnnModel::forward(const Tensor& drivers, const Tensor& y_hist) const {
    const std::size_t T = cfg_.window;
    const std::size_t D = cfg_.driver_dim;
    if (drivers.rank() != 2 || drivers.shape[0] != T || drivers.shape[1] != D)
        throw ShapeError("drivers " + drivers.shape.str() + " do not match model " +
                         Shape{T, D}.str());
    if (y_hist.rank() != 1 || y_hist.shape[0] != T)
        throw ShapeError("target history " + y_hist.shape.str() + " does not match window " +
                         Shape{T}.str());

    auto xw = leaf(drivers);
    auto yh = leaf(y_hist);

    // per-channel driver series, transformed once for the attention scores
    std::vector<NodePtr> u_series(D);
    for (std::size_t k = 0; k < D; ++k) {
        Tensor col({T});
        for (std::size_t t = 0; t < T; ++t) col.data[t] = drivers.at(t, k);
        u_series[k] = matmul(ue_, leaf(std::move(col)));
    }

    DarnnOutput out;
    out.input_attention = Tensor({T, D});

    // encoder with input attention over driver channels
    LstmState es = lstm_zero_state(cfg_.enc_hidden);
    std::vector<NodePtr> enc_states;
    enc_states.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        auto base = matmul(we_, concat({es.h, es.c}));
        std::vector<NodePtr> scores;
        scores.reserve(D);
        for (std::size_t k = 0; k < D; ++k)
            scores.push_back(matmul(ve_, tanh(add(base, u_series[k]))));
        auto alpha = softmax(concat(scores));
        for (std::size_t k = 0; k < D; ++k) out.input_attention.at(t, k) = alpha->value.data[k];
        es = lstm_step(*enc_, mul(alpha, slice(xw, t * D, D)), es);
        enc_states.push_back(es.h);
    }

    // decoder with temporal attention over encoder states
    std::vector<NodePtr> u_enc(T);
    for (std::size_t t = 0; t < T; ++t) u_enc[t] = matmul(ud_, enc_states[t]);

    LstmState ds = lstm_zero_state(cfg_.dec_hidden);
    NodePtr beta;
    NodePtr context;
    for (std::size_t i = 0; i < T; ++i) {
        auto base = matmul(wd_, concat({ds.h, ds.c}));
        std::vector<NodePtr> scores;
        scores.reserve(T);
        for (std::size_t t = 0; t < T; ++t)
            scores.push_back(matmul(vd_, tanh(add(base, u_enc[t]))));
        beta = softmax(concat(scores));
        context = nullptr;
        for (std::size_t t = 0; t < T; ++t) {
            auto term = mul(slice(beta, t, 1), enc_states[t]);
            context = context ? add(context, term) : term;
        }
        auto ytilde = add(matmul(wt_, concat({slice(yh, i, 1), context})), bt_);
        ds = lstm_step(*dec_, ytilde, ds);
    }

    auto hidden = add(matmul(wy_, concat({ds.h, context})), by_);
    out.prediction = add(matmul(vy_, hidden), bv_);
    out.temporal_attention = beta->value;
    return out;
}

std::vector<double> DarnnModel::train(const WindowedSet& data, std::size_t epochs,
                                      std::size_t batch, std::uint64_t seed) {
    if (!data.items.empty() && data.window != cfg_.window)
        throw ConfigError("window size of the data does not match the model");
    return detail::train_mse(data.items, epochs, batch, seed, params_,
                             [this](const WindowItem& item) {
                                 return forward(item.drivers, item.y_hist).prediction;
                             });
}

void DarnnModel::save(const std::string& path) const {
    save_params(path, "darnn", params_,
                {{"window", static_cast<double>(cfg_.window)},
                 {"driver_dim", static_cast<double>(cfg_.driver_dim)},
                 {"enc_hidden", static_cast<double>(cfg_.enc_hidden)},
                 {"dec_hidden", static_cast<double>(cfg_.dec_hidden)}});
}

DarnnModel DarnnModel::load(const std::string& path) {
    const auto meta = load_meta(path, "darnn");
    DarnnConfig cfg;
    cfg.window = static_cast<std::size_t>(meta.at("window"));
    cfg.driver_dim = static_cast<std::size_t>(meta.at("driver_dim"));
    cfg.enc_hidden = static_cast<std::size_t>(meta.at("enc_hidden"));
    cfg.dec_hidden = static_cast<std::size_t>(meta.at("dec_hidden"));
    DarnnModel model(cfg, 0);
    load_params(path, "darnn", model.params_);
    return model;
}

double attention_sparsity(const std::vector<double>& weights) {
    if (weights.empty()) throw ContractError("attention weights must be nonempty");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ContractError("attention weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw ContractError("attention weights must sum to 1");
    const std::size_t n = weights.size();
    if (n == 1) return 0.0;
    // entropy deficit ln(n) - H(w), expressed so the uniform and one-hot
    // cases come out exactly 0 and 1
    double deficit = 0.0;
    for (double w : weights)
        if (w > 0.0) deficit += w * std::log(w * static_cast<double>(n));
    return std::clamp(deficit / std::log(static_cast<double>(n)), 0.0, 1.0);
}

} // namespace anocast
