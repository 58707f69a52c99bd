#include "anocast/cnnlstm.hpp"

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

CnnLstmModel::CnnLstmModel(CnnLstmConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.window < 1 || cfg.input_dim < 1 || cfg.filters < 1 || cfg.hidden < 1)
        throw ConfigError("model dimensions must be positive");
    if (cfg.kernel < 1 || cfg.kernel % 2 == 0)
        throw ConfigError("kernel width must be odd");
    Rng rng(Rng::derive(seed, 0xC1));
    const std::size_t C = cfg.input_dim;
    const std::size_t F = cfg.filters;
    const std::size_t h = cfg.hidden;

    conv_k_ = named(params_, "conv.k",
                    xavier_uniform({F, cfg.kernel, C}, cfg.kernel * C, F, rng));
    conv_b_ = named(params_, "conv.b", Tensor({F}));
    rnn_ = std::make_unique<LstmParams>(F, h, "rnn", rng, params_);
    head_w_ = named(params_, "head.w", xavier_uniform({h}, h, 1, rng));
    head_b_ = named(params_, "head.b", Tensor({1}));
}

Tensor CnnLstmModel::stack_window(const Tensor& drivers, const Tensor& y_hist) {
    if (drivers.rank() != 2) throw ShapeError("drivers must be rank 2");
    const std::size_t T = drivers.shape[0];
    const std::size_t D = drivers.shape[1];
    if (y_hist.rank() != 1 || y_hist.shape[0] != T)
        throw ShapeError("target history " + y_hist.shape.str() + " does not match drivers " +
                         drivers.shape.str());
    Tensor out({T, D + 1});
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < D; ++k) out.at(t, k) = drivers.at(t, k);
        out.at(t, D) = y_hist.data[t];
    }
    return out;
}

NodePtr CnnLstmModel::features(const Tensor& window) const {
    if (window.rank() != 2 || window.shape[0] != cfg_.window ||
        window.shape[1] != cfg_.input_dim)
        throw ShapeError("window " + window.shape.str() + " does not match model " +
                         Shape{cfg_.window, cfg_.input_dim}.str());
    return tanh(conv1d(leaf(window), conv_k_, conv_b_));
}

NodePtr CnnLstmModel::forward(const Tensor& window) const {
    auto feats = features(window);
    LstmState st = lstm_zero_state(cfg_.hidden);
    for (std::size_t t = 0; t < cfg_.window; ++t)
        st = lstm_step(*rnn_, slice(feats, t * cfg_.filters, cfg_.filters), st);
    return add(matmul(head_w_, st.h), head_b_);
}

std::vector<double> CnnLstmModel::train(const WindowedSet& data, std::size_t epochs,
                                        std::size_t batch, std::uint64_t seed) {
    if (!data.items.empty() && data.window != cfg_.window)
        throw ConfigError("window size of the data does not match the model");
    return detail::train_mse(data.items, epochs, batch, seed, params_,
                             [this](const WindowItem& item) {
                                 return forward(stack_window(item.drivers, item.y_hist));
                             });
}

void CnnLstmModel::save(const std::string& path) const {
    save_params(path, "cnnlstm", params_,
                {{"window", static_cast<double>(cfg_.window)},
                 {"input_dim", static_cast<double>(cfg_.input_dim)},
                 {"kernel", static_cast<double>(cfg_.kernel)},
                 {"filters", static_cast<double>(cfg_.filters)},
                 {"hidden", static_cast<double>(cfg_.hidden)}});
}

CnnLstmModel CnnLstmModel::load(const std::string& path) {
    const auto meta = load_meta(path, "cnnlstm");
    CnnLstmConfig cfg;
    cfg.window = static_cast<std::size_t>(meta.at("window"));
    cfg.input_dim = static_cast<std::size_t>(meta.at("input_dim"));
    cfg.kernel = static_cast<std::size_t>(meta.at("kernel"));
    cfg.filters = static_cast<std::size_t>(meta.at("filters"));
    cfg.hidden = static_cast<std::size_t>(meta.at("hidden"));
    CnnLstmModel model(cfg, 0);
    load_params(path, "cnnlstm", model.params_);
    return model;
}

} // namespace anocast
