#include "anocast/vae.hpp"

#include <limits>
#include <numeric>

#include "anocast/params_io.hpp"

namespace anocast {

namespace {

NodePtr named(std::vector<Param>& out, const std::string& name, Tensor t) {
    auto n = leaf(std::move(t));
    out.push_back({name, n});
    return n;
}

} // namespace

VaeModel::VaeModel(VaeConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.window < 1 || cfg.hidden < 1 || cfg.latent < 1)
        throw ConfigError("model dimensions must be positive");
    Rng rng(Rng::derive(seed, 0xAE));
    const std::size_t T = cfg.window;
    const std::size_t h = cfg.hidden;
    const std::size_t L = cfg.latent;

    enc_w_ = named(params_, "enc.w", xavier_uniform({h, T}, T, h, rng));
    enc_b_ = named(params_, "enc.b", Tensor({h}));
    mu_w_ = named(params_, "enc.mu.w", xavier_uniform({L, h}, h, L, rng));
    mu_b_ = named(params_, "enc.mu.b", Tensor({L}));
    sig_w_ = named(params_, "enc.sig.w", xavier_uniform({L, h}, h, L, rng));
    sig_b_ = named(params_, "enc.sig.b", Tensor({L}));
    dec_w_ = named(params_, "dec.w", xavier_uniform({h, L}, L, h, rng));
    dec_b_ = named(params_, "dec.b", Tensor({h}));
    out_w_ = named(params_, "dec.out.w", xavier_uniform({T, h}, h, T, rng));
    out_b_ = named(params_, "dec.out.b", Tensor({T}));
}

void VaeModel::check_window(const Tensor& x) const {
    if (x.rank() != 1 || x.shape[0] != cfg_.window)
        throw ShapeError("window " + x.shape.str() + " does not match model " +
                         Shape{cfg_.window}.str());
}

std::pair<NodePtr, NodePtr> VaeModel::encode(const NodePtr& x) const {
    auto hidden = tanh(add(matmul(enc_w_, x), enc_b_));
    return {add(matmul(mu_w_, hidden), mu_b_), add(matmul(sig_w_, hidden), sig_b_)};
}

NodePtr VaeModel::decode(const NodePtr& z) const {
    auto hidden = tanh(add(matmul(dec_w_, z), dec_b_));
    return add(matmul(out_w_, hidden), out_b_);
}

NodePtr VaeModel::kl_term(const NodePtr& mu, const NodePtr& logsig) const {
    // 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2), with the sigma part written
    // as expm1(2 logsig) - 2 logsig so every summand is nonnegative even in
    // floating point
    auto two_logsig = scale(logsig, 2.0);
    auto sig_part = sub(expm1(two_logsig), two_logsig);
    return scale(sum(add(mul(mu, mu), sig_part)), 0.5);
}

VaeLossParts VaeModel::loss(const Tensor& x, Rng& rng) const {
    Tensor eps({cfg_.latent});
    for (auto& v : eps.data) v = rng.normal();
    return loss_with_noise(x, eps);
}

VaeLossParts VaeModel::loss_with_noise(const Tensor& x, const Tensor& eps) const {
    check_window(x);
    if (eps.rank() != 1 || eps.shape[0] != cfg_.latent)
        throw ShapeError("noise " + eps.shape.str() + " does not match latent " +
                         Shape{cfg_.latent}.str());
    auto xin = leaf(x);
    auto [mu, logsig] = encode(xin);
    auto z = add(mu, mul(exp(logsig), leaf(eps)));
    VaeLossParts parts;
    parts.recon = mse(decode(z), xin);
    parts.kl = kl_term(mu, logsig);
    parts.loss = add(parts.recon, parts.kl);
    if (!is_finite(parts.loss->value.data[0])) throw DivergenceError("non-finite loss");
    return parts;
}

VaeTrainStats VaeModel::train(const std::vector<Tensor>& windows, std::size_t epochs,
                              std::size_t batch, std::uint64_t seed) {
    if (windows.empty()) throw DataError("no training windows");
    if (epochs < 1) throw ConfigError("epochs must be positive");
    if (batch < 1) throw ConfigError("batch size must be positive");
    for (const auto& w : windows) check_window(w);

    Adam opt(params_);
    Rng order_rng(Rng::derive(seed, 0xA1));
    Rng noise_rng(Rng::derive(seed, 0xA2));
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    VaeTrainStats stats;
    stats.min_kl = std::numeric_limits<double>::infinity();
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(b0 + batch, order.size());
            NodePtr acc;
            for (std::size_t i = b0; i < b1; ++i) {
                Tensor eps({cfg_.latent});
                for (auto& v : eps.data) v = noise_rng.normal();
                auto parts = loss_with_noise(windows[order[i]], eps);
                stats.min_kl = std::min(stats.min_kl, parts.kl->value.data[0]);
                acc = acc ? add(acc, parts.loss) : parts.loss;
            }
            auto batch_loss = scale(acc, 1.0 / static_cast<double>(b1 - b0));
            const double lv = batch_loss->value.data[0];
            if (!is_finite(lv))
                throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch));
            total += lv * static_cast<double>(b1 - b0);
            backward(batch_loss);
            opt.step();
        }
        stats.history.push_back(total / static_cast<double>(windows.size()));
    }
    trained_ = true;
    return stats;
}

double VaeModel::score(const Tensor& x) const {
    if (!trained_) throw StateError("model has not been trained");
    check_window(x);
    auto xin = leaf(x);
    auto [mu, logsig] = encode(xin);
    (void)logsig;
    return mse(decode(mu), xin)->value.data[0];
}

void VaeModel::save(const std::string& path) const {
    save_params(path, "vae", params_,
                {{"window", static_cast<double>(cfg_.window)},
                 {"hidden", static_cast<double>(cfg_.hidden)},
                 {"latent", static_cast<double>(cfg_.latent)}});
}

VaeModel VaeModel::load(const std::string& path) {
    const auto meta = load_meta(path, "vae");
    VaeConfig cfg;
    cfg.window = static_cast<std::size_t>(meta.at("window"));
    cfg.hidden = static_cast<std::size_t>(meta.at("hidden"));
    cfg.latent = static_cast<std::size_t>(meta.at("latent"));
    VaeModel model(cfg, 0);
    load_params(path, "vae", model.params_);
    model.trained_ = true;
    return model;
}

} // namespace anocast
