#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "anocast/nn.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Variational autoencoder over fixed-length signal windows. Training follows
// the usual evidence bound: one reparameterized latent sample per datum and
// a closed-form KL penalty against the standard normal prior. Scoring is
// deterministic: the window is reconstructed from the mean latent and the
// mean squared reconstruction error is returned.
// ---------------------------------------------------------------------------

struct VaeConfig {
    std::size_t window = 10; // T
    std::size_t hidden = 32;
    std::size_t latent = 4; // L
};

struct VaeLossParts {
    NodePtr loss;  // recon + kl
    NodePtr recon; // mean squared reconstruction error
    NodePtr kl;    // KL(N(mu, sigma^2) || N(0, I))
};

struct VaeTrainStats {
    std::vector<double> history; // per-epoch mean total loss
    double min_kl = 0.0;         // smallest per-item KL seen during training
};

class VaeModel {
public:
    VaeModel(VaeConfig cfg, std::uint64_t seed);

    // One reparameterized sample drawn from `rng`.
    VaeLossParts loss(const Tensor& x, Rng& rng) const;

    // Same loss with the noise vector pinned; the graph is reproducible,
    // which is what gradient checks need.
    VaeLossParts loss_with_noise(const Tensor& x, const Tensor& eps) const;

    VaeTrainStats train(const std::vector<Tensor>& windows, std::size_t epochs,
                        std::size_t batch, std::uint64_t seed);

    // Mean-latent reconstruction error; requires a trained or loaded model.
    double score(const Tensor& x) const;

    const VaeConfig& config() const { return cfg_; }
    std::vector<Param>& params() { return params_; }

    void save(const std::string& path) const;
    static VaeModel load(const std::string& path);

private:
    std::pair<NodePtr, NodePtr> encode(const NodePtr& x) const; // (mu, logsig)
    NodePtr decode(const NodePtr& z) const;
    NodePtr kl_term(const NodePtr& mu, const NodePtr& logsig) const;
    void check_window(const Tensor& x) const;

    VaeConfig cfg_;
    std::vector<Param> params_;
    bool trained_ = false;
    NodePtr enc_w_, enc_b_;         // window -> hidden
    NodePtr mu_w_, mu_b_;           // hidden -> latent mean
    NodePtr sig_w_, sig_b_;         // hidden -> latent log stddev
    NodePtr dec_w_, dec_b_;         // latent -> hidden
    NodePtr out_w_, out_b_;         // hidden -> reconstruction
};

} // namespace anocast
