#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "anocast/data.hpp"
#include "anocast/nn.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Dual-stage attention forecaster. The encoder learns a per-step softmax over
// the driver channels (input attention); the decoder attends over encoder
// hidden states (temporal attention) while consuming the target history, and
// an affine head emits the one-step prediction.
// ---------------------------------------------------------------------------

struct DarnnConfig {
    std::size_t window = 10;     // T
    std::size_t driver_dim = 2;  // D
    std::size_t enc_hidden = 32; // m
    std::size_t dec_hidden = 32; // p
};

struct DarnnOutput {
    NodePtr prediction;        // [1], standardized units
    Tensor input_attention;    // [T x D], rows on the simplex
    Tensor temporal_attention; // [T], simplex weights of the last decoder step
};

class DarnnModel {
public:
    DarnnModel(DarnnConfig cfg, std::uint64_t seed);

    DarnnOutput forward(const Tensor& drivers, const Tensor& y_hist) const;

    // Mini-batch descent on the mean squared one-step error; returns the
    // per-epoch mean training loss. Deterministic in `seed`.
    std::vector<double> train(const WindowedSet& data, std::size_t epochs, std::size_t batch,
                              std::uint64_t seed);

    const DarnnConfig& config() const { return cfg_; }
    std::vector<Param>& params() { return params_; }

    void save(const std::string& path) const;
    static DarnnModel load(const std::string& path);

private:
    DarnnConfig cfg_;
    std::vector<Param> params_;
    std::unique_ptr<LstmParams> enc_;
    NodePtr we_, ue_, ve_; // input attention
    std::unique_ptr<LstmParams> dec_;
    NodePtr wd_, ud_, vd_; // temporal attention
    NodePtr wt_, bt_;      // target-history projection
    NodePtr wy_, by_, vy_, bv_; // output head
};

// Entropy-deficit concentration of a simplex vector: 0 for uniform weights,
// 1 for a one-hot vector, 0 by convention for a single weight.
double attention_sparsity(const std::vector<double>& weights);

} // namespace anocast
