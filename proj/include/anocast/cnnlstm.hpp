#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "anocast/data.hpp"
#include "anocast/nn.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Convolution-then-recurrence forecaster. A single same-padded conv layer
// extracts local features from the stacked window (drivers plus target
// history as the last channel), an LSTM consumes the feature sequence, and
// an affine head maps the final hidden state to the one-step prediction.
// ---------------------------------------------------------------------------

struct CnnLstmConfig {
    std::size_t window = 10;   // T
    std::size_t input_dim = 3; // C = drivers + target history
    std::size_t kernel = 3;    // k, odd
    std::size_t filters = 16;  // F
    std::size_t hidden = 32;   // h
};

class CnnLstmModel {
public:
    CnnLstmModel(CnnLstmConfig cfg, std::uint64_t seed);

    // Drivers [T x D] and target history [T] side by side, history last.
    static Tensor stack_window(const Tensor& drivers, const Tensor& y_hist);

    // Post-activation feature sequence [T x F] produced by the conv layer.
    NodePtr features(const Tensor& window) const;

    NodePtr forward(const Tensor& window) const;

    std::vector<double> train(const WindowedSet& data, std::size_t epochs, std::size_t batch,
                              std::uint64_t seed);

    const CnnLstmConfig& config() const { return cfg_; }
    std::vector<Param>& params() { return params_; }

    void save(const std::string& path) const;
    static CnnLstmModel load(const std::string& path);

private:
    CnnLstmConfig cfg_;
    std::vector<Param> params_;
    NodePtr conv_k_, conv_b_;
    std::unique_ptr<LstmParams> rnn_;
    NodePtr head_w_, head_b_;
};

} // namespace anocast
