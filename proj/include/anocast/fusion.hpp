#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "anocast/cnnlstm.hpp"
#include "anocast/darnn.hpp"
#include "anocast/iforest.hpp"
#include "anocast/sim.hpp"
#include "anocast/vae.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Score fusion. Four per-step components — normalized forecast residual,
// temporal-attention sparsity, reconstruction error, isolation score — are
// combined into the composite anomaly score
//
//     A_t = alpha*R_t + beta*S_t + gamma*E_t + delta_w*I_t,
//
// flagged by a baseline-plus-sudden-change rule, with the weights and rule
// thresholds picked by exhaustive grid search on a validation split.
// ---------------------------------------------------------------------------

struct FusionWeights {
    double alpha = 0.25;   // residual
    double beta = 0.25;    // attention sparsity
    double gamma = 0.25;   // reconstruction error
    double delta_w = 0.25; // isolation score
    void validate() const; // finite, nonnegative, not all zero
};

struct ScoreComponents {
    std::size_t t = 0; // absolute time index the score is assigned to
    double r_hat = 0.0;
    double s_att = 0.0;
    double e_rec = 0.0;
    double i_iso = 0.0;
    double fused = 0.0;
};

struct FlagRule {
    double baseline = 0.0; // b
    double delta_c = 0.0;  // minimum one-step jump
    void validate() const;
};

struct MetaFeatureVector {
    std::vector<double> da_preds;   // standardized roll-out, length H
    std::vector<double> cnn_preds;  // standardized roll-out, length H
    std::vector<double> iso_scores; // per-horizon isolation scores, length H
};

double composite_score(double r_hat, double s_att, double e_rec, double i_iso,
                       const FusionWeights& w);

// |raw residual| / training residual spread.
double normalize_residual(double raw_residual, const Standardizer& train_stats);

// Recursive multi-step forecast: each prediction is pushed into the target
// history; drivers beyond the window are held at their last observed row,
// except channels listed in `overrides`, which are pinned to the given
// standardized values over the whole horizon.
std::vector<double> rollout_forecast(const DarnnModel& model, const Tensor& drivers,
                                     const Tensor& y_hist, std::size_t horizon,
                                     const std::vector<std::pair<std::size_t, double>>&
                                         overrides = {});
std::vector<double> rollout_forecast(const CnnLstmModel& model, const Tensor& drivers,
                                     const Tensor& y_hist, std::size_t horizon,
                                     const std::vector<std::pair<std::size_t, double>>&
                                         overrides = {});

struct MetaContext {
    const DarnnModel* darnn = nullptr;        // temporal attention at the window
    const VaeModel* vae = nullptr;            // reconstruction of the window
    const Standardizer* residual_stats = nullptr; // training residual spread
};

// Collapses per-horizon components into one ScoreComponents record: the
// residual is the horizon max (so `fused` equals the horizon max of the
// per-step composite), sparsity and reconstruction come from the current
// window, and the isolation component averages the per-horizon scores. With
// `truth` (standardized y_{t+1..t+H}) the residual measures the ensemble-mean
// prediction error; an empty `truth` switches to the cross-model disagreement
// |da - cnn| / std_train, which is what what-if projections rely on.
ScoreComponents meta_score(const MetaFeatureVector& fv, const Tensor& drivers,
                           const Tensor& y_hist, const std::vector<double>& truth,
                           const FusionWeights& weights, const MetaContext& ctx,
                           std::size_t t = 0);

// Flags index i iff scores[i] > b and scores[i] - scores[i-1] > delta_c,
// with the score before the series taken as 0.
std::vector<std::size_t> flag_anomalies(const std::vector<double>& scores,
                                        const FlagRule& rule);

struct GridSpec {
    std::vector<double> weight_values = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> baseline_values; // absolute b candidates
    std::vector<double> change_values;   // absolute delta_c candidates
};

struct GridSearchResult {
    FusionWeights weights;
    FlagRule rule;
    double f1 = 0.0;
};

// Exhaustive search over weight tuples (all-zero excluded) jointly with the
// rule thresholds, maximizing event-level F1 on the validation components.
// Ties prefer the lexicographically smallest (alpha, beta, gamma, delta_w),
// then the smallest (b, delta_c).
GridSearchResult grid_search_weights(const std::vector<ScoreComponents>& validation,
                                     const std::vector<PerturbEvent>& events,
                                     const GridSpec& grid, long tolerance);

struct WhatIfResult {
    ScoreComponents projection;
    bool rejected = false; // projected score > rule baseline
};

// Scores a hypothetical future under the overridden drivers. Components are
// projected with the disagreement residual proxy; the action is rejected when
// the projected composite exceeds the flag baseline.
WhatIfResult whatif_evaluate(const Tensor& drivers, const Tensor& y_hist,
                             const std::vector<std::pair<std::size_t, double>>& overrides,
                             std::size_t horizon, const FusionWeights& weights,
                             const FlagRule& rule, const DarnnModel& darnn,
                             const CnnLstmModel& cnn, const VaeModel& vae,
                             const IsolationForestModel& forest,
                             const Standardizer& residual_stats);

} // namespace anocast
