#include "anocast/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "anocast/data.hpp"

namespace anocast {

void FusionWeights::validate() const {
    for (double v : {alpha, beta, gamma, delta_w})
        if (!is_finite(v) || v < 0.0)
            throw ConfigError("fusion weights must be finite and nonnegative");
    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0 && delta_w == 0.0)
        throw ConfigError("at least one fusion weight must be positive");
}

void FlagRule::validate() const {
    if (!is_finite(baseline) || !is_finite(delta_c))
        throw ConfigError("rule thresholds must be finite");
    if (delta_c < 0.0) throw ConfigError("change threshold must be nonnegative");
}

double composite_score(double r_hat, double s_att, double e_rec, double i_iso,
                       const FusionWeights& w) {
    if (!is_finite(r_hat) || !is_finite(s_att) || !is_finite(e_rec) || !is_finite(i_iso))
        throw ContractError("score components must be finite");
    return w.alpha * r_hat + w.beta * s_att + w.gamma * e_rec + w.delta_w * i_iso;
}

double normalize_residual(double raw_residual, const Standardizer& train_stats) {
    if (!is_finite(raw_residual)) throw ContractError("residual must be finite");
    if (!(train_stats.std > 0.0) || train_stats.std < 1e-12)
        throw DegenerateDataError("training residual spread is zero");
    return std::abs(raw_residual) / train_stats.std;
}

namespace {

template <typename StepFn>
std::vector<double> rollout_core(StepFn&& step, Tensor drivers, Tensor y_hist,
                                 std::size_t horizon,
                                 const std::vector<std::pair<std::size_t, double>>& overrides) {
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (drivers.rank() != 2) throw ShapeError("drivers must be rank 2");
    const std::size_t T = drivers.shape[0];
    const std::size_t D = drivers.shape[1];
    for (const auto& [ch, v] : overrides) {
        if (ch >= D) throw ConfigError("override channel out of range");
        if (!is_finite(v)) throw ConfigError("override value must be finite");
    }

    std::vector<double> preds;
    preds.reserve(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        const double y = step(drivers, y_hist);
        preds.push_back(y);
        if (h + 1 == horizon) break;
        // slide the window: history gains the prediction; the next driver row
        // repeats the last observed one, with overridden channels pinned
        std::vector<double> next_row(D);
        for (std::size_t k = 0; k < D; ++k) next_row[k] = drivers.at(T - 1, k);
        for (const auto& [ch, v] : overrides) next_row[ch] = v;
        for (std::size_t t = 0; t + 1 < T; ++t) {
            for (std::size_t k = 0; k < D; ++k) drivers.at(t, k) = drivers.at(t + 1, k);
            y_hist.data[t] = y_hist.data[t + 1];
        }
        for (std::size_t k = 0; k < D; ++k) drivers.at(T - 1, k) = next_row[k];
        y_hist.data[T - 1] = y;
    }
    return preds;
}

} // namespace

std::vector<double> rollout_forecast(const DarnnModel& model, const Tensor& drivers,
                                     const Tensor& y_hist, std::size_t horizon,
                                     const std::vector<std::pair<std::size_t, double>>&
                                         overrides) {
    return rollout_core(
        [&](const Tensor& d, const Tensor& y) {
            return model.forward(d, y).prediction->value.data[0];
        },
        drivers, y_hist, horizon, overrides);
}

std::vector<double> rollout_forecast(const CnnLstmModel& model, const Tensor& drivers,
                                     const Tensor& y_hist, std::size_t horizon,
                                     const std::vector<std::pair<std::size_t, double>>&
                                         overrides) {
    return rollout_core(
        [&](const Tensor& d, const Tensor& y) {
            return model.forward(CnnLstmModel::stack_window(d, y))->value.data[0];
        },
        drivers, y_hist, horizon, overrides);
}

ScoreComponents meta_score(const MetaFeatureVector& fv, const Tensor& drivers,
                           const Tensor& y_hist, const std::vector<double>& truth,
                           const FusionWeights& weights, const MetaContext& ctx,
                           std::size_t t) {
    if (!ctx.darnn || !ctx.vae || !ctx.residual_stats)
        throw StateError("missing component model");
    weights.validate();
    const std::size_t horizon = fv.da_preds.size();
    if (horizon == 0 || fv.cnn_preds.size() != horizon || fv.iso_scores.size() != horizon)
        throw ContractError("feature vector arrays must share one horizon length");
    if (!truth.empty() && truth.size() != horizon)
        throw ContractError("truth must be empty or match the horizon");

    double r_hat = 0.0;
    for (std::size_t h = 0; h < horizon; ++h) {
        const double raw =
            truth.empty() ? fv.da_preds[h] - fv.cnn_preds[h]
                          : truth[h] - 0.5 * (fv.da_preds[h] + fv.cnn_preds[h]);
        r_hat = std::max(r_hat, normalize_residual(raw, *ctx.residual_stats));
    }
    double i_iso = 0.0;
    for (double s : fv.iso_scores) i_iso += s;
    i_iso /= static_cast<double>(horizon);

    ScoreComponents c;
    c.t = t;
    c.r_hat = r_hat;
    c.s_att =
        attention_sparsity(ctx.darnn->forward(drivers, y_hist).temporal_attention.data);
    c.e_rec = ctx.vae->score(y_hist);
    c.i_iso = i_iso;
    c.fused = composite_score(c.r_hat, c.s_att, c.e_rec, c.i_iso, weights);
    return c;
}

std::vector<std::size_t> flag_anomalies(const std::vector<double>& scores,
                                        const FlagRule& rule) {
    rule.validate();
    std::vector<std::size_t> flags;
    double prev = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!is_finite(scores[i])) throw ContractError("scores must be finite");
        if (scores[i] > rule.baseline && scores[i] - prev > rule.delta_c) flags.push_back(i);
        prev = scores[i];
    }
    return flags;
}

GridSearchResult grid_search_weights(const std::vector<ScoreComponents>& validation,
                                     const std::vector<PerturbEvent>& events,
                                     const GridSpec& grid, long tolerance) {
    if (grid.weight_values.empty() || grid.baseline_values.empty() ||
        grid.change_values.empty())
        throw ConfigError("grid must not be empty");
    if (validation.empty()) throw DataError("no validation components");
    for (std::size_t i = 1; i < validation.size(); ++i)
        if (validation[i].t <= validation[i - 1].t)
            throw ContractError("validation components must be time-ordered");

    auto ascending = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    const auto wv = ascending(grid.weight_values);
    const auto bv = ascending(grid.baseline_values);
    const auto cv = ascending(grid.change_values);
    for (double v : wv)
        if (!is_finite(v) || v < 0.0) throw ConfigError("weight grid values must be nonnegative");
    for (double v : cv)
        if (!is_finite(v) || v < 0.0) throw ConfigError("change grid values must be nonnegative");

    GridSearchResult best;
    best.f1 = -1.0;
    std::vector<double> scores(validation.size());
    std::vector<std::size_t> flags;
    // ascending enumeration plus strictly-better replacement implements the
    // smallest-lexicographic tie rule
    for (double alpha : wv)
        for (double beta : wv)
            for (double gamma : wv)
                for (double delta : wv) {
                    if (alpha == 0.0 && beta == 0.0 && gamma == 0.0 && delta == 0.0) continue;
                    const FusionWeights w{alpha, beta, gamma, delta};
                    for (std::size_t i = 0; i < validation.size(); ++i)
                        scores[i] = composite_score(validation[i].r_hat, validation[i].s_att,
                                                    validation[i].e_rec, validation[i].i_iso,
                                                    w);
                    for (double b : bv)
                        for (double dc : cv) {
                            const auto pos = flag_anomalies(scores, {b, dc});
                            flags.clear();
                            for (std::size_t p : pos) flags.push_back(validation[p].t);
                            const double f1 = evaluate_detection(flags, events, tolerance).f1;
                            if (f1 > best.f1) best = {w, {b, dc}, f1};
                        }
                }
    return best;
}

WhatIfResult whatif_evaluate(const Tensor& drivers, const Tensor& y_hist,
                             const std::vector<std::pair<std::size_t, double>>& overrides,
                             std::size_t horizon, const FusionWeights& weights,
                             const FlagRule& rule, const DarnnModel& darnn,
                             const CnnLstmModel& cnn, const VaeModel& vae,
                             const IsolationForestModel& forest,
                             const Standardizer& residual_stats) {
    rule.validate();
    MetaFeatureVector fv;
    fv.da_preds = rollout_forecast(darnn, drivers, y_hist, horizon, overrides);
    fv.cnn_preds = rollout_forecast(cnn, drivers, y_hist, horizon, overrides);
    fv.iso_scores.reserve(horizon);
    for (std::size_t h = 0; h < horizon; ++h)
        fv.iso_scores.push_back(forest.score(
            residual_stats.transform(std::abs(fv.da_preds[h] - fv.cnn_preds[h]))));

    const MetaContext ctx{&darnn, &vae, &residual_stats};
    WhatIfResult result;
    result.projection = meta_score(fv, drivers, y_hist, {}, weights, ctx);
    result.rejected = result.projection.fused > rule.baseline;
    return result;
}

} // namespace anocast
