#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "anocast/fusion.hpp"

using namespace anocast;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t(Shape{r, c});
    for (auto& v : t.data) v = rng.normal();
    return t;
}

Tensor random_vector(std::size_t n, Rng& rng) {
    Tensor t(Shape{n});
    for (auto& v : t.data) v = rng.normal();
    return t;
}

void set_param(std::vector<Param>& params, const std::string& name, double value) {
    for (auto& p : params)
        if (p.name == name) {
            std::fill(p.node->value.data.begin(), p.node->value.data.end(), value);
            return;
        }
    REQUIRE(false);
}

// the forecasters predict a constant when their output heads are zeroed
DarnnModel constant_darnn(std::size_t window, std::size_t driver_dim, double value,
                          std::uint64_t seed) {
    DarnnModel m({window, driver_dim, 3, 3}, seed);
    set_param(m.params(), "head.v", 0.0);
    set_param(m.params(), "head.c", value);
    return m;
}

CnnLstmModel constant_cnn(std::size_t window, std::size_t input_dim, double value,
                          std::uint64_t seed) {
    CnnLstmModel m({window, input_dim, 3, 3, 4}, seed);
    set_param(m.params(), "head.w", 0.0);
    set_param(m.params(), "head.b", value);
    return m;
}

VaeModel trained_vae(std::size_t window, std::uint64_t seed) {
    VaeModel vae({window, 6, 2}, seed);
    Rng rng(Rng::derive(seed, 77));
    std::vector<Tensor> windows;
    for (int i = 0; i < 24; ++i) windows.push_back(random_vector(window, rng));
    vae.train(windows, 2, 8, seed + 1);
    return vae;
}

// one-step-at-a-time reference for the recursive forecast
template <typename StepFn>
std::vector<double> manual_rollout(StepFn step, Tensor drivers, Tensor y_hist,
                                   std::size_t horizon,
                                   const std::vector<std::pair<std::size_t, double>>& ov) {
    const std::size_t T = drivers.shape[0];
    const std::size_t D = drivers.shape[1];
    std::vector<double> preds;
    for (std::size_t h = 0; h < horizon; ++h) {
        preds.push_back(step(drivers, y_hist));
        std::vector<double> row(D);
        for (std::size_t k = 0; k < D; ++k) row[k] = drivers.at(T - 1, k);
        for (const auto& [ch, v] : ov) row[ch] = v;
        for (std::size_t t = 0; t + 1 < T; ++t) {
            for (std::size_t k = 0; k < D; ++k) drivers.at(t, k) = drivers.at(t + 1, k);
            y_hist.data[t] = y_hist.data[t + 1];
        }
        for (std::size_t k = 0; k < D; ++k) drivers.at(T - 1, k) = row[k];
        y_hist.data[T - 1] = preds.back();
    }
    return preds;
}

} // namespace

TEST_CASE("composite score reduces to single components and handles exact units") {
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const double r = std::abs(rng.normal());
        const double s = rng.uniform01();
        const double e = std::abs(rng.normal());
        const double iso = rng.uniform01();
        CHECK(composite_score(r, s, e, iso, {1, 0, 0, 0}) == r);
        CHECK(composite_score(r, s, e, iso, {0, 1, 0, 0}) == s);
        CHECK(composite_score(r, s, e, iso, {0, 0, 1, 0}) == e);
        CHECK(composite_score(r, s, e, iso, {0, 0, 0, 1}) == iso);
    }
    CHECK(composite_score(0, 0, 0, 0, {0.7, 0.1, 0.1, 0.1}) == 0.0);
    CHECK(composite_score(1, 1, 1, 1, {0.25, 0.25, 0.25, 0.25}) == 1.0);
    CHECK(composite_score(2, 3, 4, 5, {1, 1, 1, 1}) == 14.0);
}

TEST_CASE("composite score is nondecreasing in every component") {
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        const FusionWeights w{rng.uniform01(), rng.uniform01(), rng.uniform01(),
                              rng.uniform01() + 0.01};
        double c[4] = {std::abs(rng.normal()), rng.uniform01(), std::abs(rng.normal()),
                       rng.uniform01()};
        const double base = composite_score(c[0], c[1], c[2], c[3], w);
        for (int k = 0; k < 4; ++k) {
            double bumped[4] = {c[0], c[1], c[2], c[3]};
            bumped[k] += 0.5;
            CHECK(composite_score(bumped[0], bumped[1], bumped[2], bumped[3], w) >= base);
        }
    }
}

TEST_CASE("composite score rejects bad weights and non-finite components") {
    const double nan = std::nan("");
    CHECK_THROWS_AS(composite_score(nan, 0, 0, 0, {1, 0, 0, 0}), ContractError);
    CHECK_THROWS_AS(composite_score(0, 0, 0, 1.0 / 0.0, {1, 0, 0, 0}), ContractError);
    CHECK_THROWS_AS((FusionWeights{0, 0, 0, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((FusionWeights{-0.1, 1, 0, 0}.validate()), ConfigError);
    CHECK_THROWS_AS((FusionWeights{nan, 1, 0, 0}.validate()), ConfigError);
    CHECK_NOTHROW(FusionWeights{}.validate());
}

TEST_CASE("residual normalization is absolute, scale-exact, and guards zero spread") {
    const Standardizer stats{0.3, 2.0}; // mean plays no role here
    CHECK(normalize_residual(0.0, stats) == 0.0);
    CHECK(normalize_residual(2.0, stats) == 1.0);
    CHECK(normalize_residual(-2.0, stats) == 1.0);
    Rng rng(13);
    for (int i = 0; i < 30; ++i) {
        const double r = rng.normal();
        CHECK(normalize_residual(r, stats) == std::abs(r) / 2.0);
        CHECK(normalize_residual(-r, stats) == normalize_residual(r, stats));
    }
    CHECK_THROWS_AS(normalize_residual(1.0, Standardizer{0.0, 0.0}), DegenerateDataError);
    CHECK_THROWS_AS(normalize_residual(std::nan(""), stats), ContractError);
}

TEST_CASE("a one-step rollout equals a single forward pass") {
    Rng rng(21);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);

    DarnnModel da({4, 2, 3, 3}, 5);
    const auto da_roll = rollout_forecast(da, drivers, y_hist, 1);
    REQUIRE(da_roll.size() == 1);
    CHECK(da_roll[0] == da.forward(drivers, y_hist).prediction->value.data[0]);

    CnnLstmModel cnn({4, 3, 3, 3, 4}, 6);
    const auto cnn_roll = rollout_forecast(cnn, drivers, y_hist, 1);
    REQUIRE(cnn_roll.size() == 1);
    CHECK(cnn_roll[0] ==
          cnn.forward(CnnLstmModel::stack_window(drivers, y_hist))->value.data[0]);
}

TEST_CASE("constant-head models roll out their bias at every step") {
    Rng rng(22);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);

    const auto da = constant_darnn(4, 2, 0.7, 5);
    for (double p : rollout_forecast(da, drivers, y_hist, 6)) CHECK(p == 0.7);

    const auto cnn = constant_cnn(4, 3, -0.35, 6);
    for (double p : rollout_forecast(cnn, drivers, y_hist, 6)) CHECK(p == -0.35);
}

TEST_CASE("multi-step rollouts match manual window chaining, with and without overrides") {
    Rng rng(23);
    const Tensor drivers = random_matrix(5, 3, rng);
    const Tensor y_hist = random_vector(5, rng);
    const std::vector<std::pair<std::size_t, double>> pin = {{1, 2.5}, {0, -1.0}};

    DarnnModel da({5, 3, 3, 3}, 9);
    auto da_step = [&](const Tensor& d, const Tensor& y) {
        return da.forward(d, y).prediction->value.data[0];
    };
    CHECK(rollout_forecast(da, drivers, y_hist, 4) ==
          manual_rollout(da_step, drivers, y_hist, 4, {}));
    CHECK(rollout_forecast(da, drivers, y_hist, 4, pin) ==
          manual_rollout(da_step, drivers, y_hist, 4, pin));

    CnnLstmModel cnn({5, 4, 3, 3, 4}, 10);
    auto cnn_step = [&](const Tensor& d, const Tensor& y) {
        return cnn.forward(CnnLstmModel::stack_window(d, y))->value.data[0];
    };
    CHECK(rollout_forecast(cnn, drivers, y_hist, 4) ==
          manual_rollout(cnn_step, drivers, y_hist, 4, {}));
    CHECK(rollout_forecast(cnn, drivers, y_hist, 4, pin) ==
          manual_rollout(cnn_step, drivers, y_hist, 4, pin));
}

TEST_CASE("rollout rejects a zero horizon and unknown override channels") {
    Rng rng(24);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 5);
    CHECK_THROWS_AS(rollout_forecast(da, drivers, y_hist, 0), ConfigError);
    CHECK_THROWS_AS(rollout_forecast(da, drivers, y_hist, 3, {{2, 1.0}}), ConfigError);
    CHECK_THROWS_AS(rollout_forecast(da, drivers, y_hist, 3, {{0, std::nan("")}}),
                    ConfigError);
}

TEST_CASE("meta score with a unit horizon equals the composite of its parts") {
    Rng rng(31);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 41);
    const auto vae = trained_vae(4, 42);
    const Standardizer stats{0.0, 2.0};
    const MetaContext ctx{&da, &vae, &stats};
    const FusionWeights w{0.4, 0.3, 0.2, 0.1};

    MetaFeatureVector fv;
    fv.da_preds = {0.8};
    fv.cnn_preds = {0.2};
    fv.iso_scores = {0.6};
    const std::vector<double> truth = {1.4};

    const auto c = meta_score(fv, drivers, y_hist, truth, w, ctx, 17);
    CHECK(c.t == 17);
    const double r = normalize_residual(truth[0] - 0.5 * (0.8 + 0.2), stats);
    const double s = attention_sparsity(da.forward(drivers, y_hist).temporal_attention.data);
    const double e = vae.score(y_hist);
    CHECK(c.r_hat == r);
    CHECK(c.s_att == s);
    CHECK(c.e_rec == e);
    CHECK(c.i_iso == 0.6);
    CHECK(c.fused == composite_score(r, s, e, 0.6, w));
}

TEST_CASE("perfect forecasts zero the residual component") {
    Rng rng(32);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 43);
    const auto vae = trained_vae(4, 44);
    const Standardizer stats{0.0, 1.5};
    const MetaContext ctx{&da, &vae, &stats};

    MetaFeatureVector fv;
    fv.da_preds = {0.9, -0.4, 0.1};
    fv.cnn_preds = {0.1, -0.2, 0.5};
    fv.iso_scores = {0.5, 0.5, 0.5};
    std::vector<double> truth(3);
    for (int h = 0; h < 3; ++h) truth[h] = 0.5 * (fv.da_preds[h] + fv.cnn_preds[h]);

    const auto c = meta_score(fv, drivers, y_hist, truth, {1, 0, 0, 0}, ctx);
    CHECK(c.r_hat == 0.0);
    CHECK(c.fused == 0.0);

    // disagreement mode: identical rollouts mean a zero proxy residual
    fv.cnn_preds = fv.da_preds;
    const auto d = meta_score(fv, drivers, y_hist, {}, {1, 0, 0, 0}, ctx);
    CHECK(d.r_hat == 0.0);
    CHECK(d.fused == 0.0);
}

TEST_CASE("the fused value is the horizon max of per-step composites") {
    Rng rng(33);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 45);
    const auto vae = trained_vae(4, 46);
    const Standardizer stats{0.0, 0.7};
    const MetaContext ctx{&da, &vae, &stats};

    for (int trial = 0; trial < 20; ++trial) {
        const FusionWeights w{rng.uniform01(), rng.uniform01(), rng.uniform01(),
                              rng.uniform01() + 0.01};
        const std::size_t H = 1 + static_cast<std::size_t>(rng.uniform_int(1, 6));
        MetaFeatureVector fv;
        std::vector<double> truth;
        for (std::size_t h = 0; h < H; ++h) {
            fv.da_preds.push_back(rng.normal());
            fv.cnn_preds.push_back(rng.normal());
            fv.iso_scores.push_back(rng.uniform01());
            truth.push_back(rng.normal());
        }
        const auto c = meta_score(fv, drivers, y_hist, truth, w, ctx);

        double i_iso = 0.0;
        for (double s : fv.iso_scores) i_iso += s;
        i_iso /= static_cast<double>(H);
        double best = -1.0;
        double best_r = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            const double r = normalize_residual(
                truth[h] - 0.5 * (fv.da_preds[h] + fv.cnn_preds[h]), stats);
            best_r = std::max(best_r, r);
            best = std::max(best, composite_score(r, c.s_att, c.e_rec, i_iso, w));
        }
        CHECK(c.r_hat == best_r);
        CHECK(c.fused == best);
        CHECK(c.i_iso == i_iso);
    }
}

TEST_CASE("meta score is deterministic and validates its inputs") {
    Rng rng(34);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 47);
    const auto vae = trained_vae(4, 48);
    const Standardizer stats{0.0, 1.0};
    const MetaContext ctx{&da, &vae, &stats};

    MetaFeatureVector fv;
    fv.da_preds = {0.3, 0.4};
    fv.cnn_preds = {0.1, 0.9};
    fv.iso_scores = {0.5, 0.7};
    const std::vector<double> truth = {0.0, 1.0};

    const auto a = meta_score(fv, drivers, y_hist, truth, {}, ctx, 3);
    const auto b = meta_score(fv, drivers, y_hist, truth, {}, ctx, 3);
    CHECK(a.r_hat == b.r_hat);
    CHECK(a.s_att == b.s_att);
    CHECK(a.e_rec == b.e_rec);
    CHECK(a.i_iso == b.i_iso);
    CHECK(a.fused == b.fused);

    CHECK_THROWS_AS(meta_score(fv, drivers, y_hist, truth, {}, {nullptr, &vae, &stats}),
                    StateError);
    CHECK_THROWS_AS(meta_score(fv, drivers, y_hist, truth, {}, {&da, nullptr, &stats}),
                    StateError);
    CHECK_THROWS_AS(meta_score(fv, drivers, y_hist, truth, {}, {&da, &vae, nullptr}),
                    StateError);

    MetaFeatureVector ragged = fv;
    ragged.cnn_preds.pop_back();
    CHECK_THROWS_AS(meta_score(ragged, drivers, y_hist, truth, {}, ctx), ContractError);
    CHECK_THROWS_AS(meta_score(fv, drivers, y_hist, {0.1}, {}, ctx), ContractError);
    CHECK_THROWS_AS(meta_score({}, drivers, y_hist, {}, {}, ctx), ContractError);
}

TEST_CASE("flag rule fires on baseline exceedance plus a sudden jump") {
    const FlagRule rule{0.5, 0.3};
    CHECK(flag_anomalies({0.1, 0.9}, rule) == std::vector<std::size_t>{1});
    // slow drift above baseline: index 1 exceeds b but rose by only 0.05
    CHECK(flag_anomalies({0.9, 0.95}, rule) == std::vector<std::size_t>{0});
    // the score before the series counts as zero
    CHECK(flag_anomalies({0.6}, rule) == std::vector<std::size_t>{0});
    CHECK(flag_anomalies({0.2}, rule).empty());
    CHECK(flag_anomalies({}, rule).empty());
    // equality on either side does not fire
    CHECK(flag_anomalies({0.5}, FlagRule{0.5, 0.0}).empty());
    CHECK(flag_anomalies({0.0, 0.3}, FlagRule{0.0, 0.3}).empty());
}

TEST_CASE("flag rule matches a direct re-evaluation on random series") {
    Rng rng(51);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 40));
        std::vector<double> scores(n);
        for (auto& s : scores) s = rng.uniform01() * 2.0;
        const FlagRule rule{rng.uniform01(), rng.uniform01() * 0.5};
        const auto flags = flag_anomalies(scores, rule);
        std::vector<std::size_t> expect;
        for (std::size_t i = 0; i < n; ++i) {
            const double jump = scores[i] - (i == 0 ? 0.0 : scores[i - 1]);
            if (scores[i] > rule.baseline && jump > rule.delta_c) expect.push_back(i);
        }
        CHECK(flags == expect);
    }
}

TEST_CASE("flag rule validates thresholds and scores") {
    CHECK_THROWS_AS(flag_anomalies({0.1}, FlagRule{0.5, -0.1}), ConfigError);
    CHECK_THROWS_AS(flag_anomalies({0.1}, FlagRule{std::nan(""), 0.1}), ConfigError);
    CHECK_THROWS_AS(flag_anomalies({std::nan("")}, FlagRule{0.5, 0.1}), ContractError);
}

TEST_CASE("flag sets are invariant under power-of-two rescaling of weights and rule") {
    Rng rng(52);
    for (int trial = 0; trial < 30; ++trial) {
        const FusionWeights w{rng.uniform01(), rng.uniform01(), rng.uniform01(),
                              rng.uniform01() + 0.01};
        const FlagRule rule{rng.uniform01(), rng.uniform01() * 0.3};
        std::vector<ScoreComponents> comps(60);
        for (auto& c : comps) {
            c.r_hat = std::abs(rng.normal());
            c.s_att = rng.uniform01();
            c.e_rec = std::abs(rng.normal());
            c.i_iso = rng.uniform01();
        }
        for (const double k : {0.5, 2.0, 8.0}) {
            const FusionWeights ws{k * w.alpha, k * w.beta, k * w.gamma, k * w.delta_w};
            const FlagRule rs{k * rule.baseline, k * rule.delta_c};
            std::vector<double> a, b;
            for (const auto& c : comps) {
                a.push_back(composite_score(c.r_hat, c.s_att, c.e_rec, c.i_iso, w));
                b.push_back(composite_score(c.r_hat, c.s_att, c.e_rec, c.i_iso, ws));
            }
            CHECK(flag_anomalies(a, rule) == flag_anomalies(b, rs));
        }
    }
}

TEST_CASE("grid search returns the only candidate of a singleton grid") {
    std::vector<ScoreComponents> val(8);
    for (std::size_t i = 0; i < val.size(); ++i) {
        val[i].t = 10 + i;
        val[i].r_hat = (i == 3) ? 2.0 : 0.1;
    }
    const std::vector<PerturbEvent> events = {{13, 13, 1.0}};
    GridSpec grid;
    grid.weight_values = {1.0};
    grid.baseline_values = {0.5};
    grid.change_values = {0.2};
    const auto res = grid_search_weights(val, events, grid, 0);
    CHECK(res.weights.alpha == 1.0);
    CHECK(res.weights.beta == 1.0);
    CHECK(res.weights.gamma == 1.0);
    CHECK(res.weights.delta_w == 1.0);
    CHECK(res.rule.baseline == 0.5);
    CHECK(res.rule.delta_c == 0.2);
    CHECK(res.f1 == 1.0);
}

TEST_CASE("grid search breaks ties toward the lexicographically smallest candidate") {
    // residual and reconstruction columns are identical pulses, the other two
    // are silent, so several weight tuples achieve the same perfect f1
    std::vector<ScoreComponents> val(12);
    for (std::size_t i = 0; i < val.size(); ++i) {
        val[i].t = 100 + i;
        const bool pulse = (i == 4 || i == 9);
        val[i].r_hat = pulse ? 1.0 : 0.0;
        val[i].e_rec = pulse ? 1.0 : 0.0;
    }
    const std::vector<PerturbEvent> events = {{104, 104, 1.0}, {109, 109, 1.0}};
    GridSpec grid;
    grid.weight_values = {0.0, 1.0};
    grid.baseline_values = {0.25, 0.5};
    grid.change_values = {0.25};
    const auto res = grid_search_weights(val, events, grid, 0);
    CHECK(res.f1 == 1.0);
    CHECK(res.weights.alpha == 0.0);
    CHECK(res.weights.beta == 0.0);
    CHECK(res.weights.gamma == 1.0);
    CHECK(res.weights.delta_w == 0.0);
    CHECK(res.rule.baseline == 0.25);
    CHECK(res.rule.delta_c == 0.25);
}

TEST_CASE("grid search agrees with an independent exhaustive enumeration") {
    Rng rng(61);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<ScoreComponents> val(40);
        for (std::size_t i = 0; i < val.size(); ++i) {
            val[i].t = 200 + i;
            val[i].r_hat = std::abs(rng.normal());
            val[i].s_att = rng.uniform01();
            val[i].e_rec = std::abs(rng.normal()) * 0.5;
            val[i].i_iso = rng.uniform01();
        }
        std::vector<PerturbEvent> events;
        std::size_t at = 203 + static_cast<std::size_t>(rng.uniform_int(0, 4));
        while (at < 238) {
            events.push_back({at, at + 1, 1.0});
            at += 7 + static_cast<std::size_t>(rng.uniform_int(0, 5));
        }

        GridSpec grid;
        grid.weight_values = {0.0, 0.5, 1.0};
        grid.baseline_values = {0.2, 0.6, 1.1};
        grid.change_values = {0.0, 0.4};
        const auto res = grid_search_weights(val, events, grid, 1);

        double best_f1 = -1.0;
        FusionWeights best_w;
        FlagRule best_rule;
        for (double alpha : grid.weight_values)
            for (double beta : grid.weight_values)
                for (double gamma : grid.weight_values)
                    for (double delta : grid.weight_values) {
                        if (alpha == 0 && beta == 0 && gamma == 0 && delta == 0) continue;
                        for (double b : grid.baseline_values)
                            for (double dc : grid.change_values) {
                                std::vector<std::size_t> flags;
                                double prev = 0.0;
                                for (const auto& c : val) {
                                    const double s = alpha * c.r_hat + beta * c.s_att +
                                                     gamma * c.e_rec + delta * c.i_iso;
                                    if (s > b && s - prev > dc) flags.push_back(c.t);
                                    prev = s;
                                }
                                const double f1 =
                                    evaluate_detection(flags, events, 1).f1;
                                if (f1 > best_f1) {
                                    best_f1 = f1;
                                    best_w = {alpha, beta, gamma, delta};
                                    best_rule = {b, dc};
                                }
                            }
                    }
        CHECK(res.f1 == best_f1);
        CHECK(res.weights.alpha == best_w.alpha);
        CHECK(res.weights.beta == best_w.beta);
        CHECK(res.weights.gamma == best_w.gamma);
        CHECK(res.weights.delta_w == best_w.delta_w);
        CHECK(res.rule.baseline == best_rule.baseline);
        CHECK(res.rule.delta_c == best_rule.delta_c);
    }
}

TEST_CASE("grid search validates its inputs") {
    std::vector<ScoreComponents> val(3);
    for (std::size_t i = 0; i < val.size(); ++i) val[i].t = i;
    const std::vector<PerturbEvent> events = {{1, 1, 1.0}};
    GridSpec grid;
    grid.baseline_values = {0.5};
    grid.change_values = {0.1};

    GridSpec empty_weights = grid;
    empty_weights.weight_values.clear();
    CHECK_THROWS_AS(grid_search_weights(val, events, empty_weights, 0), ConfigError);
    GridSpec empty_baseline = grid;
    empty_baseline.baseline_values.clear();
    CHECK_THROWS_AS(grid_search_weights(val, events, empty_baseline, 0), ConfigError);
    CHECK_THROWS_AS(grid_search_weights({}, events, grid, 0), DataError);

    auto shuffled = val;
    std::swap(shuffled[0], shuffled[2]);
    CHECK_THROWS_AS(grid_search_weights(shuffled, events, grid, 0), ContractError);

    GridSpec negative = grid;
    negative.weight_values = {-0.5, 1.0};
    CHECK_THROWS_AS(grid_search_weights(val, events, negative, 0), ConfigError);
}

TEST_CASE("what-if with no overrides equals the plain meta projection") {
    Rng rng(71);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 81);
    CnnLstmModel cnn({4, 3, 3, 3, 4}, 82);
    const auto vae = trained_vae(4, 83);
    const Standardizer stats{0.05, 0.8};
    std::vector<double> residuals;
    for (int i = 0; i < 64; ++i) residuals.push_back(std::abs(rng.normal()));
    const auto forest = iforest_fit(residuals, {20, 16, 0.1}, 84);
    const FusionWeights w{0.4, 0.2, 0.2, 0.2};
    const FlagRule rule{0.6, 0.1};

    const auto res = whatif_evaluate(drivers, y_hist, {}, 4, w, rule, da, cnn, vae,
                                     forest, stats);

    MetaFeatureVector fv;
    fv.da_preds = rollout_forecast(da, drivers, y_hist, 4);
    fv.cnn_preds = rollout_forecast(cnn, drivers, y_hist, 4);
    for (std::size_t h = 0; h < 4; ++h)
        fv.iso_scores.push_back(
            forest.score(stats.transform(std::abs(fv.da_preds[h] - fv.cnn_preds[h]))));
    const MetaContext ctx{&da, &vae, &stats};
    const auto expect = meta_score(fv, drivers, y_hist, {}, w, ctx);

    CHECK(res.projection.r_hat == expect.r_hat);
    CHECK(res.projection.s_att == expect.s_att);
    CHECK(res.projection.e_rec == expect.e_rec);
    CHECK(res.projection.i_iso == expect.i_iso);
    CHECK(res.projection.fused == expect.fused);
    CHECK(res.rejected == (expect.fused > rule.baseline));
}

TEST_CASE("agreeing forecasters make the what-if disagreement residual exactly zero") {
    Rng rng(72);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    const auto da = constant_darnn(4, 2, 0.4, 85);
    const auto cnn = constant_cnn(4, 3, 0.4, 86);
    const auto vae = trained_vae(4, 87);
    const Standardizer stats{0.0, 1.0};
    std::vector<double> residuals;
    for (int i = 0; i < 64; ++i) residuals.push_back(std::abs(rng.normal()));
    const auto forest = iforest_fit(residuals, {20, 16, 0.1}, 88);

    const auto res = whatif_evaluate(drivers, y_hist, {{0, 3.0}}, 5, {1, 0, 0, 0},
                                     {10.0, 0.0}, da, cnn, vae, forest, stats);
    CHECK(res.projection.r_hat == 0.0);
    CHECK(res.projection.fused == 0.0);
    CHECK_FALSE(res.rejected);
}

TEST_CASE("the rejection verdict follows the rule baseline") {
    Rng rng(73);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 89);
    CnnLstmModel cnn({4, 3, 3, 3, 4}, 90);
    const auto vae = trained_vae(4, 91);
    const Standardizer stats{0.0, 0.5};
    std::vector<double> residuals;
    for (int i = 0; i < 64; ++i) residuals.push_back(std::abs(rng.normal()));
    const auto forest = iforest_fit(residuals, {20, 16, 0.1}, 92);
    const FusionWeights w{};

    const auto probe = whatif_evaluate(drivers, y_hist, {}, 3, w, {1e9, 0.0}, da, cnn,
                                       vae, forest, stats);
    CHECK_FALSE(probe.rejected);
    const double fused = probe.projection.fused;

    const auto low = whatif_evaluate(drivers, y_hist, {}, 3, w,
                                     {std::nextafter(fused, -1.0), 0.0}, da, cnn, vae,
                                     forest, stats);
    CHECK(low.rejected);
    const auto high = whatif_evaluate(drivers, y_hist, {}, 3, w, {fused, 0.0}, da, cnn,
                                      vae, forest, stats);
    CHECK_FALSE(high.rejected);
}

TEST_CASE("driver overrides reach the projection through the rollout") {
    Rng rng(74);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);
    DarnnModel da({4, 2, 3, 3}, 93);
    CnnLstmModel cnn({4, 3, 3, 3, 4}, 94);

    const auto null_da = rollout_forecast(da, drivers, y_hist, 4);
    const auto push_da = rollout_forecast(da, drivers, y_hist, 4, {{0, 5.0}});
    CHECK(null_da[0] == push_da[0]); // the first step sees only observed data
    CHECK(null_da.back() != push_da.back());

    const auto null_cnn = rollout_forecast(cnn, drivers, y_hist, 4);
    const auto push_cnn = rollout_forecast(cnn, drivers, y_hist, 4, {{0, 5.0}});
    CHECK(null_cnn[0] == push_cnn[0]);
    CHECK(null_cnn.back() != push_cnn.back());
}
