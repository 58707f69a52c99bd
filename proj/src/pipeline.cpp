#include "anocast/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace anocast {

namespace {

using nlohmann::ordered_json;

ExperimentConfig default_config() { return {}; }

ordered_json parse_json_text(const std::string& text) {
    try {
        return ordered_json::parse(text);
    } catch (const ordered_json::exception& e) {
        throw ParseError(std::string("invalid json: ") + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

void check_keys(const ordered_json& j, const char* where,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ParseError(std::string(where) + " must be a json object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) known = true;
        if (!known) throw ParseError(std::string("unknown key in ") + where + ": " + item.key());
    }
}

double get_num(const ordered_json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ParseError(std::string(key) + " must be a number");
    return j.at(key).get<double>();
}

std::size_t get_size(const ordered_json& j, const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_unsigned())
        throw ParseError(std::string(key) + " must be a nonnegative integer");
    return j.at(key).get<std::size_t>();
}

SimConfig parse_sim(const ordered_json& j, SimConfig base) {
    check_keys(j, "sim config",
               {"p_coeff", "p_sat", "t_coeff", "v_amp", "tau", "w_width", "alpha_relax",
                "p0", "t_ramp", "t_end", "dt", "t_sat", "aux_gain", "aux_rate",
                "grad_threshold", "pert_amp_range", "pert_len_range", "pert_prob", "seed"});
    base.p_coeff = get_num(j, "p_coeff", base.p_coeff);
    base.p_sat = get_num(j, "p_sat", base.p_sat);
    base.t_coeff = get_num(j, "t_coeff", base.t_coeff);
    base.v_amp = get_num(j, "v_amp", base.v_amp);
    base.tau = get_num(j, "tau", base.tau);
    base.w_width = get_num(j, "w_width", base.w_width);
    base.alpha_relax = get_num(j, "alpha_relax", base.alpha_relax);
    base.p0 = get_num(j, "p0", base.p0);
    base.t_ramp = get_num(j, "t_ramp", base.t_ramp);
    base.t_end = get_num(j, "t_end", base.t_end);
    base.dt = get_num(j, "dt", base.dt);
    base.t_sat = get_num(j, "t_sat", base.t_sat);
    base.aux_gain = get_num(j, "aux_gain", base.aux_gain);
    base.aux_rate = get_num(j, "aux_rate", base.aux_rate);
    base.grad_threshold = get_num(j, "grad_threshold", base.grad_threshold);
    base.pert_prob = get_num(j, "pert_prob", base.pert_prob);
    base.seed = get_size(j, "seed", base.seed);
    if (j.contains("pert_amp_range")) {
        const auto& a = j.at("pert_amp_range");
        if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
            throw ParseError("pert_amp_range must be [lo, hi]");
        base.pert_amp_range = {a[0].get<double>(), a[1].get<double>()};
    }
    if (j.contains("pert_len_range")) {
        const auto& a = j.at("pert_len_range");
        if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() ||
            !a[1].is_number_integer())
            throw ParseError("pert_len_range must be [lo, hi] integers");
        base.pert_len_range = {a[0].get<int>(), a[1].get<int>()};
    }
    return base;
}

std::string format_csv_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw StageError(std::string(name) + ": " + e.what());
    }
}

} // namespace

ExperimentConfig::ExperimentConfig() {
    // 2000-step default series: short enough to train all components in
    // seconds while keeping both phases and a usable event count
    sim.dt = 0.1;
    sim.t_end = 199.9;
}

void ExperimentConfig::validate() const {
    sim.validate();
    if (window < 2) throw ConfigError("window must be at least 2");
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (epochs < 1 || batch < 1) throw ConfigError("epochs and batch must be positive");
    if (enc_hidden < 1 || dec_hidden < 1 || cnn_hidden < 1 || vae_hidden < 1 || latent < 1 ||
        filters < 1)
        throw ConfigError("hidden sizes must be positive");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd");
    if (n_trees < 1 || subsample < 2) throw ConfigError("forest sizes too small");
    if (!(contamination > 0.0) || !(contamination < 0.5))
        throw ConfigError("contamination must be in (0, 0.5)");
    if (tolerance < 0) throw ConfigError("tolerance must be nonnegative");
    if (!(split.train > 0.0) || !(split.val > 0.0) || split.train + split.val >= 1.0)
        throw ConfigError("split fractions must be positive and leave a test range");
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    const auto j = parse_json_text(text);
    check_keys(j, "experiment config",
               {"sim", "split", "window", "horizon", "epochs", "batch", "enc_hidden",
                "dec_hidden", "kernel", "filters", "cnn_hidden", "vae_hidden", "latent",
                "n_trees", "subsample", "contamination", "tolerance"});
    ExperimentConfig cfg = default_config();
    if (j.contains("sim")) cfg.sim = parse_sim(j.at("sim"), cfg.sim);
    if (j.contains("split")) {
        const auto& s = j.at("split");
        check_keys(s, "split", {"train", "val"});
        cfg.split.train = get_num(s, "train", cfg.split.train);
        cfg.split.val = get_num(s, "val", cfg.split.val);
    }
    cfg.window = get_size(j, "window", cfg.window);
    cfg.horizon = get_size(j, "horizon", cfg.horizon);
    cfg.epochs = get_size(j, "epochs", cfg.epochs);
    cfg.batch = get_size(j, "batch", cfg.batch);
    cfg.enc_hidden = get_size(j, "enc_hidden", cfg.enc_hidden);
    cfg.dec_hidden = get_size(j, "dec_hidden", cfg.dec_hidden);
    cfg.kernel = get_size(j, "kernel", cfg.kernel);
    cfg.filters = get_size(j, "filters", cfg.filters);
    cfg.cnn_hidden = get_size(j, "cnn_hidden", cfg.cnn_hidden);
    cfg.vae_hidden = get_size(j, "vae_hidden", cfg.vae_hidden);
    cfg.latent = get_size(j, "latent", cfg.latent);
    cfg.n_trees = get_size(j, "n_trees", cfg.n_trees);
    cfg.subsample = get_size(j, "subsample", cfg.subsample);
    cfg.contamination = get_num(j, "contamination", cfg.contamination);
    const double tol = get_num(j, "tolerance", static_cast<double>(cfg.tolerance));
    cfg.tolerance = static_cast<long>(tol);
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    auto cfg = experiment_config_from_json(read_file(path));
    cfg.validate();
    return cfg;
}

SimConfig sim_config_from_json(const std::string& text) {
    auto cfg = parse_sim(parse_json_text(text), SimConfig{});
    cfg.validate();
    return cfg;
}

std::vector<ScoredWindow> score_range(const Dataset& ds, SplitRange range,
                                      std::size_t window, std::size_t horizon,
                                      const DarnnModel& darnn, const CnnLstmModel& cnn,
                                      const VaeModel& vae,
                                      const IsolationForestModel& forest,
                                      const Standardizer& residual_stats,
                                      const FusionWeights& weights) {
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    const auto ws = make_windows(ds, window, range);
    const MetaContext ctx{&darnn, &vae, &residual_stats};
    std::vector<ScoredWindow> out;
    for (const auto& item : ws.items) {
        if (item.t + horizon > range.end - 1) continue; // needs H future values
        MetaFeatureVector fv;
        fv.da_preds = rollout_forecast(darnn, item.drivers, item.y_hist, horizon);
        fv.cnn_preds = rollout_forecast(cnn, item.drivers, item.y_hist, horizon);
        std::vector<double> truth(horizon);
        for (std::size_t h = 0; h < horizon; ++h)
            truth[h] = ds.std_target(item.t + 1 + h);
        fv.iso_scores.reserve(horizon);
        for (std::size_t h = 0; h < horizon; ++h)
            fv.iso_scores.push_back(forest.score(
                residual_stats.transform(std::abs(truth[h] - fv.da_preds[h]))));

        ScoredWindow sw;
        sw.comps = meta_score(fv, item.drivers, item.y_hist, truth, weights, ctx, item.t);
        sw.truth1 = truth[0];
        sw.da1 = fv.da_preds[0];
        sw.cnn1 = fv.cnn_preds[0];
        auto fw = darnn.forward(item.drivers, item.y_hist);
        sw.temporal_attention = std::move(fw.temporal_attention.data);
        sw.input_attention = std::move(fw.input_attention);
        out.push_back(std::move(sw));
    }
    if (out.empty()) throw DataError("range too short to score any window");
    return out;
}

std::vector<PerturbEvent> events_in_span(const std::vector<PerturbEvent>& events,
                                         std::size_t first, std::size_t last) {
    std::vector<PerturbEvent> out;
    for (const auto& e : events)
        if (e.end >= first && e.start <= last) out.push_back(e);
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of empty sample");
    if (!(q >= 0.0) || !(q <= 1.0)) throw ConfigError("quantile level must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(values.size())));
    const std::size_t k = std::min(values.size() - 1, rank == 0 ? 0 : rank - 1);
    return values[k];
}

GridSpec derive_grid(const std::vector<ScoreComponents>& validation) {
    if (validation.empty()) throw DataError("no validation components");
    std::vector<std::vector<double>> cols(4);
    for (const auto& c : validation) {
        cols[0].push_back(c.r_hat);
        cols[1].push_back(c.s_att);
        cols[2].push_back(c.e_rec);
        cols[3].push_back(c.i_iso);
    }
    // Upper-tail quantiles only: sub-median baselines are hair triggers that
    // fit validation noise. Each quantile is also scaled by every nonzero
    // weight value so a down-weighted copy of a single component sees the
    // same thresholds, aligned to its scale, as the unit-weight tuple.
    GridSpec g;
    std::vector<double> bases;
    std::vector<double> changes = {0.0};
    for (const auto& col : cols) {
        for (double q : {0.9, 0.95, 0.99, 1.0}) {
            const double base = quantile(col, q);
            for (double w : g.weight_values)
                if (w > 0.0) bases.push_back(w * base);
        }
        std::vector<double> rises;
        double prev = 0.0;
        for (double v : col) {
            if (v - prev > 0.0) rises.push_back(v - prev);
            prev = v;
        }
        if (!rises.empty())
            for (double q : {0.9, 0.99}) {
                const double change = quantile(rises, q);
                for (double w : g.weight_values)
                    if (w > 0.0) changes.push_back(w * change);
            }
    }
    auto tidy = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    tidy(bases);
    tidy(changes);
    g.baseline_values = std::move(bases);
    g.change_values = std::move(changes);
    return g;
}

GridSearchResult grid_search_rule(const std::vector<ScoreComponents>& validation,
                                  const std::vector<PerturbEvent>& events,
                                  const FusionWeights& weights,
                                  const std::vector<double>& baseline_values,
                                  const std::vector<double>& change_values,
                                  long tolerance) {
    weights.validate();
    if (baseline_values.empty() || change_values.empty())
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
    const auto bv = ascending(baseline_values);
    const auto cv = ascending(change_values);

    std::vector<double> scores(validation.size());
    for (std::size_t i = 0; i < validation.size(); ++i)
        scores[i] = composite_score(validation[i].r_hat, validation[i].s_att,
                                    validation[i].e_rec, validation[i].i_iso, weights);

    GridSearchResult best;
    best.weights = weights;
    best.f1 = -1.0;
    std::vector<std::size_t> flags;
    for (double b : bv)
        for (double dc : cv) {
            const auto pos = flag_anomalies(scores, {b, dc});
            flags.clear();
            for (std::size_t p : pos) flags.push_back(validation[p].t);
            const double f1 = evaluate_detection(flags, events, tolerance).f1;
            if (f1 > best.f1) {
                best.rule = {b, dc};
                best.f1 = f1;
            }
        }
    return best;
}

std::string anomaly_report_json(const std::vector<ScoredWindow>& scored,
                                const std::vector<std::size_t>& flags,
                                const FusionWeights& weights, const FlagRule& rule) {
    ordered_json scores = ordered_json::array();
    ordered_json comps = ordered_json::array();
    for (const auto& sw : scored) {
        scores.push_back(sw.comps.fused);
        comps.push_back(ordered_json{{"t", sw.comps.t},
                                     {"r_hat", sw.comps.r_hat},
                                     {"s_att", sw.comps.s_att},
                                     {"e_rec", sw.comps.e_rec},
                                     {"i_iso", sw.comps.i_iso},
                                     {"fused", sw.comps.fused}});
    }
    ordered_json j;
    j["flags"] = flags;
    j["scores"] = std::move(scores);
    j["components"] = std::move(comps);
    j["weights"] = ordered_json{{"alpha", weights.alpha},
                                {"beta", weights.beta},
                                {"gamma", weights.gamma},
                                {"delta_w", weights.delta_w}};
    j["rule"] = ordered_json{{"b", rule.baseline}, {"delta_c", rule.delta_c}};
    return j.dump(2) + "\n";
}

ExperimentSummary run_experiment(const ExperimentConfig& base, const std::string& out_dir,
                                 std::uint64_t seed) {
    ExperimentConfig cfg = base;
    cfg.validate();
    cfg.sim.seed = seed;

    namespace fs = std::filesystem;
    const fs::path out(out_dir);
    fs::create_directories(out / "models");
    fs::create_directories(out / "plots");

    const auto traj = stage("simulate", [&] { return simulate(cfg.sim); });
    const auto ds = stage("dataset", [&] { return make_dataset(traj, cfg.split); });
    stage("write-data", [&] {
        write_trajectory_csv((out / "data.csv").string(), traj);
        write_truth_json((out / "truth.json").string(), traj.perturbation_log);
        return 0;
    });

    const auto train_set =
        stage("windows", [&] { return make_windows(ds, cfg.window, ds.train); });

    DarnnModel darnn({cfg.window, ds.driver_dim(), cfg.enc_hidden, cfg.dec_hidden},
                     Rng::derive(seed, 0x10));
    const auto darnn_hist = stage("train-darnn", [&] {
        return darnn.train(train_set, cfg.epochs, cfg.batch, Rng::derive(seed, 0x11));
    });

    CnnLstmModel cnn({cfg.window, ds.driver_dim() + 1, cfg.kernel, cfg.filters,
                      cfg.cnn_hidden},
                     Rng::derive(seed, 0x20));
    const auto cnn_hist = stage("train-cnnlstm", [&] {
        return cnn.train(train_set, cfg.epochs, cfg.batch, Rng::derive(seed, 0x21));
    });

    VaeModel vae({cfg.window, cfg.vae_hidden, cfg.latent}, Rng::derive(seed, 0x30));
    const auto vae_stats = stage("train-vae", [&] {
        std::vector<Tensor> windows;
        windows.reserve(train_set.items.size());
        for (const auto& item : train_set.items) windows.push_back(item.y_hist);
        return vae.train(windows, cfg.epochs, cfg.batch, Rng::derive(seed, 0x31));
    });

    Standardizer scaler;
    IsolationForestModel forest;
    stage("train-iforest", [&] {
        std::vector<double> res;
        res.reserve(train_set.items.size());
        for (const auto& item : train_set.items)
            res.push_back(std::abs(
                item.label - darnn.forward(item.drivers, item.y_hist).prediction->value.data[0]));
        scaler = fit_standardizer(res);
        std::vector<double> std_res;
        std_res.reserve(res.size());
        for (double r : res) std_res.push_back(scaler.transform(r));
        forest = iforest_fit(std_res, {cfg.n_trees, cfg.subsample, cfg.contamination},
                             Rng::derive(seed, 0x40));
        return 0;
    });

    const auto val_scored = stage("score-validation", [&] {
        return score_range(ds, ds.val, cfg.window, cfg.horizon, darnn, cnn, vae, forest,
                           scaler, FusionWeights{});
    });
    std::vector<ScoreComponents> val_comps;
    val_comps.reserve(val_scored.size());
    for (const auto& sw : val_scored) val_comps.push_back(sw.comps);
    const auto val_events = events_in_span(traj.perturbation_log, val_comps.front().t,
                                           val_comps.back().t);

    const auto grid = derive_grid(val_comps);
    const auto picked = stage("grid-search", [&] {
        return grid_search_weights(val_comps, val_events, grid, cfg.tolerance);
    });

    const std::vector<std::pair<std::string, FusionWeights>> singles = {
        {"residual", {1, 0, 0, 0}},
        {"attention", {0, 1, 0, 0}},
        {"reconstruction", {0, 0, 1, 0}},
        {"isolation", {0, 0, 0, 1}}};
    std::vector<StandaloneResult> standalone;
    for (const auto& [name, w] : singles) {
        const auto r = grid_search_rule(val_comps, val_events, w, grid.baseline_values,
                                        grid.change_values, cfg.tolerance);
        standalone.push_back({name, r.rule, r.f1, 0.0});
    }

    // ensemble forecast mix picked by validation one-step error
    double lambda = 0.0;
    double best_mae = std::numeric_limits<double>::infinity();
    for (const double cand : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        double mae = 0.0;
        for (const auto& sw : val_scored)
            mae += std::abs(sw.truth1 - (cand * sw.da1 + (1.0 - cand) * sw.cnn1));
        mae /= static_cast<double>(val_scored.size());
        if (mae < best_mae) {
            best_mae = mae;
            lambda = cand;
        }
    }

    const auto test_scored = stage("score-test", [&] {
        return score_range(ds, ds.test, cfg.window, cfg.horizon, darnn, cnn, vae, forest,
                           scaler, picked.weights);
    });
    std::vector<ScoreComponents> test_comps;
    std::vector<double> fused_series;
    for (const auto& sw : test_scored) {
        test_comps.push_back(sw.comps);
        fused_series.push_back(sw.comps.fused);
    }
    const auto flag_pos = flag_anomalies(fused_series, picked.rule);
    std::vector<std::size_t> flags;
    flags.reserve(flag_pos.size());
    for (std::size_t p : flag_pos) flags.push_back(test_comps[p].t);
    const auto test_events = events_in_span(traj.perturbation_log, test_comps.front().t,
                                            test_comps.back().t);
    const auto test_report = evaluate_detection(flags, test_events, cfg.tolerance);

    for (auto& sr : standalone) {
        FusionWeights w{sr.name == "residual" ? 1.0 : 0.0,
                        sr.name == "attention" ? 1.0 : 0.0,
                        sr.name == "reconstruction" ? 1.0 : 0.0,
                        sr.name == "isolation" ? 1.0 : 0.0};
        std::vector<double> series;
        series.reserve(test_comps.size());
        for (const auto& c : test_comps)
            series.push_back(composite_score(c.r_hat, c.s_att, c.e_rec, c.i_iso, w));
        const auto pos = flag_anomalies(series, sr.rule);
        std::vector<std::size_t> abs_flags;
        for (std::size_t p : pos) abs_flags.push_back(test_comps[p].t);
        sr.test_f1 = evaluate_detection(abs_flags, test_events, cfg.tolerance).f1;
    }

    double mae_ens = 0.0, mae_da = 0.0, mae_cnn = 0.0;
    for (const auto& sw : test_scored) {
        const double truth = ds.denorm_target(sw.truth1);
        mae_ens += std::abs(truth - ds.denorm_target(lambda * sw.da1 +
                                                     (1.0 - lambda) * sw.cnn1));
        mae_da += std::abs(truth - ds.denorm_target(sw.da1));
        mae_cnn += std::abs(truth - ds.denorm_target(sw.cnn1));
    }
    const double n_test = static_cast<double>(test_scored.size());
    mae_ens /= n_test;
    mae_da /= n_test;
    mae_cnn /= n_test;

    stage("write-artifacts", [&] {
        darnn.save((out / "models" / "darnn.json").string());
        cnn.save((out / "models" / "cnnlstm.json").string());
        vae.save((out / "models" / "vae.json").string());
        save_iforest((out / "models" / "iforest.json").string(), scaler, forest);

        ordered_json stats;
        stats["schema"] = "anocast-stats-v1";
        stats["window"] = cfg.window;
        stats["horizon"] = cfg.horizon;
        stats["target"] = ordered_json{{"mean", ds.target_stats.mean},
                                       {"std", ds.target_stats.std}};
        ordered_json dr = ordered_json::array();
        for (std::size_t k = 0; k < ds.driver_dim(); ++k)
            dr.push_back(ordered_json{{"name", ds.driver_names[k]},
                                      {"mean", ds.driver_stats[k].mean},
                                      {"std", ds.driver_stats[k].std}});
        stats["drivers"] = std::move(dr);
        write_file((out / "models" / "stats.json").string(), stats.dump(2) + "\n");

        ordered_json fusion;
        fusion["schema"] = "anocast-fusion-v1";
        fusion["weights"] = ordered_json{{"alpha", picked.weights.alpha},
                                         {"beta", picked.weights.beta},
                                         {"gamma", picked.weights.gamma},
                                         {"delta_w", picked.weights.delta_w}};
        fusion["rule"] = ordered_json{{"b", picked.rule.baseline},
                                      {"delta_c", picked.rule.delta_c}};
        fusion["lambda"] = lambda;
        write_file((out / "models" / "fusion.json").string(), fusion.dump(2) + "\n");

        write_file((out / "report.json").string(),
                   anomaly_report_json(test_scored, flags, picked.weights, picked.rule));

        ordered_json metrics;
        metrics["tolerance"] = cfg.tolerance;
        metrics["validation"] = ordered_json{
            {"f1", picked.f1},
            {"events", val_events.size()},
            {"weights", ordered_json{{"alpha", picked.weights.alpha},
                                     {"beta", picked.weights.beta},
                                     {"gamma", picked.weights.gamma},
                                     {"delta_w", picked.weights.delta_w}}},
            {"rule",
             ordered_json{{"b", picked.rule.baseline}, {"delta_c", picked.rule.delta_c}}}};
        metrics["test"] = ordered_json{{"precision", test_report.precision},
                                       {"recall", test_report.recall},
                                       {"f1", test_report.f1},
                                       {"events", test_events.size()},
                                       {"flags", flags.size()}};
        ordered_json st = ordered_json::object();
        for (const auto& sr : standalone)
            st[sr.name] = ordered_json{
                {"val_f1", sr.val_f1},
                {"test_f1", sr.test_f1},
                {"rule",
                 ordered_json{{"b", sr.rule.baseline}, {"delta_c", sr.rule.delta_c}}}};
        metrics["standalone"] = std::move(st);
        metrics["forecast"] = ordered_json{{"lambda", lambda},
                                           {"mae_ensemble", mae_ens},
                                           {"mae_darnn", mae_da},
                                           {"mae_cnnlstm", mae_cnn}};
        write_file((out / "metrics.json").string(), metrics.dump(2) + "\n");

        std::ostringstream losses;
        losses << "epoch,darnn,cnnlstm,vae\n";
        for (std::size_t e = 0; e < cfg.epochs; ++e)
            losses << e << ',' << format_csv_double(darnn_hist[e]) << ','
                   << format_csv_double(cnn_hist[e]) << ','
                   << format_csv_double(vae_stats.history[e]) << '\n';
        write_file((out / "losses.csv").string(), losses.str());

        std::ostringstream score_csv;
        score_csv << "t,r_hat,s_att,e_rec,i_iso,fused,flag\n";
        std::size_t fi = 0;
        for (const auto& sw : test_scored) {
            const bool flagged = fi < flags.size() && flags[fi] == sw.comps.t;
            if (flagged) ++fi;
            score_csv << sw.comps.t << ',' << format_csv_double(sw.comps.r_hat) << ','
                      << format_csv_double(sw.comps.s_att) << ','
                      << format_csv_double(sw.comps.e_rec) << ','
                      << format_csv_double(sw.comps.i_iso) << ','
                      << format_csv_double(sw.comps.fused) << ',' << (flagged ? 1 : 0)
                      << '\n';
        }
        write_file((out / "plots" / "score_series.csv").string(), score_csv.str());

        std::ostringstream resid_csv;
        resid_csv << "t,truth,darnn,cnnlstm,ensemble,abs_error\n";
        for (const auto& sw : test_scored) {
            const double truth = ds.denorm_target(sw.truth1);
            const double da = ds.denorm_target(sw.da1);
            const double cn = ds.denorm_target(sw.cnn1);
            const double ens =
                ds.denorm_target(lambda * sw.da1 + (1.0 - lambda) * sw.cnn1);
            resid_csv << sw.comps.t << ',' << format_csv_double(truth) << ','
                      << format_csv_double(da) << ',' << format_csv_double(cn) << ','
                      << format_csv_double(ens) << ','
                      << format_csv_double(std::abs(truth - ens)) << '\n';
        }
        write_file((out / "plots" / "residual_series.csv").string(), resid_csv.str());

        std::ostringstream temporal_csv;
        temporal_csv << "t";
        for (std::size_t k = 0; k < cfg.window; ++k) temporal_csv << ",w" << k;
        temporal_csv << '\n';
        for (const auto& sw : test_scored) {
            temporal_csv << sw.comps.t;
            for (double v : sw.temporal_attention) temporal_csv << ',' << format_csv_double(v);
            temporal_csv << '\n';
        }
        write_file((out / "plots" / "attention_temporal.csv").string(), temporal_csv.str());

        std::ostringstream input_csv;
        input_csv << "t";
        for (std::size_t r = 0; r < cfg.window; ++r)
            for (std::size_t c = 0; c < ds.driver_dim(); ++c)
                input_csv << ",s" << r << "_d" << c;
        input_csv << '\n';
        for (const auto& sw : test_scored) {
            input_csv << sw.comps.t;
            for (double v : sw.input_attention.data) input_csv << ',' << format_csv_double(v);
            input_csv << '\n';
        }
        write_file((out / "plots" / "attention_input.csv").string(), input_csv.str());
        return 0;
    });

    ExperimentSummary summary;
    summary.weights = picked.weights;
    summary.rule = picked.rule;
    summary.val_f1 = picked.f1;
    summary.test_report = test_report;
    summary.standalone = std::move(standalone);
    summary.lambda = lambda;
    summary.mae_ensemble = mae_ens;
    summary.mae_darnn = mae_da;
    summary.mae_cnnlstm = mae_cnn;
    return summary;
}

} // namespace anocast
