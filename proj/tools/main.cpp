#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "anocast/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace anocast;

namespace {

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

ordered_json parse_json_file(const std::string& path) {
    try {
        return ordered_json::parse(read_file(path));
    } catch (const ordered_json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

struct ModelBundle {
    DarnnModel darnn;
    CnnLstmModel cnn;
    VaeModel vae;
    Standardizer scaler;
    IsolationForestModel forest;
    std::size_t window = 0;
    ChannelStats target_stats;
    std::vector<std::string> driver_names;
    std::vector<ChannelStats> driver_stats;
};

ModelBundle load_models(const std::string& dir) {
    const fs::path p(dir);
    ModelBundle b{DarnnModel::load((p / "darnn.json").string()),
                  CnnLstmModel::load((p / "cnnlstm.json").string()),
                  VaeModel::load((p / "vae.json").string()),
                  {},
                  {},
                  0,
                  {},
                  {},
                  {}};
    auto iso = load_iforest((p / "iforest.json").string());
    b.scaler = iso.first;
    b.forest = std::move(iso.second);

    const auto stats = parse_json_file((p / "stats.json").string());
    if (stats.value("schema", "") != "anocast-stats-v1")
        throw ParseError("stats.json: unknown schema");
    b.window = stats.at("window").get<std::size_t>();
    b.target_stats = {stats.at("target").at("mean").get<double>(),
                      stats.at("target").at("std").get<double>()};
    for (const auto& d : stats.at("drivers")) {
        b.driver_names.push_back(d.at("name").get<std::string>());
        b.driver_stats.push_back(
            {d.at("mean").get<double>(), d.at("std").get<double>()});
    }

    if (b.darnn.config().window != b.window || b.cnn.config().window != b.window ||
        b.vae.config().window != b.window)
        throw DataError("model windows disagree with stats.json");
    if (b.darnn.config().driver_dim != b.driver_names.size())
        throw DataError("driver count disagrees between models and stats.json");
    return b;
}

// the models consume values standardized with their training statistics,
// not with whatever the new file's train split would give
void apply_stats(Dataset& ds, const ModelBundle& b) {
    if (ds.driver_names != b.driver_names)
        throw DataError("csv driver channels do not match the trained models");
    ds.target_stats = b.target_stats;
    ds.driver_stats = b.driver_stats;
}

std::pair<FusionWeights, FlagRule> load_fusion(const std::string& dir) {
    const fs::path path = fs::path(dir) / "fusion.json";
    if (!fs::exists(path))
        throw ConfigError("no fusion.json in " + dir +
                          "; run the full experiment or pass explicit weights");
    const auto j = parse_json_file(path.string());
    const auto& w = j.at("weights");
    const auto& r = j.at("rule");
    FusionWeights weights{w.at("alpha").get<double>(), w.at("beta").get<double>(),
                          w.at("gamma").get<double>(), w.at("delta_w").get<double>()};
    FlagRule rule{r.at("b").get<double>(), r.at("delta_c").get<double>()};
    weights.validate();
    rule.validate();
    return {weights, rule};
}

ordered_json components_json(const ScoreComponents& c) {
    return ordered_json{{"t", c.t},         {"r_hat", c.r_hat}, {"s_att", c.s_att},
                        {"e_rec", c.e_rec}, {"i_iso", c.i_iso}, {"fused", c.fused}};
}

int cmd_simulate(const std::string& config, const std::string& out, std::uint64_t seed) {
    auto cfg = sim_config_from_json(read_file(config));
    cfg.seed = seed;
    const auto traj = simulate(cfg);
    write_trajectory_csv(out, traj);
    fs::path truth(out);
    truth.replace_extension(".truth.json");
    write_truth_json(truth.string(), traj.perturbation_log);
    std::cout << "wrote " << traj.size() << " steps to " << out << " ("
              << traj.perturbation_log.size() << " perturbations, truth in "
              << truth.string() << ")\n";
    return 0;
}

int cmd_train(const std::string& data, std::size_t window, std::size_t epochs,
              std::size_t batch, const std::string& out, std::uint64_t seed) {
    const auto ds = load_csv(data);
    const auto train_set = make_windows(ds, window, ds.train);
    fs::create_directories(out);
    const fs::path dir(out);

    DarnnModel darnn({window, ds.driver_dim(), 32, 32}, Rng::derive(seed, 0x10));
    const auto da_hist = darnn.train(train_set, epochs, batch, Rng::derive(seed, 0x11));
    darnn.save((dir / "darnn.json").string());

    CnnLstmModel cnn({window, ds.driver_dim() + 1, 3, 16, 32}, Rng::derive(seed, 0x20));
    const auto cnn_hist = cnn.train(train_set, epochs, batch, Rng::derive(seed, 0x21));
    cnn.save((dir / "cnnlstm.json").string());

    VaeModel vae({window, 32, 4}, Rng::derive(seed, 0x30));
    std::vector<Tensor> vwindows;
    for (const auto& item : train_set.items) vwindows.push_back(item.y_hist);
    const auto vae_stats = vae.train(vwindows, epochs, batch, Rng::derive(seed, 0x31));
    vae.save((dir / "vae.json").string());

    std::vector<double> res;
    for (const auto& item : train_set.items)
        res.push_back(std::abs(item.label -
                               darnn.forward(item.drivers, item.y_hist).prediction->value.data[0]));
    const auto scaler = fit_standardizer(res);
    std::vector<double> std_res;
    for (double r : res) std_res.push_back(scaler.transform(r));
    const auto forest = iforest_fit(std_res, IforestConfig{}, Rng::derive(seed, 0x40));
    save_iforest((dir / "iforest.json").string(), scaler, forest);

    ordered_json stats;
    stats["schema"] = "anocast-stats-v1";
    stats["window"] = window;
    stats["horizon"] = 5;
    stats["target"] =
        ordered_json{{"mean", ds.target_stats.mean}, {"std", ds.target_stats.std}};
    ordered_json dr = ordered_json::array();
    for (std::size_t k = 0; k < ds.driver_dim(); ++k)
        dr.push_back(ordered_json{{"name", ds.driver_names[k]},
                                  {"mean", ds.driver_stats[k].mean},
                                  {"std", ds.driver_stats[k].std}});
    stats["drivers"] = std::move(dr);
    write_file((dir / "stats.json").string(), stats.dump(2) + "\n");

    std::cout << "trained on " << train_set.items.size() << " windows; final losses: darnn "
              << da_hist.back() << ", cnnlstm " << cnn_hist.back() << ", vae "
              << vae_stats.history.back() << "; models in " << out << "\n";
    return 0;
}

int cmd_detect(const std::string& data, const std::string& models,
               const std::string& weights_arg, double baseline, bool baseline_set,
               double delta_c, bool delta_set, std::size_t horizon,
               const std::string& out) {
    const auto bundle = load_models(models);
    auto ds = load_csv(data);
    apply_stats(ds, bundle);

    FusionWeights weights;
    FlagRule rule{std::nan(""), std::nan("")};
    if (weights_arg == "auto") {
        auto picked = load_fusion(models);
        weights = picked.first;
        rule = picked.second;
    } else {
        const auto j = parse_json_file(weights_arg);
        const auto& w = j.contains("weights") ? j.at("weights") : j;
        weights = {w.at("alpha").get<double>(), w.at("beta").get<double>(),
                   w.at("gamma").get<double>(), w.at("delta_w").get<double>()};
        if (j.contains("rule"))
            rule = {j.at("rule").at("b").get<double>(),
                    j.at("rule").at("delta_c").get<double>()};
    }
    if (baseline_set) rule.baseline = baseline;
    if (delta_set) rule.delta_c = delta_c;
    if (std::isnan(rule.baseline) || std::isnan(rule.delta_c))
        throw ConfigError("no flag rule: pass --baseline and --delta-c, a weights file "
                          "with a rule block, or --weights auto");
    weights.validate();
    rule.validate();

    const auto scored =
        score_range(ds, SplitRange{0, ds.size()}, bundle.window, horizon, bundle.darnn,
                    bundle.cnn, bundle.vae, bundle.forest, bundle.scaler, weights);
    std::vector<double> fused;
    for (const auto& sw : scored) fused.push_back(sw.comps.fused);
    const auto pos = flag_anomalies(fused, rule);
    std::vector<std::size_t> flags;
    for (std::size_t p : pos) flags.push_back(scored[p].comps.t);

    write_file(out, anomaly_report_json(scored, flags, weights, rule));
    std::cout << "scored " << scored.size() << " windows, " << flags.size()
              << " flags; report in " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& report_path, const std::string& truth_path,
                 long tolerance) {
    const auto report = parse_json_file(report_path);
    std::vector<std::size_t> flags;
    for (const auto& f : report.at("flags")) flags.push_back(f.get<std::size_t>());
    const auto events = load_truth_json(truth_path);
    const auto rep = evaluate_detection(flags, events, tolerance);

    std::size_t matched_flags = 0, matched_events = 0;
    for (bool m : rep.flag_matched) matched_flags += m ? 1 : 0;
    for (bool m : rep.event_matched) matched_events += m ? 1 : 0;
    ordered_json j{{"precision", rep.precision},
                   {"recall", rep.recall},
                   {"f1", rep.f1},
                   {"flags", flags.size()},
                   {"events", events.size()},
                   {"matched_flags", matched_flags},
                   {"matched_events", matched_events},
                   {"tolerance", tolerance}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

std::vector<std::pair<std::size_t, double>> parse_overrides(
    const std::string& text, const ModelBundle& bundle) {
    std::vector<std::pair<std::size_t, double>> out;
    if (text.empty()) return out;
    std::istringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == part.size())
            throw ConfigError("override must look like channel=value: " + part);
        const std::string name = part.substr(0, eq);
        double value = 0.0;
        try {
            value = std::stod(part.substr(eq + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad override value in: " + part);
        }
        std::size_t ch = bundle.driver_names.size();
        for (std::size_t k = 0; k < bundle.driver_names.size(); ++k)
            if (bundle.driver_names[k] == name) ch = k;
        if (ch == bundle.driver_names.size()) {
            try {
                ch = static_cast<std::size_t>(std::stoul(name));
            } catch (const std::exception&) {
                throw ConfigError("unknown driver channel: " + name);
            }
            if (ch >= bundle.driver_names.size())
                throw ConfigError("unknown driver channel: " + name);
        }
        // raw data units in, standardized units toward the models
        const auto& st = bundle.driver_stats[ch];
        out.emplace_back(ch, (value - st.mean) / st.std);
    }
    return out;
}

int cmd_whatif(const std::string& models, const std::string& data, std::size_t at,
               const std::string& override_text, std::size_t horizon) {
    const auto bundle = load_models(models);
    auto ds = load_csv(data);
    apply_stats(ds, bundle);
    const auto fusion = load_fusion(models);

    const std::size_t T = bundle.window;
    if (at + 1 < T || at >= ds.size())
        throw ConfigError("--at must index a full window inside the series");

    Tensor drivers(Shape{T, ds.driver_dim()});
    Tensor y_hist(Shape{T});
    const std::size_t start = at + 1 - T;
    for (std::size_t r = 0; r < T; ++r) {
        for (std::size_t c = 0; c < ds.driver_dim(); ++c)
            drivers.at(r, c) = ds.std_driver(c, start + r);
        y_hist.data[r] = ds.std_target(start + r);
    }

    const auto overrides = parse_overrides(override_text, bundle);
    auto null_action =
        whatif_evaluate(drivers, y_hist, {}, horizon, fusion.first, fusion.second,
                        bundle.darnn, bundle.cnn, bundle.vae, bundle.forest,
                        bundle.scaler);
    auto action =
        whatif_evaluate(drivers, y_hist, overrides, horizon, fusion.first, fusion.second,
                        bundle.darnn, bundle.cnn, bundle.vae, bundle.forest,
                        bundle.scaler);
    null_action.projection.t = at;
    action.projection.t = at;

    ordered_json j;
    j["at"] = at;
    j["horizon"] = horizon;
    ordered_json ov = ordered_json::array();
    for (const auto& [ch, v] : overrides)
        ov.push_back(ordered_json{{"channel", bundle.driver_names[ch]},
                                  {"standardized_value", v}});
    j["overrides"] = std::move(ov);
    j["null"] = ordered_json{{"projection", components_json(null_action.projection)},
                             {"rejected", null_action.rejected}};
    j["action"] = ordered_json{{"projection", components_json(action.projection)},
                               {"rejected", action.rejected}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_run(const std::string& config, const std::string& out, std::uint64_t seed) {
    const auto cfg = load_experiment_config(config);
    const auto s = run_experiment(cfg, out, seed);
    std::cout << "weights (alpha, beta, gamma, delta_w) = (" << s.weights.alpha << ", "
              << s.weights.beta << ", " << s.weights.gamma << ", " << s.weights.delta_w
              << ")\n"
              << "rule: baseline " << s.rule.baseline << ", delta_c " << s.rule.delta_c
              << "\n"
              << "validation f1 " << s.val_f1 << "; test f1 " << s.test_report.f1
              << " (precision " << s.test_report.precision << ", recall "
              << s.test_report.recall << ")\n"
              << "forecast mae: ensemble " << s.mae_ensemble << " (lambda " << s.lambda
              << "), darnn " << s.mae_darnn << ", cnnlstm " << s.mae_cnnlstm << "\n"
              << "artifacts in " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"anocast: anomaly forecasting over simulated growth-relaxation systems"};
    app.require_subcommand(1);

    std::string config, out, data, models, weights = "auto", report, truth, overrides;
    std::uint64_t seed = 42;
    std::size_t window = 10, epochs = 30, batch = 32, horizon = 5, at = 0;
    double baseline = 0.0, delta_c = 0.0;
    long tolerance = 5;

    auto* sim = app.add_subcommand("simulate", "integrate the simulator and write a csv");
    sim->add_option("--config", config, "simulator config json")->required();
    sim->add_option("--out", out, "output csv path")->required();
    sim->add_option("--seed", seed, "rng seed");

    auto* train = app.add_subcommand("train", "train all detector components");
    train->add_option("--data", data, "input csv")->required();
    train->add_option("--window", window, "window length");
    train->add_option("--epochs", epochs, "training epochs");
    train->add_option("--batch", batch, "mini-batch size");
    train->add_option("--out", out, "model output directory")->required();
    train->add_option("--seed", seed, "rng seed");

    auto* detect = app.add_subcommand("detect", "score a series and flag anomalies");
    detect->add_option("--data", data, "input csv")->required();
    detect->add_option("--models", models, "trained model directory")->required();
    detect->add_option("--weights", weights, "weights json path, or 'auto'");
    auto* opt_baseline = detect->add_option("--baseline", baseline, "flag baseline b");
    auto* opt_delta = detect->add_option("--delta-c", delta_c, "sudden-change threshold");
    detect->add_option("--horizon", horizon, "roll-out horizon");
    detect->add_option("--out", out, "report json path")->required();

    auto* evaluate = app.add_subcommand("evaluate", "event-level detection quality");
    evaluate->add_option("--report", report, "anomaly report json")->required();
    evaluate->add_option("--truth", truth, "truth events json")->required();
    evaluate->add_option("--tolerance", tolerance, "match tolerance in steps");

    auto* whatif = app.add_subcommand("whatif", "project a driver-override action");
    whatif->add_option("--models", models, "trained model directory")->required();
    whatif->add_option("--data", data, "input csv")->required();
    whatif->add_option("--at", at, "window end index")->required();
    whatif->add_option("--override", overrides, "channel=value,... in raw units");
    whatif->add_option("--horizon", horizon, "roll-out horizon");

    auto* run = app.add_subcommand("run", "full experiment: simulate, train, fuse, score");
    run->add_option("--config", config, "experiment config json")->required();
    run->add_option("--out", out, "artifact directory")->required();
    run->add_option("--seed", seed, "rng seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config, out, seed);
        if (train->parsed()) return cmd_train(data, window, epochs, batch, out, seed);
        if (detect->parsed())
            return cmd_detect(data, models, weights, baseline, opt_baseline->count() > 0,
                              delta_c, opt_delta->count() > 0, horizon, out);
        if (evaluate->parsed()) return cmd_evaluate(report, truth, tolerance);
        if (whatif->parsed()) return cmd_whatif(models, data, at, overrides, horizon);
        if (run->parsed()) return cmd_run(config, out, seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
