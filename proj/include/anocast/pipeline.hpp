#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anocast/data.hpp"
#include "anocast/fusion.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// End-to-end experiment orchestration: simulate, split, train the four
// detector components, pick fusion weights and the flag rule on validation,
// score the test range, and write every artifact (report, metrics, loss
// histories, plot CSVs, persisted models) under one output directory.
// Failures surface as StageError naming the stage that broke.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    SimConfig sim;               // dt/t_end chosen so the default series has 2000 steps
    SplitFractions split;        // contiguous train/val/test
    std::size_t window = 10;     // T
    std::size_t horizon = 5;     // H
    std::size_t epochs = 30;
    std::size_t batch = 32;
    std::size_t enc_hidden = 32;
    std::size_t dec_hidden = 32;
    std::size_t kernel = 3;
    std::size_t filters = 16;
    std::size_t cnn_hidden = 32;
    std::size_t vae_hidden = 32;
    std::size_t latent = 4;
    std::size_t n_trees = 100;
    std::size_t subsample = 256;
    double contamination = 0.05;
    long tolerance = 5; // event-match window, steps

    ExperimentConfig();

    void validate() const; // throws ConfigError
};

// Strict JSON parsing: unknown keys are rejected so typos cannot silently
// fall back to defaults. The sim block nests under "sim".
ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);
SimConfig sim_config_from_json(const std::string& text); // flat sim fields

// One scored window: collapsed fusion components plus the one-step pieces
// used for forecast-error reporting and plot data.
struct ScoredWindow {
    ScoreComponents comps;
    double truth1 = 0.0; // standardized y_{t+1}
    double da1 = 0.0;    // one-step forecasts, standardized
    double cnn1 = 0.0;
    std::vector<double> temporal_attention; // length T
    Tensor input_attention;                 // [T x D]
};

// Scores every window in `range` that has H future truth values, using
// recorded data for the residual component.
std::vector<ScoredWindow> score_range(const Dataset& ds, SplitRange range,
                                      std::size_t window, std::size_t horizon,
                                      const DarnnModel& darnn, const CnnLstmModel& cnn,
                                      const VaeModel& vae,
                                      const IsolationForestModel& forest,
                                      const Standardizer& residual_stats,
                                      const FusionWeights& weights);

// Events that overlap [first, last] — flags outside the scored span can
// never match, so detection quality is judged on reachable events only.
std::vector<PerturbEvent> events_in_span(const std::vector<PerturbEvent>& events,
                                         std::size_t first, std::size_t last);

// Nearest-rank upper quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Threshold candidates derived from validation component quantiles; shared
// by the fused search and the standalone baselines.
GridSpec derive_grid(const std::vector<ScoreComponents>& validation);

// Thresholds-only search with the weights pinned; same tie rule as the
// full grid search (smallest b, then smallest delta_c).
GridSearchResult grid_search_rule(const std::vector<ScoreComponents>& validation,
                                  const std::vector<PerturbEvent>& events,
                                  const FusionWeights& weights,
                                  const std::vector<double>& baseline_values,
                                  const std::vector<double>& change_values,
                                  long tolerance);

struct StandaloneResult {
    std::string name; // residual / attention / reconstruction / isolation
    FlagRule rule;
    double val_f1 = 0.0;
    double test_f1 = 0.0;
};

struct ExperimentSummary {
    FusionWeights weights;
    FlagRule rule;
    double val_f1 = 0.0;
    DetectionReport test_report;
    std::vector<StandaloneResult> standalone; // 4 entries
    double lambda = 0.5;                      // ensemble mix picked on validation
    double mae_ensemble = 0.0;                // raw units, test range
    double mae_darnn = 0.0;
    double mae_cnnlstm = 0.0;
};

ExperimentSummary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 std::uint64_t seed);

// Serialized anomaly report (flags, scores, per-window components, weights,
// rule) in the fixed JSON layout shared by `run` and `detect`.
std::string anomaly_report_json(const std::vector<ScoredWindow>& scored,
                                const std::vector<std::size_t>& flags,
                                const FusionWeights& weights, const FlagRule& rule);

} // namespace anocast
