#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "anocast/common.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Isolation forest over standardized scalar residuals. Each tree isolates a
// seeded subsample with uniform random splits between the subsample min and
// max; anomaly scores follow 2^(-E[h]/c(psi)) with the average-path-length
// correction computed from exact harmonic sums, so small-n constants like
// c(2) = 1 hold exactly.
// ---------------------------------------------------------------------------

struct Standardizer {
    double mean = 0.0;
    double std = 1.0;
    double transform(double r) const { return (r - mean) / std; }
    double inverse(double v) const { return v * std + mean; }
};

// Sample mean and population standard deviation; needs >= 2 samples and
// refuses zero-variance inputs instead of inventing a std floor.
Standardizer fit_standardizer(const std::vector<double>& residuals);

// c(n): expected unsuccessful-search path length in a BST of n points.
double path_length_norm(std::size_t n);

struct IsoNode {
    int left = -1; // -1 marks a leaf
    int right = -1;
    double split = 0.0;
    std::uint32_t count = 0; // training points that reached this node
};

struct IsoTree {
    std::vector<IsoNode> nodes; // node 0 is the root, children pre-order
};

struct IforestConfig {
    std::size_t n_trees = 100;
    std::size_t subsample = 256; // capped at the sample count
    double contamination = 0.05; // in (0, 0.5)
};

struct IsolationForestModel {
    std::vector<IsoTree> trees;
    std::size_t subsample = 0; // effective psi after capping
    double contamination = 0.0;
    double threshold = 0.0; // (1 - contamination) quantile of training scores

    // Mean isolation depth across trees, leaf counts corrected by c(count).
    double avg_path(double r_std) const;

    // 2^(-avg_path/c(psi)), in (0, 1); higher = more anomalous.
    double score(double r_std) const;

    bool flag(double r_std) const { return score(r_std) > threshold; }
};

// Training order does not matter: the sample is canonicalized before the
// seeded subsample/split streams are drawn, so permutations of `residuals_std`
// produce bit-identical forests.
IsolationForestModel iforest_fit(const std::vector<double>& residuals_std, IforestConfig cfg,
                                 std::uint64_t seed);

// Single JSON document: standardizer stats plus flattened tree arrays.
void save_iforest(const std::string& path, const Standardizer& scaler,
                  const IsolationForestModel& forest);
std::pair<Standardizer, IsolationForestModel> load_iforest(const std::string& path);

} // namespace anocast
