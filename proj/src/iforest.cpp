#include "anocast/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace anocast {

namespace {
constexpr const char* kSchema = "anocast-iforest-v1";
}

Standardizer fit_standardizer(const std::vector<double>& residuals) {
    if (residuals.size() < 2) throw DataError("need at least two residuals");
    const double n = static_cast<double>(residuals.size());
    double mean = 0.0;
    for (double r : residuals) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : residuals) var += (r - mean) * (r - mean);
    const double std = std::sqrt(var / n);
    if (std < 1e-12) throw DegenerateDataError("residuals have zero variance");
    return {mean, std};
}

double path_length_norm(std::size_t n) {
    if (n < 2) return 0.0;
    double harmonic = 0.0; // H(n-1), summed exactly rather than approximated
    for (std::size_t i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
    return 2.0 * harmonic - 2.0 * static_cast<double>(n - 1) / static_cast<double>(n);
}

namespace {

int build_node(IsoTree& tree, std::vector<double>& points, std::size_t depth,
               std::size_t depth_limit, Rng& rng) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[id].count = static_cast<std::uint32_t>(points.size());
    if (points.size() <= 1 || depth >= depth_limit) return id;

    const auto [lo_it, hi_it] = std::minmax_element(points.begin(), points.end());
    if (*lo_it == *hi_it) return id;

    const double split = rng.uniform(*lo_it, *hi_it);
    std::vector<double> left, right;
    for (double p : points)
        (p < split ? left : right).push_back(p);
    points.clear();
    points.shrink_to_fit();

    tree.nodes[id].split = split;
    const int l = build_node(tree, left, depth + 1, depth_limit, rng);
    tree.nodes[id].left = l;
    const int r = build_node(tree, right, depth + 1, depth_limit, rng);
    tree.nodes[id].right = r;
    return id;
}

double tree_path(const IsoTree& tree, double r) {
    std::size_t depth = 0;
    int id = 0;
    while (tree.nodes[id].left != -1) {
        id = r < tree.nodes[id].split ? tree.nodes[id].left : tree.nodes[id].right;
        ++depth;
    }
    return static_cast<double>(depth) + path_length_norm(tree.nodes[id].count);
}

} // namespace

double IsolationForestModel::avg_path(double r_std) const {
    if (trees.empty()) throw StateError("isolation forest has not been fitted");
    double total = 0.0;
    for (const auto& t : trees) total += tree_path(t, r_std);
    return total / static_cast<double>(trees.size());
}

double IsolationForestModel::score(double r_std) const {
    return std::exp2(-avg_path(r_std) / path_length_norm(subsample));
}

IsolationForestModel iforest_fit(const std::vector<double>& residuals_std, IforestConfig cfg,
                                 std::uint64_t seed) {
    if (residuals_std.size() < 2) throw DataError("need at least two residuals");
    if (cfg.contamination <= 0.0 || cfg.contamination >= 0.5)
        throw ConfigError("contamination must lie in (0, 0.5)");
    if (cfg.n_trees < 1) throw ConfigError("need at least one tree");
    if (cfg.subsample < 2) throw ConfigError("subsample must be at least 2");
    for (double r : residuals_std)
        if (!is_finite(r)) throw DataError("non-finite residual");

    // canonical order, so the seeded streams see the same sample regardless
    // of how the caller happened to arrange it
    std::vector<double> sorted(residuals_std);
    std::sort(sorted.begin(), sorted.end());

    IsolationForestModel model;
    model.subsample = std::min(cfg.subsample, sorted.size());
    model.contamination = cfg.contamination;
    const auto depth_limit = static_cast<std::size_t>(
        std::ceil(std::log2(static_cast<double>(model.subsample))));

    std::vector<std::size_t> indices(sorted.size());
    for (std::size_t i = 0; i < cfg.n_trees; ++i) {
        Rng rng(Rng::derive(seed, i));
        std::iota(indices.begin(), indices.end(), 0);
        rng.shuffle(indices);
        std::vector<double> sample(model.subsample);
        for (std::size_t j = 0; j < model.subsample; ++j) sample[j] = sorted[indices[j]];

        IsoTree tree;
        build_node(tree, sample, 0, depth_limit, rng);
        model.trees.push_back(std::move(tree));
    }

    std::vector<double> scores(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) scores[i] = model.score(sorted[i]);
    std::sort(scores.begin(), scores.end());
    const double rank = std::ceil((1.0 - cfg.contamination) * static_cast<double>(scores.size()));
    const std::size_t k =
        std::min(scores.size() - 1, static_cast<std::size_t>(std::max(rank - 1.0, 0.0)));
    model.threshold = scores[k];
    return model;
}

void save_iforest(const std::string& path, const Standardizer& scaler,
                  const IsolationForestModel& forest) {
    nlohmann::json doc;
    doc["schema"] = kSchema;
    doc["scaler"] = {{"mean", scaler.mean}, {"std", scaler.std}};
    doc["subsample"] = forest.subsample;
    doc["contamination"] = forest.contamination;
    doc["threshold"] = forest.threshold;
    auto& trees = doc["trees"] = nlohmann::json::array();
    for (const auto& t : forest.trees) {
        nlohmann::json flat;
        auto& left = flat["left"] = nlohmann::json::array();
        auto& right = flat["right"] = nlohmann::json::array();
        auto& split = flat["split"] = nlohmann::json::array();
        auto& count = flat["count"] = nlohmann::json::array();
        for (const auto& node : t.nodes) {
            left.push_back(node.left);
            right.push_back(node.right);
            split.push_back(node.split);
            count.push_back(node.count);
        }
        trees.push_back(std::move(flat));
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << doc.dump();
    if (!out) throw DataError("failed writing " + path);
}

std::pair<Standardizer, IsolationForestModel> load_iforest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (doc.value("schema", "") != kSchema)
        throw ParseError(path + ": unsupported schema tag");

    try {
        Standardizer scaler{doc.at("scaler").at("mean").get<double>(),
                            doc.at("scaler").at("std").get<double>()};
        IsolationForestModel forest;
        forest.subsample = doc.at("subsample").get<std::size_t>();
        forest.contamination = doc.at("contamination").get<double>();
        forest.threshold = doc.at("threshold").get<double>();
        for (const auto& flat : doc.at("trees")) {
            const auto left = flat.at("left").get<std::vector<int>>();
            const auto right = flat.at("right").get<std::vector<int>>();
            const auto split = flat.at("split").get<std::vector<double>>();
            const auto count = flat.at("count").get<std::vector<std::uint32_t>>();
            if (left.size() != right.size() || left.size() != split.size() ||
                left.size() != count.size() || left.empty())
                throw ParseError(path + ": inconsistent tree arrays");
            IsoTree tree;
            for (std::size_t i = 0; i < left.size(); ++i) {
                const int n = static_cast<int>(left.size());
                if (left[i] >= n || right[i] >= n)
                    throw ParseError(path + ": child index out of range");
                tree.nodes.push_back({left[i], right[i], split[i], count[i]});
            }
            forest.trees.push_back(std::move(tree));
        }
        if (forest.trees.empty()) throw ParseError(path + ": no trees");
        if (forest.subsample < 2) throw ParseError(path + ": bad subsample");
        return {scaler, forest};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace anocast
