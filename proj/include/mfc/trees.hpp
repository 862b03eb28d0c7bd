#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfc/common.hpp"

namespace mfc {

/// Row-major design matrix for the super-learners, with column provenance.
struct FeatureTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::string> names;

    [[nodiscard]] double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * cols, cols);
    }
    /// Copy of the given rows (in that order).
    [[nodiscard]] FeatureTable subset(std::span<const std::size_t> rows) const;
};

struct TreeOptions {
    int max_depth = -1;      // negative: unlimited
    std::size_t min_leaf = 1;
    std::size_t mtry = 0;    // columns drawn per split; 0 = all
};

/// Binary tree; x[feature] <= threshold goes left. Leaves hold either a class
/// frequency vector (classification) or one real value (regression).
class TreeModel {
public:
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::size_t leaf = 0; // offset into leaf values
    };

    [[nodiscard]] std::span<const double> predict(std::span<const double> x) const;
    [[nodiscard]] std::size_t outputs() const { return outputs_; }
    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }
    [[nodiscard]] std::size_t depth() const;
    [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }

    [[nodiscard]] nlohmann::json to_json() const;
    static TreeModel from_json(const nlohmann::json& j);

private:
    friend class TreeBuilder;
    std::vector<Node> nodes_;
    std::vector<double> leaf_values_;
    std::size_t outputs_ = 0;
};

/// Greedy CART with Gini impurity. Candidate thresholds are midpoints between
/// sorted distinct values; ties go to the lower column, then the lower threshold.
/// `rows` selects (possibly repeated) training rows; empty means all rows.
TreeModel tree_fit(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                   const TreeOptions& options, std::span<const std::size_t> rows = {}, Rng* rng = nullptr);

/// Least-squares regression tree on `target`; leaf value = sum(target)/sum(hessian) (one Newton step).
TreeModel regression_tree_fit(const FeatureTable& features, std::span<const double> target,
                              std::span<const double> hessian, const TreeOptions& options,
                              std::span<const std::size_t> rows = {});

struct ForestOptions {
    std::size_t n_trees = 500;
    std::size_t mtry = 0; // 0 = all columns
    bool bootstrap = true;
    int max_depth = -1;
    std::size_t min_leaf = 1;
    std::uint64_t seed = 0;
};

class ForestModel {
public:
    /// Mean of leaf frequency vectors over the first `limit` trees (0 = all).
    [[nodiscard]] std::vector<double> predict_proba(std::span<const double> x, std::size_t limit = 0) const;
    [[nodiscard]] std::size_t size() const { return trees_.size(); }
    [[nodiscard]] const TreeModel& tree(std::size_t t) const { return trees_[t]; }
    [[nodiscard]] std::size_t classes() const { return classes_; }
    [[nodiscard]] std::size_t mtry() const { return mtry_; }
    /// Tree t was trained on bootstrap draw in_bag(t); used for out-of-bag scoring.
    [[nodiscard]] const std::vector<std::vector<std::size_t>>& in_bag() const { return in_bag_; }

    [[nodiscard]] nlohmann::json to_json() const;
    static ForestModel from_json(const nlohmann::json& j);

private:
    friend ForestModel forest_fit(const FeatureTable&, std::span<const int>, std::size_t, const ForestOptions&);
    std::vector<TreeModel> trees_;
    std::vector<std::uint64_t> tree_seeds_;
    std::vector<std::vector<std::size_t>> in_bag_;
    std::size_t classes_ = 0;
    std::size_t mtry_ = 0;
};

ForestModel forest_fit(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                       const ForestOptions& options);

/// Out-of-bag accuracy (rows never out of bag are skipped).
double forest_oob_accuracy(const ForestModel& forest, const FeatureTable& features, std::span<const int> labels,
                           std::uint64_t seed);

struct BoostOptions {
    std::size_t n_trees = 100;
    double shrinkage = 0.1;
    int interaction_depth = 1;
    std::size_t min_leaf = 5;
    double subsample = 1.0;
    std::uint64_t seed = 0;
};

/// Logistic gradient boosting (binomial deviance, Newton leaf values).
/// Two classes use one model for class 2; more classes use one-vs-rest models.
class BoostModel {
public:
    /// Class probabilities using the first `limit` rounds (0 = all).
    [[nodiscard]] std::vector<double> predict_proba(std::span<const double> x, std::size_t limit = 0) const;
    [[nodiscard]] std::size_t rounds() const { return models_.empty() ? 0 : models_.front().trees.size(); }
    [[nodiscard]] std::size_t classes() const { return classes_; }

    [[nodiscard]] nlohmann::json to_json() const;
    static BoostModel from_json(const nlohmann::json& j);

private:
    friend BoostModel boost_fit(const FeatureTable&, std::span<const int>, std::size_t, const BoostOptions&);
    struct Binary {
        double init = 0.0;
        std::vector<TreeModel> trees;
    };
    std::vector<Binary> models_;
    std::size_t classes_ = 0;
    double shrinkage_ = 0.1;
};

BoostModel boost_fit(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                     const BoostOptions& options);

} // namespace mfc
