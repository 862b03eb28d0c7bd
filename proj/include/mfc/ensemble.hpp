#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfc/lce.hpp"
#include "mfc/trees.hpp"
#include "mfc/weaklearners.hpp"

namespace mfc {

enum class SuperKind { LC, RF, GB };
/// Type I: measures enter only as measure-based weak learners.
/// Type II: measures are appended as super-learner covariates instead.
enum class MeasureMode { TypeI, TypeII };

std::string super_name(SuperKind kind, MeasureMode mode); // "LC", "RF-I", "GB-II", ...

/// mtry rules: "sqrt" = ceil(sqrt(F)), "third" = ceil(F/3), "all" = F, or a literal count.
struct SuperGrid {
    std::vector<std::size_t> rf_trees{100, 300, 500};
    std::vector<std::string> rf_mtry{"sqrt", "third", "all"};
    std::vector<std::size_t> gb_trees{50, 100, 200};
    std::vector<double> gb_shrinkage{0.01, 0.1};
    std::vector<int> gb_depth{1, 2, 3};
    std::size_t gb_min_leaf = 5;

    bool operator==(const SuperGrid&) const = default;
};

std::vector<std::size_t> resolve_mtry(const std::vector<std::string>& rules, std::size_t columns);

struct SuperParams {
    SuperKind kind = SuperKind::LC;
    std::size_t n_trees = 0;
    std::size_t mtry = 0;
    double shrinkage = 0.0;
    int depth = 0;
    std::size_t min_leaf = 1;

    [[nodiscard]] nlohmann::json to_json() const;
    static SuperParams from_json(const nlohmann::json& j);
};

/// Probability columns per learner (the last class is dropped when L = 2), then covariates.
FeatureTable build_features(const std::vector<const ProbMatrix*>& probs, const std::vector<std::string>& names,
                            const FeatureTable* covariates);
std::vector<double> feature_row(const std::vector<std::vector<double>>& probs, std::span<const double> covariates);

/// Validation folds over the rows of a training set (positions, not dataset ids).
struct InnerSplits {
    std::vector<int> fold_of;
    int folds = 0;
};

struct SuperTune {
    SuperParams params;
    double accuracy = 0.0;
    std::vector<double> fold_accuracy;
};

/// Grid search by inner cross-validation; the first grid point with the best
/// mean fold accuracy wins. LC has no hyperparameters and is only scored.
SuperTune tune_super(SuperKind kind, const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                     std::span<const int> labels, std::size_t class_count, const InnerSplits& splits,
                     const SuperGrid& grid, std::uint64_t seed);

struct TrailStep {
    std::string learner;
    std::optional<double> accuracy; // none for the first learner
    bool included = false;
};

struct EnsembleModel {
    SuperKind kind = SuperKind::LC;
    MeasureMode mode = MeasureMode::TypeI;
    std::size_t classes = 0;
    std::vector<std::string> learners;   // selected, in inclusion order
    std::vector<std::string> covariates; // type II only
    SuperParams params;
    /// Set when a single learner was passed through unchanged.
    bool passthrough = false;
    std::vector<double> weights;
    std::optional<ForestModel> forest;
    std::optional<BoostModel> boost;
    std::vector<TrailStep> trail;
    double inner_accuracy = 0.0;

    [[nodiscard]] nlohmann::json to_json() const;
    static EnsembleModel from_json(const nlohmann::json& j);
};

/// Fits the super-learner on all training rows with fixed hyperparameters.
EnsembleModel fit_super(SuperKind kind, MeasureMode mode, const std::vector<std::string>& names,
                        const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                        std::span<const int> labels, std::size_t class_count, const SuperParams& params,
                        std::uint64_t seed);

/// Probability vector and class for one new observation. `probs[m]` belongs to
/// model.learners[m]; `covariates` must match model.covariates.
std::pair<std::vector<double>, std::size_t> ensemble_predict(const EnsembleModel& model,
                                                             const std::vector<std::vector<double>>& probs,
                                                             std::span<const double> covariates, Rng& rng);

/// Forward selection over candidates (already ordered best first): start with
/// the top two, then keep each further candidate only if the re-tuned mean inner
/// accuracy strictly increases. The returned model is fitted on all rows.
EnsembleModel forward_select(SuperKind kind, MeasureMode mode, const std::vector<std::string>& names,
                             const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                             std::span<const int> labels, std::size_t class_count, const InnerSplits& splits,
                             const SuperGrid& grid, std::uint64_t seed);

/// Mean accuracy drop when one feature column is permuted (tree-based models).
std::vector<double> permutation_importance(const EnsembleModel& model, const FeatureTable& features,
                                           std::span<const int> labels, std::uint64_t seed);

/// Mean of per-fold argmax accuracies of a probability matrix over inner folds.
double fold_accuracy(const ProbMatrix& probs, std::span<const int> labels, const InnerSplits& splits,
                     std::uint64_t seed, std::vector<double>* per_fold = nullptr);

} // namespace mfc
