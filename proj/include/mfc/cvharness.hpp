#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfc/config.hpp"
#include "mfc/distance_matrix.hpp"
#include "mfc/ensemble.hpp"
#include "mfc/weaklearners.hpp"

namespace mfc {

/// Nested cross-validation assignment over dataset rows. outer[i] is the outer
/// fold of row i; inner[k][i] is the inner fold of row i within the complement
/// of outer fold k, or -1 for rows of fold k itself.
struct FoldPlan {
    std::vector<std::string> ids;
    int outer_folds = 0;
    int inner_folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> outer;
    std::vector<std::vector<int>> inner;

    [[nodiscard]] std::vector<std::size_t> test_rows(std::size_t k) const;
    [[nodiscard]] std::vector<std::size_t> train_rows(std::size_t k) const;
    /// Inner folds of outer fold k, over train_rows(k) in that order.
    [[nodiscard]] TuningSplits inner_splits(std::size_t k) const;
    [[nodiscard]] std::string serialize() const;
    [[nodiscard]] std::uint64_t fingerprint() const;
};

/// Stratified folds: within each class (ascending), rows are shuffled by a seeded
/// generator and dealt round-robin; the deal continues across classes.
FoldPlan make_folds(const std::vector<std::string>& ids, std::span<const int> labels, int outer_folds,
                    int inner_folds, std::uint64_t seed);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Records which dataset rows fed each tuning decision, per outer fold, and
/// which fold plan every learner and ensemble consumed.
class TuningAudit {
public:
    struct Entry {
        std::size_t fold = 0;
        std::string stage;
        std::vector<std::size_t> rows;
    };

    void record(std::size_t fold, std::string stage, std::span<const std::size_t> rows);
    void record_plan(std::string subject, std::uint64_t plan_fingerprint);

    /// Entries whose rows intersect the outer test fold they were recorded for.
    [[nodiscard]] std::vector<std::string> violations(const FoldPlan& plan) const;
    [[nodiscard]] bool plans_consistent() const;
    [[nodiscard]] std::vector<Entry> entries() const;
    [[nodiscard]] std::vector<std::pair<std::string, std::uint64_t>> plans() const;

private:
    mutable std::mutex mutex_;
    std::vector<Entry> entries_;
    std::vector<std::pair<std::string, std::uint64_t>> plans_;
};

struct WeakSettings {
    std::vector<std::size_t> k_grid;   // empty: default grid
    std::vector<double> h_quantiles;   // empty: default quantiles
    Kernel kernel = Kernel::Gaussian;
};

struct WeakResult {
    WeakLearnerSpec spec;                 // base and metric; parameter of the last fold
    std::vector<WeakLearnerSpec> tuned;   // per outer fold
    std::vector<double> inner_accuracy;   // per outer fold, at the tuned parameter
    std::vector<double> outer_accuracy;
    std::vector<double> outer_brier;
    double mean_inner = 0.0;
    double mean_outer = 0.0;
    double mean_brier = 0.0;
    std::vector<ProbMatrix> oof;          // per outer fold, over train_rows(k)
    std::vector<ProbMatrix> test;         // per outer fold, over test_rows(k)
    std::uint64_t plan_fingerprint = 0;

    [[nodiscard]] std::string name() const { return spec.key(); }
};

/// Tunes on the inner folds of every outer fold, refits on the outer-training
/// rows and scores the held-out fold.
WeakResult evaluate_weak(const WeakLearnerSpec& base_spec, const DistanceMatrix& dist, std::span<const int> labels,
                         std::size_t class_count, const FoldPlan& plan, const WeakSettings& settings,
                         std::uint64_t seed, TuningAudit* audit = nullptr);

/// Indices with accuracy >= threshold, by accuracy descending, then name.
std::vector<std::size_t> select_gate(const std::vector<std::string>& names, const std::vector<double>& accuracies,
                                     double threshold);

struct EnsembleResult {
    std::string name; // "RF-I", ...
    SuperKind kind = SuperKind::LC;
    MeasureMode mode = MeasureMode::TypeI;
    bool skipped = false;
    std::string note;
    std::vector<EnsembleModel> models; // per outer fold
    std::vector<double> inner_accuracy;
    std::vector<double> outer_accuracy;
    std::vector<double> outer_brier;
    double mean_inner = 0.0;
    double mean_outer = 0.0;
    double mean_brier = 0.0;
    std::uint64_t plan_fingerprint = 0;
};

struct BaseReport {
    BaseLearner base = BaseLearner::FkNN;
    std::vector<WeakResult> weak;
    std::vector<std::size_t> candidates; // gate order over `weak` (outer-accuracy gate)
    std::vector<EnsembleResult> ensembles;
};

struct RunReport {
    std::uint64_t config_fingerprint = 0;
    std::uint64_t dataset_fingerprint = 0;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::size_t classes = 0;
    std::size_t skipped_unlabeled = 0;
    GateMode gate = GateMode::Outer;
    double gate_threshold = 0.55;
    FoldPlan plan;
    std::vector<BaseReport> bases;
    std::vector<std::string> audit_violations;
    bool plans_consistent = true;
    std::size_t audit_entries = 0;

    [[nodiscard]] nlohmann::json to_json() const;
    /// Weak learners: one row per semi-metric and base (inner and outer means).
    [[nodiscard]] std::string weak_table_csv() const;
    /// Per base: rows = candidates in gate order, columns = super-learners.
    [[nodiscard]] std::string ensemble_table_csv(std::size_t base_index) const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Preprocess, distances, weak evaluation, gate, ensembles, report. Stage
/// failures are rethrown with the stage name prefixed.
RunReport run_pipeline(const RunConfig& config, std::size_t jobs = 1, const ProgressFn& progress = {});

/// Writes report.json, weak_learners.csv and ensembles_<base>.csv into dir.
void write_report(const std::filesystem::path& dir, const RunReport& report, bool save_models);

} // namespace mfc
