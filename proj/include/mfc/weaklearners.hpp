#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfc/common.hpp"
#include "mfc/distance_matrix.hpp"
#include "mfc/semimetrics.hpp"

namespace mfc {

enum class BaseLearner { FkNN, KNCD };
enum class Kernel { Gaussian, Uniform };

std::string base_name(BaseLearner b);
BaseLearner parse_base(const std::string& s);
std::string kernel_name(Kernel k);
Kernel parse_kernel(const std::string& s);

/// fkNN uses `k`; kNCD uses `h` and `kernel`.
struct WeakLearnerSpec {
    BaseLearner base = BaseLearner::FkNN;
    SemiMetricSpec metric;
    std::size_t k = 1;
    double h = 1.0;
    Kernel kernel = Kernel::Gaussian;

    /// e.g. "kNCD:dtw@a0".
    [[nodiscard]] std::string key() const;
};

/// Row-major observations x classes; each row a probability vector.
struct ProbMatrix {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    ProbMatrix() = default;
    ProbMatrix(std::size_t r, std::size_t c) : rows(r), classes(c), values(r * c, 0.0) {}
    [[nodiscard]] std::span<double> row(std::size_t i) { return std::span<double>(values).subspan(i * classes, classes); }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values).subspan(i * classes, classes);
    }
    [[nodiscard]] double operator()(std::size_t i, std::size_t l) const { return values[i * classes + l]; }
};

/// Class frequencies over the tie-enlarged neighbourhood {i : D_i <= D_(k)},
/// normalized by the neighbourhood size.
std::vector<double> fknn_proba(std::span<const double> train_dists, std::span<const int> train_labels,
                               std::size_t class_count, std::size_t k);

/// Argmax class, exact ties drawn from rng.
std::size_t fknn_predict(std::span<const double> prob, Rng& rng);

struct KernelEstimate {
    std::vector<double> prob;
    /// True when every kernel weight vanished and nearest-neighbour probabilities were used.
    bool fallback = false;
};

double kernel_weight(Kernel kernel, double u);

KernelEstimate kncd_proba(std::span<const double> train_dists, std::span<const int> train_labels,
                          std::size_t class_count, double h, Kernel kernel);

/// Probability vector for test sample `test` from training rows `train` of a distance matrix.
std::vector<double> predict_proba(const WeakLearnerSpec& spec, const DistanceMatrix& dist,
                                  std::span<const std::size_t> train, std::span<const int> labels,
                                  std::size_t class_count, std::size_t test);

/// Default tuning grids: odd k up to min(31, n_train); h at the given quantiles
/// of the positive pairwise distances among the training rows.
std::vector<std::size_t> default_k_grid(std::size_t n_train);
std::vector<double> bandwidth_grid(const DistanceMatrix& dist, std::span<const std::size_t> train,
                                   std::span<const double> quantiles);
std::vector<double> default_bandwidth_quantiles();

/// Inner-CV view for tuning: `rows` are dataset indices of the tuning set and
/// `fold_of[i]` assigns rows[i] to one of `folds` validation folds.
struct TuningSplits {
    std::vector<std::size_t> rows;
    std::vector<int> fold_of;
    int folds = 0;
};

struct TuneResult {
    WeakLearnerSpec spec;
    double accuracy = 0.0;             // mean inner-validation accuracy of the chosen value
    std::vector<double> fold_accuracy; // per inner fold, for the chosen value
    ProbMatrix oof;                    // out-of-fold probabilities for splits.rows at the chosen value
};

/// Picks the grid value with the best mean inner accuracy; ties go to the
/// smoother model (smaller k, larger h). `seed` drives random tie-breaks in prediction.
TuneResult tune_param(const TuningSplits& splits, const WeakLearnerSpec& base_spec, const DistanceMatrix& dist,
                      std::span<const int> labels, std::size_t class_count, std::span<const std::size_t> k_grid,
                      std::span<const double> h_grid, std::uint64_t seed);

} // namespace mfc
