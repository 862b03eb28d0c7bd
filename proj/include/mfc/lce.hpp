#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfc/weaklearners.hpp"

namespace mfc {

/// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

/// Brier score (1/n) sum_i sum_l (1{y_i = l} - sum_m w_m p_ilm)^2.
double brier_objective(const std::vector<ProbMatrix>& probs, std::span<const int> labels,
                       std::span<const double> weights);

struct LceOptions {
    double tolerance = 1e-12;          // stop once an iteration lowers the objective by less
    std::size_t max_iterations = 100000;
};

struct LceFit {
    std::vector<double> weights;
    double objective = 0.0;
    std::size_t iterations = 0;
};

/// Simplex-constrained Brier-score minimization by projected gradient descent,
/// started from uniform weights. The result never scores worse than any single learner.
LceFit lce_fit(const std::vector<ProbMatrix>& probs, std::span<const int> labels, const LceOptions& options = {});

/// Convex combination sum_m w_m p_m of per-learner probability vectors.
std::vector<double> lce_predict(std::span<const double> weights, const std::vector<std::vector<double>>& probs);

} // namespace mfc
