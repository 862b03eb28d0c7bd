#include "mfc/weaklearners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfc/error.hpp"

namespace mfc {

std::string base_name(BaseLearner b) { return b == BaseLearner::FkNN ? "fkNN" : "kNCD"; }

BaseLearner parse_base(const std::string& s) {
    if (s == "fkNN") return BaseLearner::FkNN;
    if (s == "kNCD") return BaseLearner::KNCD;
    throw InvalidInput("unknown weak learner base '" + s + "' (expected fkNN or kNCD)");
}

std::string kernel_name(Kernel k) { return k == Kernel::Gaussian ? "gaussian" : "uniform"; }

Kernel parse_kernel(const std::string& s) {
    if (s == "gaussian") return Kernel::Gaussian;
    if (s == "uniform") return Kernel::Uniform;
    throw InvalidInput("unknown kernel '" + s + "' (expected gaussian or uniform)");
}

std::string WeakLearnerSpec::key() const { return base_name(base) + ":" + metric.key(); }

namespace {

void check_labels(std::span<const int> labels, std::size_t class_count) {
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= class_count) throw InvalidInput("class label out of range");
}

// Probabilities for every k in ks from one sorted pass over the distances.
std::vector<std::vector<double>> fknn_sweep(std::span<const double> dists, std::span<const int> labels,
                                            std::size_t class_count, std::span<const std::size_t> ks) {
    std::vector<std::size_t> order(dists.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dists[a] < dists[b]; });

    std::vector<std::vector<double>> out;
    out.reserve(ks.size());
    for (std::size_t k : ks) {
        if (k < 1 || k > dists.size()) throw InvalidInput("k must lie in [1, n_train]");
        const double radius = dists[order[k - 1]];
        std::size_t members = k;
        while (members < order.size() && dists[order[members]] <= radius) ++members;
        std::vector<double> p(class_count, 0.0);
        for (std::size_t i = 0; i < members; ++i) p[static_cast<std::size_t>(labels[order[i]])] += 1.0;
        for (double& v : p) v /= static_cast<double>(members);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace

std::vector<double> fknn_proba(std::span<const double> train_dists, std::span<const int> train_labels,
                               std::size_t class_count, std::size_t k) {
    if (train_dists.size() != train_labels.size()) throw InvalidInput("distance and label counts differ");
    check_labels(train_labels, class_count);
    const std::size_t ks[1] = {k};
    return std::move(fknn_sweep(train_dists, train_labels, class_count, ks).front());
}

std::size_t fknn_predict(std::span<const double> prob, Rng& rng) { return argmax_random_tie(prob, rng); }

double kernel_weight(Kernel kernel, double u) {
    if (kernel == Kernel::Uniform) return u <= 1.0 ? 1.0 : 0.0;
    return std::exp(-0.5 * u * u);
}

KernelEstimate kncd_proba(std::span<const double> train_dists, std::span<const int> train_labels,
                          std::size_t class_count, double h, Kernel kernel) {
    if (train_dists.size() != train_labels.size()) throw InvalidInput("distance and label counts differ");
    if (train_dists.empty()) throw InvalidInput("kNCD needs at least one training sample");
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("bandwidth must be positive");
    check_labels(train_labels, class_count);

    KernelEstimate est;
    est.prob.assign(class_count, 0.0);
    double total = 0.0;
    if (kernel == Kernel::Gaussian) {
        // Shift by the smallest distance; the ratio is unchanged and weights cannot all underflow.
        const double dmin = *std::min_element(train_dists.begin(), train_dists.end());
        const double umin = dmin / h;
        for (std::size_t i = 0; i < train_dists.size(); ++i) {
            const double u = train_dists[i] / h;
            const double w = std::exp(-0.5 * (u - umin) * (u + umin));
            est.prob[static_cast<std::size_t>(train_labels[i])] += w;
            total += w;
        }
    } else {
        // D <= h rather than D/h <= 1: the quotient can round down to 1 for D just above h.
        for (std::size_t i = 0; i < train_dists.size(); ++i) {
            const double w = train_dists[i] <= h ? 1.0 : 0.0;
            est.prob[static_cast<std::size_t>(train_labels[i])] += w;
            total += w;
        }
    }
    if (!(total > 0.0)) {
        est.prob = fknn_proba(train_dists, train_labels, class_count, 1);
        est.fallback = true;
        return est;
    }
    for (double& v : est.prob) v /= total;
    return est;
}

std::vector<double> predict_proba(const WeakLearnerSpec& spec, const DistanceMatrix& dist,
                                  std::span<const std::size_t> train, std::span<const int> labels,
                                  std::size_t class_count, std::size_t test) {
    std::vector<double> d(train.size());
    std::vector<int> y(train.size());
    const auto row = dist.row(test);
    for (std::size_t i = 0; i < train.size(); ++i) {
        d[i] = row[train[i]];
        y[i] = labels[train[i]];
    }
    if (spec.base == BaseLearner::FkNN) return fknn_proba(d, y, class_count, spec.k);
    return kncd_proba(d, y, class_count, spec.h, spec.kernel).prob;
}

std::vector<std::size_t> default_k_grid(std::size_t n_train) {
    std::vector<std::size_t> grid;
    for (std::size_t k = 1; k <= std::min<std::size_t>(31, n_train); k += 2) grid.push_back(k);
    return grid;
}

std::vector<double> default_bandwidth_quantiles() {
    std::vector<double> q;
    for (int i = 1; i <= 19; ++i) q.push_back(0.05 * i);
    return q;
}

std::vector<double> bandwidth_grid(const DistanceMatrix& dist, std::span<const std::size_t> train,
                                   std::span<const double> quantiles) {
    std::vector<double> positive;
    for (std::size_t a = 0; a < train.size(); ++a)
        for (std::size_t b = a + 1; b < train.size(); ++b) {
            const double v = dist(train[a], train[b]);
            if (v > 0.0) positive.push_back(v);
        }
    if (positive.empty()) return {1.0};
    std::sort(positive.begin(), positive.end());
    std::vector<double> grid;
    for (double q : quantiles) {
        const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(positive.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, positive.size() - 1);
        const double h = positive[lo] + (pos - static_cast<double>(lo)) * (positive[hi] - positive[lo]);
        if (grid.empty() || h != grid.back()) grid.push_back(h);
    }
    return grid;
}

TuneResult tune_param(const TuningSplits& splits, const WeakLearnerSpec& base_spec, const DistanceMatrix& dist,
                      std::span<const int> labels, std::size_t class_count, std::span<const std::size_t> k_grid,
                      std::span<const double> h_grid, std::uint64_t seed) {
    const bool knn = base_spec.base == BaseLearner::FkNN;
    const std::size_t grid_size = knn ? k_grid.size() : h_grid.size();
    if (grid_size == 0) throw InvalidInput("tuning grid is empty");
    if (splits.rows.size() != splits.fold_of.size() || splits.folds < 1)
        throw InvalidInput("malformed tuning splits");

    // Smoother models first so the first maximum wins ties.
    std::vector<std::size_t> ks(k_grid.begin(), k_grid.end());
    std::vector<double> hs(h_grid.begin(), h_grid.end());
    std::sort(ks.begin(), ks.end());
    std::sort(hs.begin(), hs.end(), std::greater<>());

    const std::size_t n = splits.rows.size();
    const auto folds = static_cast<std::size_t>(splits.folds);
    std::vector<ProbMatrix> oof(grid_size, ProbMatrix(n, class_count));
    std::vector<std::vector<double>> correct(grid_size, std::vector<double>(folds, 0.0));
    std::vector<double> fold_size(folds, 0.0);

    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train;
        std::vector<std::size_t> valid;
        for (std::size_t i = 0; i < n; ++i)
            (static_cast<std::size_t>(splits.fold_of[i]) == f ? valid : train).push_back(i);
        if (train.empty()) throw InvalidInput("inner fold leaves no training rows");
        if (knn)
            for (std::size_t k : ks)
                if (k > train.size()) throw InvalidInput("k exceeds the inner training size");
        fold_size[f] = static_cast<double>(valid.size());

        std::vector<double> d(train.size());
        std::vector<int> y(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) y[i] = labels[splits.rows[train[i]]];

        for (std::size_t v : valid) {
            const std::size_t row = splits.rows[v];
            const auto drow = dist.row(row);
            for (std::size_t i = 0; i < train.size(); ++i) d[i] = drow[splits.rows[train[i]]];

            std::vector<std::vector<double>> probs;
            if (knn) {
                probs = fknn_sweep(d, y, class_count, ks);
            } else {
                probs.reserve(hs.size());
                for (double h : hs) probs.push_back(kncd_proba(d, y, class_count, h, base_spec.kernel).prob);
            }
            for (std::size_t g = 0; g < grid_size; ++g) {
                std::copy(probs[g].begin(), probs[g].end(), oof[g].row(v).begin());
                Rng rng(derive_seed(seed, {row}));
                if (static_cast<int>(fknn_predict(probs[g], rng)) == labels[row]) correct[g][f] += 1.0;
            }
        }
    }

    std::size_t best = 0;
    double best_acc = -1.0;
    std::vector<double> best_folds;
    for (std::size_t g = 0; g < grid_size; ++g) {
        std::vector<double> accs(folds, 0.0);
        double mean = 0.0;
        std::size_t used = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            if (fold_size[f] == 0.0) continue;
            accs[f] = correct[g][f] / fold_size[f];
            mean += accs[f];
            ++used;
        }
        mean /= static_cast<double>(std::max<std::size_t>(used, 1));
        if (mean > best_acc + 1e-12) {
            best_acc = mean;
            best = g;
            best_folds = accs;
        }
    }

    TuneResult result;
    result.spec = base_spec;
    if (knn) result.spec.k = ks[best];
    else result.spec.h = hs[best];
    result.accuracy = best_acc;
    result.fold_accuracy = std::move(best_folds);
    result.oof = std::move(oof[best]);
    return result;
}

} // namespace mfc
