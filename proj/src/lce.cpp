#include "mfc/lce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfc/error.hpp"

namespace mfc {

std::vector<double> project_to_simplex(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) throw InvalidInput("cannot project an empty vector");
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = std::max(v[j] - theta, 0.0);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    return w;
}

namespace {

void check_aligned(const std::vector<ProbMatrix>& probs, std::span<const int> labels) {
    if (probs.empty()) throw InvalidInput("LCE needs at least one learner");
    const std::size_t n = probs.front().rows;
    const std::size_t L = probs.front().classes;
    if (labels.size() != n || n == 0) throw InvalidInput("LCE probability rows and labels are misaligned");
    for (const auto& p : probs)
        if (p.rows != n || p.classes != L) throw InvalidInput("LCE probability matrices are misaligned");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= L) throw InvalidInput("class label out of range");
}

} // namespace

double brier_objective(const std::vector<ProbMatrix>& probs, std::span<const int> labels,
                       std::span<const double> weights) {
    check_aligned(probs, labels);
    if (weights.size() != probs.size()) throw InvalidInput("weight count does not match learner count");
    const std::size_t n = labels.size();
    const std::size_t L = probs.front().classes;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < L; ++l) {
            double alpha = 0.0;
            for (std::size_t m = 0; m < probs.size(); ++m) alpha += weights[m] * probs[m](i, l);
            const double r = (labels[i] == static_cast<int>(l) ? 1.0 : 0.0) - alpha;
            s += r * r;
        }
    }
    return s / static_cast<double>(n);
}

LceFit lce_fit(const std::vector<ProbMatrix>& probs, std::span<const int> labels, const LceOptions& options) {
    check_aligned(probs, labels);
    const std::size_t M = probs.size();
    const std::size_t n = labels.size();
    const std::size_t L = probs.front().classes;

    LceFit fit;
    if (M == 1) {
        fit.weights = {1.0};
        fit.objective = brier_objective(probs, labels, fit.weights);
        return fit;
    }

    // S(w) = 1 - 2 c'w + w'Qw
    std::vector<double> Q(M * M, 0.0), c(M, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t a = 0; a < M; ++a) {
                const double pa = probs[a](i, l);
                if (labels[i] == static_cast<int>(l)) c[a] += pa;
                for (std::size_t b = a; b < M; ++b) Q[a * M + b] += pa * probs[b](i, l);
            }
        }
    }
    for (std::size_t a = 0; a < M; ++a) {
        c[a] /= static_cast<double>(n);
        for (std::size_t b = a; b < M; ++b) {
            Q[a * M + b] /= static_cast<double>(n);
            Q[b * M + a] = Q[a * M + b];
        }
    }
    auto objective = [&](const std::vector<double>& w) {
        double s = 1.0;
        for (std::size_t a = 0; a < M; ++a) {
            double qa = 0.0;
            for (std::size_t b = 0; b < M; ++b) qa += Q[a * M + b] * w[b];
            s += w[a] * qa - 2.0 * c[a] * w[a];
        }
        return s;
    };

    // Gershgorin bound on the largest eigenvalue of Q gives a safe step 1/(2 lambda_max).
    double lipschitz = 0.0;
    for (std::size_t a = 0; a < M; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < M; ++b) row += std::abs(Q[a * M + b]);
        lipschitz = std::max(lipschitz, 2.0 * row);
    }
    const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

    std::vector<double> w(M, 1.0 / static_cast<double>(M));
    double current = objective(w);
    std::vector<double> grad(M), trial(M);

    auto descend = [&] {
        while (fit.iterations < options.max_iterations) {
            ++fit.iterations;
            for (std::size_t a = 0; a < M; ++a) {
                double qa = 0.0;
                for (std::size_t b = 0; b < M; ++b) qa += Q[a * M + b] * w[b];
                grad[a] = 2.0 * (qa - c[a]);
                trial[a] = w[a] - step * grad[a];
            }
            std::vector<double> next = project_to_simplex(trial);
            const double value = objective(next);
            const double decrease = current - value;
            if (decrease >= 0.0) {
                w = std::move(next);
                current = value;
            }
            if (!(decrease >= options.tolerance)) break;
        }
    };
    descend();

    // A vertex that beats the iterate means descent stalled early; restart from it.
    for (std::size_t restart = 0; restart < M; ++restart) {
        std::size_t best_vertex = M;
        double best_value = current;
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<double> e(M, 0.0);
            e[m] = 1.0;
            const double value = objective(e);
            if (value < best_value) {
                best_value = value;
                best_vertex = m;
            }
        }
        if (best_vertex == M) break;
        w.assign(M, 0.0);
        w[best_vertex] = 1.0;
        current = best_value;
        descend();
    }

    fit.weights = std::move(w);
    fit.objective = brier_objective(probs, labels, fit.weights);
    return fit;
}

std::vector<double> lce_predict(std::span<const double> weights, const std::vector<std::vector<double>>& probs) {
    if (weights.size() != probs.size() || probs.empty()) throw InvalidInput("weight count does not match learner count");
    const std::size_t L = probs.front().size();
    std::vector<double> alpha(L, 0.0);
    for (std::size_t m = 0; m < probs.size(); ++m) {
        if (probs[m].size() != L) throw InvalidInput("learner probability vectors differ in length");
        for (std::size_t l = 0; l < L; ++l) alpha[l] += weights[m] * probs[m][l];
    }
    return alpha;
}

} // namespace mfc
