#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mfc/error.hpp"
#include "mfc/weaklearners.hpp"

using namespace mfc;

namespace {

// Two Gaussian clusters on the line, 10 sigma apart; labels alternate by cluster.
DistanceMatrix clusters(std::size_t n, std::vector<int>& labels, double gap = 10.0) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(n);
    std::vector<std::string> ids(n);
    labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % 2);
        x[i] = gap * labels[i] + noise(rng);
        ids[i] = "id" + std::to_string(i);
    }
    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs(x[i] - x[j]);
    return DistanceMatrix(parse_semimetric("L2"), ids, d);
}

} // namespace

TEST_CASE("fkNN probabilities") {
    const std::vector<double> d{1, 1, 2, 3};
    const std::vector<int> y{0, 1, 0, 1};
    const auto tie = fknn_proba(d, y, 2, 1);
    CHECK(tie[0] == 0.5);
    CHECK(tie[1] == 0.5);

    const auto all = fknn_proba(std::vector<double>{4, 1, 2, 3}, std::vector<int>{0, 0, 0, 1}, 2, 4);
    CHECK(all[0] == 0.75);
    CHECK(all[1] == 0.25);

    const auto near = fknn_proba(std::vector<double>{3, 0.5, 2}, std::vector<int>{0, 1, 0}, 2, 1);
    CHECK(near[0] == 0.0);
    CHECK(near[1] == 1.0);

    CHECK_THROWS_AS(fknn_proba(d, y, 2, 0), InvalidInput);
    CHECK_THROWS_AS(fknn_proba(d, y, 2, 5), InvalidInput);
}

TEST_CASE("fkNN prediction and seeded ties") {
    Rng rng(1);
    CHECK(fknn_predict(std::vector<double>{0.8, 0.2}, rng) == 0);
    CHECK(fknn_predict(std::vector<double>{0.0, 1.0}, rng) == 1);
    Rng a(99), b(99);
    for (int i = 0; i < 20; ++i)
        CHECK(fknn_predict(std::vector<double>{0.5, 0.5}, a) == fknn_predict(std::vector<double>{0.5, 0.5}, b));
    std::size_t ones = 0;
    Rng c(3);
    for (int i = 0; i < 400; ++i) ones += fknn_predict(std::vector<double>{0.5, 0.5}, c);
    CHECK(ones > 120);
    CHECK(ones < 280);
}

TEST_CASE("kNCD kernel estimates") {
    const std::vector<double> d{1, 2};
    const std::vector<int> y{0, 1};
    const KernelEstimate g = kncd_proba(d, y, 2, 1.0, Kernel::Gaussian);
    const double w1 = std::exp(-0.5), w2 = std::exp(-2.0);
    CHECK(g.prob[0] == doctest::Approx(w1 / (w1 + w2)));
    CHECK(g.prob[0] == doctest::Approx(0.81757).epsilon(1e-5));
    CHECK_FALSE(g.fallback);

    const std::vector<double> far{1, 2, 3, 4, 5};
    const std::vector<int> fy{0, 0, 1, 0, 1};
    const KernelEstimate flat = kncd_proba(far, fy, 2, 1e6 * 5.0, Kernel::Gaussian);
    CHECK(std::abs(flat.prob[0] - 0.6) < 1e-6);

    const KernelEstimate single = kncd_proba(std::vector<double>{7.0}, std::vector<int>{0}, 2, 0.1, Kernel::Gaussian);
    CHECK(single.prob[0] == doctest::Approx(1.0));

    // Uniform kernel with h below every distance falls back to the nearest neighbour.
    const KernelEstimate none = kncd_proba(far, fy, 2, 0.5, Kernel::Uniform);
    CHECK(none.fallback);
    CHECK(none.prob[0] == 1.0);

    CHECK(kernel_weight(Kernel::Uniform, 1.0) == 1.0);
    CHECK(kernel_weight(Kernel::Uniform, 1.0 + 1e-12) == 0.0);
    CHECK_THROWS_AS(kncd_proba(d, y, 2, 0.0, Kernel::Gaussian), InvalidInput);
}

TEST_CASE("uniform kNCD at the k-th neighbour distance matches fkNN") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng() % 20;
        std::vector<double> d(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            d[i] = static_cast<double>(rng() % 7) + 0.5; // frequent ties
            y[i] = static_cast<int>(rng() % 3);
        }
        const std::size_t k = 1 + rng() % n;
        std::vector<double> sorted(d);
        std::sort(sorted.begin(), sorted.end());
        const auto expect = fknn_proba(d, y, 3, k);
        const auto got = kncd_proba(d, y, 3, sorted[k - 1], Kernel::Uniform);
        CHECK(got.prob == expect);
    }
}

TEST_CASE("tuning grids") {
    const auto k = default_k_grid(40);
    CHECK(k.front() == 1);
    CHECK(k.back() == 31);
    for (std::size_t v : k) CHECK(v % 2 == 1);
    CHECK(default_k_grid(6).back() <= 6);
    CHECK_FALSE(default_bandwidth_quantiles().empty());

    std::vector<int> labels;
    const DistanceMatrix m = clusters(20, labels);
    std::vector<std::size_t> train(20);
    std::iota(train.begin(), train.end(), 0);
    const auto h = bandwidth_grid(m, train, default_bandwidth_quantiles());
    CHECK(std::is_sorted(h.begin(), h.end()));
    for (double v : h) CHECK(v > 0.0);
}

TEST_CASE("parameter tuning") {
    std::vector<int> labels;
    const DistanceMatrix m = clusters(40, labels);
    TuningSplits splits;
    for (std::size_t i = 0; i < 40; ++i) {
        splits.rows.push_back(i);
        splits.fold_of.push_back(static_cast<int>(i % 5));
    }
    splits.folds = 5;

    WeakLearnerSpec spec;
    spec.metric = m.spec();
    const std::vector<std::size_t> grid{1, 3, 5, 7};
    const TuneResult r = tune_param(splits, spec, m, labels, 2, grid, {}, 1);
    CHECK(r.accuracy == 1.0);
    CHECK(r.spec.k == 1); // every k is perfect; the smallest wins
    CHECK(r.oof.rows == 40);

    const std::vector<std::size_t> one{5};
    CHECK(tune_param(splits, spec, m, labels, 2, one, {}, 1).spec.k == 5);

    WeakLearnerSpec kncd = spec;
    kncd.base = BaseLearner::KNCD;
    const std::vector<double> hs{0.5, 2.0, 4.0};
    const TuneResult rh = tune_param(splits, kncd, m, labels, 2, {}, hs, 1);
    CHECK(rh.accuracy == 1.0);
    CHECK(rh.spec.h == 4.0); // ties go to the larger bandwidth

    CHECK_THROWS_AS(tune_param(splits, spec, m, labels, 2, {}, {}, 1), InvalidInput);
}

TEST_CASE("predict_proba excludes the test row and honours the spec") {
    std::vector<int> labels;
    const DistanceMatrix m = clusters(10, labels);
    std::vector<std::size_t> train{0, 1, 2, 3, 4, 5, 6, 7};
    WeakLearnerSpec spec;
    spec.metric = m.spec();
    spec.k = 8;
    const auto p = predict_proba(spec, m, train, labels, 2, 9);
    CHECK(p[0] == 0.5);
    spec.k = 1;
    CHECK(predict_proba(spec, m, train, labels, 2, 9)[labels[9]] == 1.0);
    CHECK(spec.key() == "fkNN:L2@a0");
}
