#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mfc/cvharness.hpp"
#include "mfc/error.hpp"

using namespace mfc;

namespace {

std::vector<std::string> make_ids(std::size_t n) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = "id" + std::to_string(i);
    return ids;
}

DistanceMatrix line_distances(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs(x[i] - x[j]);
    return DistanceMatrix(parse_semimetric("L2"), make_ids(n), d);
}

} // namespace

TEST_CASE("stratified fold plans") {
    const std::vector<int> y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const FoldPlan plan = make_folds(make_ids(10), y, 5, 2, 3);
    for (std::size_t k = 0; k < 5; ++k) {
        const auto test = plan.test_rows(k);
        REQUIRE(test.size() == 2);
        CHECK(y[test[0]] != y[test[1]]);
        CHECK(plan.train_rows(k).size() == 8);
    }
    CHECK(make_folds(make_ids(10), y, 5, 2, 3).serialize() == plan.serialize());
    CHECK(make_folds(make_ids(10), y, 5, 2, 3).fingerprint() == plan.fingerprint());
    CHECK(make_folds(make_ids(10), y, 5, 2, 4).serialize() != plan.serialize());

    // Inner folds live inside the outer training rows only.
    for (std::size_t k = 0; k < 5; ++k) {
        const TuningSplits s = plan.inner_splits(k);
        CHECK(s.rows == plan.train_rows(k));
        CHECK(s.folds == 2);
        for (std::size_t r : plan.test_rows(k)) CHECK(plan.inner[k][r] == -1);
    }
}

TEST_CASE("fold plans partition the ids") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 20 + rng() % 181;
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
        const FoldPlan plan = make_folds(make_ids(n), y, 10, 2, rng());
        std::vector<int> seen(n, 0);
        for (std::size_t k = 0; k < 10; ++k)
            for (std::size_t r : plan.test_rows(k)) ++seen[r];
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
}

TEST_CASE("infeasible stratification names the class") {
    const std::vector<int> y{0, 0, 0, 0, 0, 0, 1, 1};
    try {
        make_folds(make_ids(8), y, 5, 2, 1);
        FAIL("expected an error");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()).find("class 2") != std::string::npos);
    }
}

TEST_CASE("accuracy") {
    CHECK(accuracy(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}) == 1.0);
    CHECK(accuracy(std::vector<int>{0, 1}, std::vector<int>{1, 0}) == 0.0);
    CHECK(accuracy(std::vector<int>{0, 1, 1, 1}, std::vector<int>{0, 1, 1, 0}) == 0.75);
    CHECK_THROWS_AS(accuracy(std::vector<int>{0}, std::vector<int>{0, 1}), InvalidInput);
}

TEST_CASE("candidate gate") {
    const std::vector<std::string> names{"a", "b", "c"};
    CHECK(select_gate(names, {0.60, 0.54, 0.55}, 0.55) == std::vector<std::size_t>{0, 2});
    CHECK(select_gate(names, {0.10, 0.20, 0.30}, 0.55).empty());
    CHECK(select_gate({"z", "m", "a"}, {0.7, 0.7, 0.7}, 0.55) == std::vector<std::size_t>{2, 1, 0});
}

TEST_CASE("weak-learner evaluation on separable data") {
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
        y.push_back(i % 2);
        x.push_back(100.0 * (i % 2) + i * 0.01);
    }
    const DistanceMatrix d = line_distances(x);
    const FoldPlan plan = make_folds(d.ids(), y, 5, 2, 1);
    WeakLearnerSpec spec;
    spec.metric = d.spec();
    TuningAudit audit;
    const WeakResult r = evaluate_weak(spec, d, y, 2, plan, WeakSettings{}, 1, &audit);
    CHECK(r.mean_outer == 1.0);
    CHECK(r.mean_inner == 1.0);
    CHECK(r.outer_accuracy.size() == 5);
    CHECK(r.plan_fingerprint == plan.fingerprint());
    CHECK(audit.violations(plan).empty());
    CHECK(audit.plans_consistent());
    CHECK_FALSE(audit.entries().empty());

    double mean = 0.0;
    for (double a : r.outer_accuracy) mean += a;
    CHECK(std::abs(mean / 5.0 - r.mean_outer) < 1e-12);
}

TEST_CASE("weak-learner evaluation on shuffled labels is near chance") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(200);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        x[i] = noise(rng);
        y[i] = static_cast<int>(i % 2);
    }
    std::shuffle(y.begin(), y.end(), rng);
    const DistanceMatrix d = line_distances(x);
    const FoldPlan plan = make_folds(d.ids(), y, 10, 5, 5);
    WeakLearnerSpec spec;
    spec.metric = d.spec();
    const WeakResult r = evaluate_weak(spec, d, y, 2, plan, WeakSettings{}, 5);
    CHECK(r.mean_outer > 0.4);
    CHECK(r.mean_outer < 0.6);
}

TEST_CASE("weak-learner evaluation matches a hand trace") {
    // Two outer folds; inner training sets hold two rows, so k = 1 is the only choice.
    const std::vector<double> x{0, 1.1, 2.3, 10.7, 3.9, 11.2, 12.6, 13.5};
    const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};
    const DistanceMatrix d = line_distances(x);
    const FoldPlan plan = make_folds(d.ids(), y, 2, 2, 7);
    WeakLearnerSpec spec;
    spec.metric = d.spec();
    const WeakResult r = evaluate_weak(spec, d, y, 2, plan, WeakSettings{}, 7);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(r.tuned[k].k == 1);
        const auto train = plan.train_rows(k), test = plan.test_rows(k);
        std::size_t correct = 0;
        for (std::size_t t : test) {
            std::size_t best = train[0];
            for (std::size_t s : train)
                if (std::abs(x[s] - x[t]) < std::abs(x[best] - x[t])) best = s;
            correct += y[best] == y[t];
        }
        // No distance ties on this line, so the nearest neighbour is unique.
        CHECK(r.outer_accuracy[k] == static_cast<double>(correct) / static_cast<double>(test.size()));
    }
}

TEST_CASE("audit flags test rows used in tuning") {
    const std::vector<int> y{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    const FoldPlan plan = make_folds(make_ids(10), y, 5, 2, 3);
    TuningAudit audit;
    audit.record(0, "clean", plan.train_rows(0));
    CHECK(audit.violations(plan).empty());
    audit.record(0, "leaky", plan.test_rows(0));
    CHECK(audit.violations(plan).size() == 1);
    audit.record_plan("a", plan.fingerprint());
    audit.record_plan("b", plan.fingerprint());
    CHECK(audit.plans_consistent());
    audit.record_plan("c", plan.fingerprint() + 1);
    CHECK_FALSE(audit.plans_consistent());
}
