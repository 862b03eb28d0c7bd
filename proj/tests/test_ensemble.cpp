#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mfc/ensemble.hpp"
#include "mfc/error.hpp"
#include "mfc/lce.hpp"
#include "mfc/trees.hpp"
#include "oracles.hpp"

using namespace mfc;

namespace {

ProbMatrix binary_probs(const std::vector<double>& p_second) {
    ProbMatrix m(p_second.size(), 2);
    for (std::size_t i = 0; i < p_second.size(); ++i) {
        m.values[2 * i] = 1.0 - p_second[i];
        m.values[2 * i + 1] = p_second[i];
    }
    return m;
}

FeatureTable table(std::size_t cols, const std::vector<double>& values) {
    FeatureTable t;
    t.cols = cols;
    t.rows = values.size() / cols;
    t.values = values;
    for (std::size_t c = 0; c < cols; ++c) t.names.push_back("f" + std::to_string(c));
    return t;
}

InnerSplits round_robin(std::size_t n, int folds) {
    InnerSplits s;
    s.folds = folds;
    for (std::size_t i = 0; i < n; ++i) s.fold_of.push_back(static_cast<int>(i % static_cast<std::size_t>(folds)));
    return s;
}

SuperGrid small_grid() {
    SuperGrid g;
    g.rf_trees = {25, 50};
    g.rf_mtry = {"sqrt", "all"};
    g.gb_trees = {50, 100};
    g.gb_shrinkage = {0.1};
    g.gb_depth = {1, 2};
    g.gb_min_leaf = 2;
    return g;
}

} // namespace

TEST_CASE("simplex projection") {
    const auto p = project_to_simplex(std::vector<double>{0.2, 0.3, 0.5});
    CHECK(p[0] == doctest::Approx(0.2));
    const auto q = project_to_simplex(std::vector<double>{2.0, 0.0});
    CHECK(q[0] == 1.0);
    CHECK(q[1] == 0.0);
    const auto r = project_to_simplex(std::vector<double>{-1.0, 0.5, 0.7});
    CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(1.0));
    CHECK(r[0] == 0.0);
    CHECK(r[2] - r[1] == doctest::Approx(0.2));
}

TEST_CASE("LCE weights") {
    const std::vector<int> y{0, 1};
    const ProbMatrix perfect = binary_probs({0.0, 1.0});
    const ProbMatrix anti = binary_probs({1.0, 0.0});

    const LceFit solo = lce_fit({perfect}, y);
    CHECK(solo.weights == std::vector<double>{1.0});

    const LceFit fit = lce_fit({perfect, anti}, y);
    CHECK(fit.weights[0] == doctest::Approx(1.0));
    CHECK(fit.objective == doctest::Approx(0.0));
    const std::vector<std::vector<std::vector<double>>> raw{{{1, 0}, {0, 1}}, {{0, 1}, {1, 0}}};
    CHECK(fit.objective <= oracle::simplex_grid_min(raw, y, 0.001) + 1e-9);

    const ProbMatrix soft = binary_probs({0.3, 0.6});
    const LceFit twins = lce_fit({soft, soft}, y);
    const double single = brier_objective({soft}, y, std::vector<double>{1.0});
    CHECK(twins.objective == doctest::Approx(single).epsilon(1e-12));

    CHECK_THROWS_AS(lce_fit({perfect, binary_probs({0.5})}, y), InvalidInput);
    CHECK_THROWS_AS(lce_fit({}, y), InvalidInput);
}

TEST_CASE("LCE never loses to its best member, and matches the grid oracle") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t M = 2 + trial % 2, n = 20;
        std::vector<int> y(n);
        for (auto& v : y) v = static_cast<int>(rng() % 2);
        std::vector<ProbMatrix> probs;
        std::vector<std::vector<std::vector<double>>> raw(M);
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<double> p(n);
            for (auto& v : p) v = u(rng);
            probs.push_back(binary_probs(p));
            for (std::size_t i = 0; i < n; ++i) raw[m].push_back({1.0 - p[i], p[i]});
        }
        const LceFit fit = lce_fit(probs, y);
        CHECK(fit.objective <= oracle::simplex_grid_min(raw, y, 0.001) + 1e-3);
        CHECK(std::abs(std::accumulate(fit.weights.begin(), fit.weights.end(), 0.0) - 1.0) < 1e-8);
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<double> e(M, 0.0);
            e[m] = 1.0;
            CHECK(fit.objective <= brier_objective(probs, y, e) + 1e-9);
        }
        CHECK(fit.objective == doctest::Approx(oracle::brier(raw, y, fit.weights)));
    }
}

TEST_CASE("LCE prediction") {
    const std::vector<std::vector<double>> p{{0.8, 0.2}, {0.4, 0.6}};
    CHECK(lce_predict(std::vector<double>{1.0, 0.0}, p) == std::vector<double>{0.8, 0.2});
    const auto half = lce_predict(std::vector<double>{0.5, 0.5}, {{1, 0}, {0, 1}});
    CHECK(half[0] == 0.5);
    const auto mix = lce_predict(std::vector<double>{0.25, 0.75}, p);
    CHECK(mix[0] == doctest::Approx(0.5));
    CHECK(mix[1] == doctest::Approx(0.5));
    CHECK_THROWS_AS(lce_predict(std::vector<double>{1.0}, p), InvalidInput);
}

TEST_CASE("classification trees") {
    const FeatureTable x = table(1, {0.1, 0.2, 0.3, 0.7, 0.8, 0.9});
    const std::vector<int> same{1, 1, 1, 1, 1, 1};
    const TreeModel leaf = tree_fit(x, same, 2, {});
    CHECK(leaf.node_count() == 1);
    CHECK(leaf.predict(x.row(0))[1] == 1.0);

    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const TreeModel stump = tree_fit(x, y, 2, {});
    CHECK(stump.depth() == 1);
    const double t = stump.nodes()[0].threshold;
    CHECK(t > 0.3);
    CHECK(t < 0.7);
    CHECK(t == doctest::Approx(oracle::best_gini_threshold({0.1, 0.2, 0.3, 0.7, 0.8, 0.9}, y, 2)));

    TreeOptions flat;
    flat.max_depth = 0;
    const TreeModel prior = tree_fit(x, std::vector<int>{0, 0, 0, 0, 1, 1}, 2, flat);
    CHECK(prior.predict(x.row(0))[0] == doctest::Approx(4.0 / 6.0));

    // Exhaustive split oracle on noisy data: the root threshold is the best Gini cut.
    std::mt19937_64 rng(4);
    std::vector<double> v(40);
    std::vector<int> lab(40);
    for (std::size_t i = 0; i < 40; ++i) {
        v[i] = static_cast<double>(rng() % 1000) / 1000.0;
        lab[i] = v[i] + 0.3 * (static_cast<double>(rng() % 1000) / 1000.0) > 0.6 ? 1 : 0;
    }
    const TreeModel noisy = tree_fit(table(1, v), lab, 2, {});
    CHECK(noisy.nodes()[0].threshold == doctest::Approx(oracle::best_gini_threshold(v, lab, 2)));

    const TreeModel back = TreeModel::from_json(noisy.to_json());
    CHECK(back.to_json() == noisy.to_json());

    CHECK_THROWS_AS(tree_fit(FeatureTable{}, std::vector<int>{}, 2, {}), InvalidInput);
}

TEST_CASE("random forests") {
    const FeatureTable x = table(2, {0.1, 5, 0.2, 3, 0.3, 4, 0.7, 1, 0.8, 2, 0.9, 0});
    const std::vector<int> y{0, 0, 1, 1, 1, 0};

    ForestOptions one;
    one.n_trees = 1;
    one.bootstrap = false;
    one.mtry = 0;
    const ForestModel f = forest_fit(x, y, 2, one);
    const TreeModel t = tree_fit(x, y, 2, {});
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto a = f.predict_proba(x.row(i));
        const auto b = t.predict(x.row(i));
        CHECK(a[0] == b[0]);
    }

    const ForestModel pure = forest_fit(x, std::vector<int>{1, 1, 1, 1, 1, 1}, 2, ForestOptions{.n_trees = 10});
    CHECK(pure.predict_proba(x.row(3))[1] == 1.0);

    ForestOptions bad;
    bad.mtry = 3;
    CHECK_THROWS_AS(forest_fit(x, y, 2, bad), InvalidInput);

    // Two interleaved moons.
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(0.0, std::acos(-1.0));
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> v;
    std::vector<int> lab;
    for (int i = 0; i < 200; ++i) {
        const double a = angle(rng);
        const bool upper = i % 2 == 0;
        v.push_back(upper ? std::cos(a) + noise(rng) : 1.0 - std::cos(a) + noise(rng));
        v.push_back(upper ? std::sin(a) + noise(rng) : 0.5 - std::sin(a) + noise(rng));
        lab.push_back(upper ? 0 : 1);
    }
    const FeatureTable moons = table(2, v);
    ForestOptions opt;
    opt.n_trees = 100;
    opt.mtry = 1;
    opt.seed = 7;
    const ForestModel rf = forest_fit(moons, lab, 2, opt);
    CHECK(forest_oob_accuracy(rf, moons, lab, 7) >= 0.9);
    CHECK(rf.predict_proba(moons.row(0), 10).size() == 2);

    const ForestModel again = forest_fit(moons, lab, 2, opt);
    CHECK(again.to_json() == rf.to_json());
    CHECK(ForestModel::from_json(rf.to_json()).to_json() == rf.to_json());
}

TEST_CASE("gradient boosting") {
    const FeatureTable x = table(1, {0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9});
    const std::vector<int> y{0, 0, 0, 0, 1, 1, 1, 1};

    BoostOptions none;
    none.n_trees = 0;
    const BoostModel prior = boost_fit(x, y, 2, none);
    const auto p = prior.predict_proba(x.row(0));
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
    const BoostModel skewed = boost_fit(x, std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1}, 2, none);
    CHECK(skewed.predict_proba(x.row(7))[1] == doctest::Approx(0.25));

    BoostOptions opt;
    opt.n_trees = 100;
    opt.shrinkage = 0.1;
    opt.min_leaf = 1;
    const BoostModel gb = boost_fit(x, y, 2, opt);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto q = gb.predict_proba(x.row(i));
        correct += (q[1] > q[0] ? 1 : 0) == y[i];
    }
    CHECK(correct == x.rows);
    CHECK(gb.rounds() == 100);
    // Fewer rounds stay closer to the prior.
    CHECK(gb.predict_proba(x.row(7), 10)[1] < gb.predict_proba(x.row(7))[1]);

    // Three classes: one-vs-rest, normalized.
    const std::vector<int> y3{0, 0, 1, 1, 1, 2, 2, 2};
    const BoostModel multi = boost_fit(x, y3, 3, opt);
    const auto r = multi.predict_proba(x.row(0));
    CHECK(r.size() == 3);
    CHECK(r[0] + r[1] + r[2] == doctest::Approx(1.0));
    CHECK(BoostModel::from_json(multi.to_json()).to_json() == multi.to_json());
}

TEST_CASE("feature tables for the super-learners") {
    const ProbMatrix a = binary_probs({0.1, 0.9}), b = binary_probs({0.4, 0.6});
    const FeatureTable f = build_features({&a, &b}, {"L2", "dtw"}, nullptr);
    CHECK(f.cols == 2); // the last class column is dropped for two classes
    CHECK(f.at(1, 0) == doctest::Approx(0.1));
    CHECK(f.names[1] == "dtw#p1");
    const FeatureTable cov = table(1, {7, 8});
    const FeatureTable g = build_features({&a}, {"L2"}, &cov);
    CHECK(g.cols == 2);
    CHECK(g.at(1, 1) == 8.0);
    const std::vector<double> covrow{8.0};
    const auto row = feature_row({{a(1, 0), a(1, 1)}}, covrow);
    CHECK(row == std::vector<double>{g.at(1, 0), g.at(1, 1)});

    CHECK(resolve_mtry({"sqrt", "third", "all", "2"}, 10) == std::vector<std::size_t>{4, 10, 2});
    CHECK(super_name(SuperKind::GB, MeasureMode::TypeII) == "GB-II");
    CHECK(super_name(SuperKind::LC, MeasureMode::TypeI) == "LC");
}

TEST_CASE("forward selection") {
    std::mt19937_64 rng(9);
    const std::size_t n = 80;
    std::vector<int> y(n);
    std::vector<double> pa(n), pb(n), pn(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool a = i % 2, b = (i / 2) % 2;
        y[i] = a != b ? 1 : 0;
        pa[i] = a ? 0.7 : 0.3;
        pb[i] = b ? 0.7 : 0.3;
        pn[i] = static_cast<double>(rng() % 100) / 100.0;
    }
    const ProbMatrix A = binary_probs(pa), B = binary_probs(pb), N = binary_probs(pn);
    const InnerSplits splits = round_robin(n, 5);
    const SuperGrid grid = small_grid();

    SUBCASE("two candidates are both included") {
        const EnsembleModel m = forward_select(SuperKind::LC, MeasureMode::TypeI, {"a", "n"}, {&A, &N}, nullptr, y, 2,
                                               splits, grid, 1);
        CHECK(m.learners == std::vector<std::string>{"a", "n"});
        CHECK(m.trail.size() == 2);
        CHECK_FALSE(m.trail[0].accuracy.has_value());
    }
    SUBCASE("a duplicate learner is rejected") {
        const EnsembleModel m = forward_select(SuperKind::LC, MeasureMode::TypeI, {"a", "n", "a2"}, {&A, &N, &A},
                                               nullptr, y, 2, splits, grid, 1);
        CHECK(m.learners.size() == 2);
        CHECK_FALSE(m.trail[2].included);
    }
    SUBCASE("the XOR complement is accepted by boosting") {
        const EnsembleModel m = forward_select(SuperKind::GB, MeasureMode::TypeI, {"a", "n", "b"}, {&A, &N, &B},
                                               nullptr, y, 2, splits, grid, 1);
        REQUIRE(m.trail.size() == 3);
        CHECK(m.trail[2].included);
        CHECK(m.learners.back() == "b");
        // Direct evaluation of both ensembles.
        const SuperTune pair = tune_super(SuperKind::GB, {&A, &N}, nullptr, y, 2, splits, grid, 1);
        const SuperTune triple = tune_super(SuperKind::GB, {&A, &N, &B}, nullptr, y, 2, splits, grid, 1);
        CHECK(*m.trail[1].accuracy == pair.accuracy);
        CHECK(*m.trail[2].accuracy == triple.accuracy);
        CHECK(triple.accuracy > pair.accuracy + 0.2);
        CHECK(m.inner_accuracy == triple.accuracy);

        const EnsembleModel lc = forward_select(SuperKind::LC, MeasureMode::TypeI, {"a", "n", "b"}, {&A, &N, &B},
                                                nullptr, y, 2, splits, grid, 1);
        CHECK(m.inner_accuracy > lc.inner_accuracy + 0.2);

        const EnsembleModel back = EnsembleModel::from_json(m.to_json());
        CHECK(back.to_json() == m.to_json());
    }
    SUBCASE("a single learner passes through") {
        const EnsembleModel m =
            forward_select(SuperKind::RF, MeasureMode::TypeI, {"a"}, {&A}, nullptr, y, 2, splits, grid, 1);
        CHECK(m.passthrough);
        CHECK(m.weights == std::vector<double>{1.0});
    }
    SUBCASE("type II refuses LC") {
        const FeatureTable cov = table(1, std::vector<double>(n, 1.0));
        CHECK_THROWS_AS(forward_select(SuperKind::LC, MeasureMode::TypeII, {"a", "b"}, {&A, &B}, &cov, y, 2, splits,
                                       grid, 1),
                        InvalidInput);
    }
}

TEST_CASE("ensemble prediction") {
    const std::vector<int> y{0, 1, 1, 0, 1, 0};
    const ProbMatrix A = binary_probs({0.1, 0.8, 0.9, 0.2, 0.7, 0.3}), B = binary_probs({0.9, 0.1, 0.5, 0.5, 0.2, 0.6});
    Rng rng(1);

    EnsembleModel lc = fit_super(SuperKind::LC, MeasureMode::TypeI, {"a", "b"}, {&A, &B}, nullptr, y, 2,
                                 SuperParams{}, 1);
    lc.weights = {1.0, 0.0};
    CHECK(ensemble_predict(lc, {{0.3, 0.7}, {0.9, 0.1}}, {}, rng).second == 1);
    CHECK_THROWS_AS(ensemble_predict(lc, {{0.3, 0.7}}, {}, rng), InvalidInput);

    SuperParams rf;
    rf.kind = SuperKind::RF;
    rf.n_trees = 1;
    rf.mtry = 2;
    const std::vector<int> ones(6, 1);
    const EnsembleModel pure = fit_super(SuperKind::RF, MeasureMode::TypeI, {"a", "b"}, {&A, &B}, nullptr, ones, 2, rf, 1);
    CHECK(ensemble_predict(pure, {{0.5, 0.5}, {0.5, 0.5}}, {}, rng).second == 1);

    SuperParams gb;
    gb.kind = SuperKind::GB;
    gb.n_trees = 0;
    gb.shrinkage = 0.1;
    gb.depth = 1;
    const std::vector<int> mostly{0, 0, 0, 0, 1, 0};
    const EnsembleModel prior = fit_super(SuperKind::GB, MeasureMode::TypeI, {"a", "b"}, {&A, &B}, nullptr, mostly, 2, gb, 1);
    CHECK(ensemble_predict(prior, {{0.0, 1.0}, {0.0, 1.0}}, {}, rng).second == 0);
}
