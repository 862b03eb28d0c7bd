#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mfc/dataset.hpp"
#include "mfc/error.hpp"
#include "mfc/funcdata.hpp"

using namespace mfc;

namespace {

Curve curve2(std::vector<double> t, std::vector<double> xy) { return Curve(std::move(t), std::move(xy), 2); }
Curve curve1(std::vector<double> t, std::vector<double> x) { return Curve(std::move(t), std::move(x), 1); }

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mfc_funcdata_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("curve invariants") {
    CHECK_THROWS_AS(curve1({0}, {1}), InvalidInput);
    CHECK_THROWS_AS(curve1({0, 0}, {1, 2}), InvalidInput);
    CHECK_THROWS_AS(curve1({0, 1}, {1}), InvalidInput);
    CHECK_THROWS_AS(curve1({0, 1}, {1, NAN}), InvalidInput);
    CHECK_NOTHROW(curve1({0, 1}, {1, 2}));
}

TEST_CASE("standardize divides by the viewport") {
    const Curve c = standardize(curve2({0, 1}, {0, 0, 800, 600}), {800, 600});
    CHECK(c.at(0, 0) == 0.0);
    CHECK(c.at(1, 0) == 1.0);
    CHECK(c.at(1, 1) == 1.0);

    const Curve k = standardize(curve2({0, 1}, {400, 300, 400, 300}), {800, 600});
    CHECK(k.at(0, 0) == 0.5);
    CHECK(k.at(1, 1) == 0.5);

    const Curve o = standardize(curve2({0, 1}, {1000, -50, 0, 0}), {800, 600});
    CHECK(o.at(0, 0) == doctest::Approx(1.25));
    CHECK(o.at(0, 1) == doctest::Approx(-50.0 / 600.0));

    CHECK_THROWS_AS(standardize(curve2({0, 1}, {0, 0, 1, 1}), {0, 600}), InvalidInput);
    CHECK_THROWS_AS(standardize(curve2({0, 1}, {0, 0, 1, 1}), {800, -1}), InvalidInput);
}

TEST_CASE("min-max standardization maps shared bounds to the unit box") {
    const std::vector<double> lo{10, 0}, hi{20, 0};
    const Curve c = standardize_minmax(curve2({0, 1}, {10, 0, 15, 0}), lo, hi);
    CHECK(c.at(0, 0) == 0.0);
    CHECK(c.at(1, 0) == 0.5);
    CHECK(c.at(1, 1) == 0.0); // constant dimension
}

TEST_CASE("finite differences") {
    const Curve constant = finite_derivative(curve1({0, 3, 7, 8}, {2, 2, 2, 2}), 1);
    for (std::size_t j = 0; j < constant.size(); ++j) CHECK(constant.at(j, 0) == 0.0);

    const Curve linear = finite_derivative(curve1({0, 1, 2}, {0, 3, 6}), 1);
    for (std::size_t j = 0; j < 3; ++j) CHECK(linear.at(j, 0) == doctest::Approx(3.0));

    // Interior central differences are exact for quadratics: (t_{j+1}^2 - t_{j-1}^2)/(t_{j+1} - t_{j-1}) = 2 t_j.
    const Curve quad = finite_derivative(curve1({0, 1, 2, 3, 4}, {0, 1, 4, 9, 16}), 1);
    CHECK(quad.at(1, 0) == doctest::Approx(2.0));
    CHECK(quad.at(2, 0) == doctest::Approx(4.0));
    CHECK(quad.at(3, 0) == doctest::Approx(6.0));

    // Nonuniform grid, still exact for a line.
    const Curve uneven = finite_derivative(curve1({0, 1, 5, 6}, {1, 3, 11, 13}), 1);
    for (std::size_t j = 0; j < 4; ++j) CHECK(uneven.at(j, 0) == doctest::Approx(2.0));

    CHECK_THROWS_AS(finite_derivative(curve1({0, 1}, {0, 1}), 1), InvalidInput);
    CHECK_THROWS_AS(finite_derivative(curve1({0, 1, 2, 3}, {0, 1, 2, 3}), 2), InvalidInput);
    CHECK_NOTHROW(finite_derivative(curve1({0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}), 2));
    CHECK_NOTHROW(finite_derivative_unchecked(curve1({0, 1}, {0, 1}), 2));
}

TEST_CASE("time normalization") {
    std::vector<double> t(101), x(101);
    for (std::size_t j = 0; j < 101; ++j) {
        t[j] = static_cast<double>(j) * 7.0;
        x[j] = std::sin(static_cast<double>(j));
    }
    const NormalizedCurve same = time_normalize(curve1(t, x));
    REQUIRE(same.size() == 101);
    for (std::size_t j = 0; j < 101; ++j) CHECK(std::abs(same.at(j, 0) - x[j]) < 1e-12);

    const NormalizedCurve seg = time_normalize(curve2({0, 100}, {0, 0, 1, 2}), 3);
    CHECK(seg.at(1, 0) == doctest::Approx(0.5));
    CHECK(seg.at(1, 1) == doctest::Approx(1.0));
    CHECK(seg.at(2, 1) == doctest::Approx(2.0));

    // Rescaled knots {0, 0.1, 1}; every query from 0.25 on lies where the curve is flat at 1.
    const NormalizedCurve knots = time_normalize(curve1({0, 10, 100}, {0, 1, 1}), 5);
    const std::vector<double> expect{0, 1, 1, 1, 1};
    for (std::size_t j = 0; j < 5; ++j) CHECK(knots.at(j, 0) == doctest::Approx(expect[j]));

    CHECK_THROWS_AS(time_normalize(curve1({0, 10, 20}, {0, 0, 0}), 1), InvalidInput);
}

TEST_CASE("mouse measures") {
    const MeasureVector still = extract_measures(curve2({0, 2500, 5000}, {3, 3, 3, 3, 3, 3}));
    CHECK(still.total_distance == 0.0);
    CHECK(still.hovers == 1.0);
    CHECK(still.hover_time == 5000.0);
    CHECK(still.x_flips == 0.0);
    CHECK(still.response_time == 5000.0);
    CHECK(still.initiation_time == 5000.0);

    const MeasureVector step = extract_measures(curve2({0, 10}, {0, 0, 3, 4}));
    CHECK(step.total_distance == doctest::Approx(5.0));
    CHECK(step.hovers == 0.0);
    CHECK(step.length == 2.0);
    CHECK(step.initiation_time == 10.0);

    // x deltas +1, +1, -1, +1: two sign changes.
    const MeasureVector flips = extract_measures(curve2({0, 1, 2, 3, 4}, {0, 0, 1, 0, 2, 0, 1, 0, 2, 0}));
    CHECK(flips.x_flips == 2.0);
    CHECK(flips.y_flips == 0.0);

    // A short pause stays below the threshold.
    const MeasureVector pause = extract_measures(curve2({0, 100, 600, 700}, {0, 0, 1, 1, 1, 1, 2, 2}));
    CHECK(pause.hovers == 0.0);
    const MeasureVector lingering = extract_measures(curve2({0, 100, 1600, 1700}, {0, 0, 1, 1, 1, 1, 2, 2}));
    CHECK(lingering.hovers == 1.0);
    CHECK(lingering.hover_time == 1500.0);
    CHECK(lingering.initiation_time == 100.0);
}

TEST_CASE("measure lookup by name") {
    MeasureVector m;
    m.response_time = 1200;
    m.x_flips = 3;
    CHECK(m.get("RT") == 1200.0);
    CHECK(m.get("response_time") == 1200.0);
    CHECK(m.get("x_flips") == 3.0);
    CHECK_FALSE(m.get("nonexistent").has_value());
    m.set_external("RT", 5.0);
    m.set_external("age", 41.0);
    CHECK(m.get("RT") == 5.0);
    CHECK(m.get("age") == 41.0);
    CHECK(builtin_measure_names().size() == 10);
}

TEST_CASE("AOI symbols") {
    const AoiPartition two({{'A', 0, 0, 0.5, 1}, {'B', 0.5, 0, 1, 1}}, 'O');
    const std::vector<double> inside{0.1, 0.1, 0.2, 0.5, 0.3, 0.9};
    CHECK(aoi_symbols({inside, 2}, two) == "AAA");
    const std::vector<double> outside{2.0, 2.0};
    CHECK(aoi_symbols({outside, 2}, two) == "O");

    const AoiPartition overlap({{'A', 0, 0, 1, 1}, {'B', 0, 0, 1, 1}}, 'O');
    const std::vector<double> both{0.5, 0.5};
    CHECK(aoi_symbols({both, 2}, overlap) == "A");
}

TEST_CASE("AOI compositions with half-count smoothing") {
    const AoiPartition two({{'A', 0, 0, 0.5, 1}, {'B', 0.5, 0, 1, 1}}, 'O');
    std::vector<double> all_a;
    for (int j = 0; j < 101; ++j) {
        all_a.push_back(0.25);
        all_a.push_back(0.5);
    }
    const Composition c = aoi_composition(NormalizedCurve(all_a, 2), two);
    REQUIRE(c.size() == 2);
    CHECK(c.parts()[0] == doctest::Approx(101.5 / 102.0));
    CHECK(c.parts()[1] == doctest::Approx(0.5 / 102.0));

    std::vector<double> split;
    for (int j = 0; j < 101; ++j) {
        split.push_back(j < 50 ? 0.25 : 0.75);
        split.push_back(0.5);
    }
    const Composition s = aoi_composition(NormalizedCurve(split, 2), two);
    CHECK(s.parts()[0] == doctest::Approx(50.5 / 102.0));
    CHECK(s.parts()[1] == doctest::Approx(51.5 / 102.0));

    std::vector<double> sym;
    for (int j = 0; j < 100; ++j) {
        sym.push_back(j % 2 ? 0.25 : 0.75);
        sym.push_back(0.5);
    }
    const Composition y = aoi_composition(NormalizedCurve(sym, 2), two);
    CHECK(y.parts()[0] == doctest::Approx(y.parts()[1]));

    // A point outside every box adds the fallback part in auto mode.
    std::vector<double> stray(all_a);
    stray[0] = 5.0;
    CHECK(aoi_composition(NormalizedCurve(stray, 2), two).size() == 3);
    CHECK(aoi_composition(NormalizedCurve(all_a, 2), two, FallbackPart::Always).size() == 3);

    CHECK_THROWS_AS(Composition({0.5, 0.0, 0.5}), InvalidInput);
}

TEST_CASE("dataset files round-trip and preprocessing orders samples") {
    const auto dir = scratch("roundtrip");
    std::vector<RawRecord> records;
    records.push_back({"b", "q1", curve2({0, 10, 20, 30, 40}, {0, 0, 50, 50, 100, 20, 90, 30, 80, 40}), Viewport{100, 100}});
    records.push_back({"a", "q1", curve2({0, 15, 30, 45, 60}, {0, 0, 10, 60, 40, 80, 100, 10, 90, 20}), Viewport{100, 100}});
    records.push_back({"c", "q1", curve2({0, 5, 10, 15, 20}, {0, 0, 1, 1, 2, 2, 3, 3, 4, 4}), Viewport{100, 100}});
    write_trajectories(dir / "t.csv", records);
    std::map<SampleKey, int> labels{{{"a", "q1"}, 2}, {{"b", "q1"}, 1}};
    write_labels(dir / "l.csv", labels);

    const auto back = read_trajectories(dir / "t.csv");
    REQUIRE(back.size() == 3);
    const auto lab = read_labels(dir / "l.csv");
    CHECK(lab == labels);

    const Dataset data = preprocess(back, lab, {}, std::nullopt, PreprocessSettings{});
    REQUIRE(data.size() == 2);
    CHECK(data.skipped_unlabeled == 1);
    CHECK(data.samples[0].id == "a");
    CHECK(data.samples[0].label == 1);
    CHECK(data.samples[1].label == 0);
    CHECK(data.class_count == 2);
    CHECK(data.samples[0].normalized[0].size() == 101);
    CHECK(data.samples[0].standardized.at(3, 0) == doctest::Approx(1.0));

    // Order-2 derivatives need five samples per curve.
    std::vector<RawRecord> short_one{{"s", "q1", curve2({0, 10, 20}, {0, 0, 1, 1, 2, 2}), Viewport{100, 100}}};
    CHECK_THROWS_AS(preprocess(short_one, {{{"s", "q1"}, 1}}, {}, std::nullopt, PreprocessSettings{}), DataError);
    CHECK(data.fingerprint() == preprocess(back, lab, {}, std::nullopt, PreprocessSettings{}).fingerprint());

    std::ofstream(dir / "bad.csv") << "id,question,t_ms,x\nz,q1,0,1\n";
    CHECK_THROWS_AS(read_trajectories(dir / "bad.csv"), DataError);
    CHECK_THROWS_AS(read_trajectories(dir / "missing.csv"), DataError);
}
