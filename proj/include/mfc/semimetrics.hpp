#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mfc/funcdata.hpp"

namespace mfc {

enum class Family { LockStep, Elastic, Summary, Composition, SymbolSequence };

enum class MetricKind {
    Lp,
    DistanceCorrelation,
    Dtw,
    Frechet,
    Hausdorff,
    SummaryScalar,
    SummaryVector,
    Measure,
    Aitchison,
    Levenshtein,
    Hamming
};

enum class SummaryFunctional { Mean, Max, Min, Range };

enum class GroundDistance { Euclidean, Manhattan };

/// A named, parameterized semi-metric. Build with parse_semimetric() so that
/// the name and the parameters stay consistent.
struct SemiMetricSpec {
    std::string name;
    MetricKind kind = MetricKind::Lp;
    int order = 0;
    double p = 2.0;
    SummaryFunctional summary = SummaryFunctional::Mean;
    int dim = -1;
    std::vector<std::string> measures;
    GroundDistance ground = GroundDistance::Euclidean;
    bool collapse_repeats = false;

    [[nodiscard]] Family family() const;
    /// Unique, stable identifier, e.g. "L2@a0", "dtw@a1", "measure:RT".
    [[nodiscard]] std::string key() const;
    [[nodiscard]] std::uint64_t fingerprint() const;
    [[nodiscard]] bool is_measure() const { return kind == MetricKind::Measure; }
    bool operator==(const SemiMetricSpec&) const = default;
};

/// Parses names such as "L1", "L2.5", "dcor", "dtw", "frechet", "hausdorff",
/// "mean", "mean-x", "globMax", "globMax-y", "globMin-x", "globRange",
/// "aitchison", "levenshtein", "hamming", "measure:RT", "measure:flips2d",
/// "measure:hovers+hover_time".
SemiMetricSpec parse_semimetric(const std::string& name, int order = 0,
                                GroundDistance ground = GroundDistance::Euclidean, bool collapse_repeats = false);

std::string family_name(Family f);

// Lock-step family. Both curves must share grid size and dimension.
double lp_distance(const NormalizedCurve& x, const NormalizedCurve& y, double p);
double dcor_distance(const NormalizedCurve& x, const NormalizedCurve& y);

// Elastic family on point sequences (lengths may differ, dimensions must match).
double dtw_distance(PointView x, PointView y, GroundDistance ground = GroundDistance::Euclidean);
double frechet_distance(PointView x, PointView y, GroundDistance ground = GroundDistance::Euclidean);
double hausdorff_distance(PointView x, PointView y, GroundDistance ground = GroundDistance::Euclidean);

// Scalar/vector summaries.
double summary_value(const NormalizedCurve& x, SummaryFunctional summary, std::size_t dim);
std::vector<double> summary_vector(const NormalizedCurve& x, SummaryFunctional summary);
double svs_scalar_distance(const NormalizedCurve& x, const NormalizedCurve& y, SummaryFunctional summary,
                           std::size_t dim);
double svs_vector_distance(const NormalizedCurve& x, const NormalizedCurve& y, SummaryFunctional summary);
double measure_distance(const MeasureVector& a, const MeasureVector& b, const std::vector<std::string>& names);

double aitchison_distance(const Composition& c, const Composition& d);

double levenshtein_distance(const SymbolSequence& s, const SymbolSequence& t);
double hamming_distance(const SymbolSequence& s, const SymbolSequence& t);

/// Drops consecutive repeated symbols ("AAB" -> "AB").
SymbolSequence collapse_runs(const SymbolSequence& s);

} // namespace mfc
