#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfc {

/// Read-only view of a row-major T x d table of points in R^d.
struct PointView {
    std::span<const double> data;
    std::size_t dims = 0;

    [[nodiscard]] std::size_t size() const { return dims == 0 ? 0 : data.size() / dims; }
    [[nodiscard]] std::span<const double> operator[](std::size_t row) const {
        return data.subspan(row * dims, dims);
    }
};

/// A d-variate function sampled on a strictly increasing time grid (ms).
class Curve {
public:
    /// Validates: T >= 2, grid strictly increasing, values.size() == T*d, all finite.
    Curve(std::vector<double> grid, std::vector<double> values, std::size_t dims);

    [[nodiscard]] std::size_t size() const { return grid_.size(); }
    [[nodiscard]] std::size_t dims() const { return dims_; }
    [[nodiscard]] const std::vector<double>& grid() const { return grid_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] double at(std::size_t row, std::size_t dim) const { return values_[row * dims_ + dim]; }
    [[nodiscard]] PointView points() const { return {values_, dims_}; }

private:
    std::vector<double> grid_;
    std::vector<double> values_;
    std::size_t dims_;
};

/// Values on the implicit equidistant grid {0, 1/(m-1), ..., 1}.
class NormalizedCurve {
public:
    NormalizedCurve(std::vector<double> values, std::size_t dims);

    [[nodiscard]] std::size_t size() const { return dims_ == 0 ? 0 : values_.size() / dims_; }
    [[nodiscard]] std::size_t dims() const { return dims_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] double at(std::size_t row, std::size_t dim) const { return values_[row * dims_ + dim]; }
    [[nodiscard]] PointView points() const { return {values_, dims_}; }

private:
    std::vector<double> values_;
    std::size_t dims_;
};

/// Mouse-movement measures extracted from a raw trajectory, plus any externally
/// supplied (e.g. personalized) values keyed by name.
struct MeasureVector {
    double response_time = 0.0;
    double initiation_time = 0.0;
    double total_distance = 0.0;
    double max_velocity = 0.0;
    double max_acceleration = 0.0;
    double hovers = 0.0;
    double hover_time = 0.0;
    double x_flips = 0.0;
    double y_flips = 0.0;
    double length = 0.0;
    std::map<std::string, double> external;

    /// Accepts the canonical names above, "RT" for response_time, and any external
    /// name. External values take precedence over extracted ones of the same name.
    [[nodiscard]] std::optional<double> get(const std::string& name) const;
    void set_external(const std::string& name, double value);
    bool operator==(const MeasureVector&) const = default;
};

/// Names of the ten extracted measures, in canonical order.
const std::vector<std::string>& builtin_measure_names();

struct AoiBox {
    char symbol = 'A';
    double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
    bool operator==(const AoiBox&) const = default;
};

/// Ordered areas of interest over the first two coordinates; first match wins.
class AoiPartition {
public:
    AoiPartition(std::vector<AoiBox> boxes, char fallback);

    [[nodiscard]] const std::vector<AoiBox>& boxes() const { return boxes_; }
    [[nodiscard]] char fallback() const { return fallback_; }
    /// Index of the first box containing the point, or boxes().size() for the fallback.
    [[nodiscard]] std::size_t locate(double x, double y) const;
    [[nodiscard]] char symbol_of(std::size_t part) const;
    bool operator==(const AoiPartition&) const = default;

private:
    std::vector<AoiBox> boxes_;
    char fallback_;
};

using SymbolSequence = std::string;

/// Parts strictly positive, summing to one.
class Composition {
public:
    explicit Composition(std::vector<double> parts);
    [[nodiscard]] const std::vector<double>& parts() const { return parts_; }
    [[nodiscard]] std::size_t size() const { return parts_.size(); }

private:
    std::vector<double> parts_;
};

struct Viewport {
    double width = 0;
    double height = 0;
};

Curve standardize(const Curve& curve, Viewport viewport);

/// Per-dimension min-max scaling to [0,1] with bounds shared across a question;
/// used when no viewport was recorded. Constant dimensions map to 0.
Curve standardize_minmax(const Curve& curve, std::span<const double> lower, std::span<const double> upper);

/// Central differences on the (nonuniform) grid, one-sided at the endpoints.
/// Order 2 applies the first-order scheme twice. Requires T >= 3 (order 1) or T >= 5 (order 2).
Curve finite_derivative(const Curve& curve, int order);

/// Same scheme without the length preconditions (T >= 2); used where a short
/// trajectory must still yield a value, e.g. measure extraction.
Curve finite_derivative_unchecked(const Curve& curve, int order);

/// Affine rescale of time to [0,1] and linear interpolation at m equidistant points.
NormalizedCurve time_normalize(const Curve& curve, std::size_t m = 101);

struct MeasureSettings {
    double hover_threshold_ms = 1000.0;
    double flip_threshold = 0.0;
};

MeasureVector extract_measures(const Curve& curve, const MeasureSettings& settings = {});

SymbolSequence aoi_symbols(PointView points, const AoiPartition& partition);

enum class FallbackPart { Auto, Always, Never };

/// Time-share composition over the partition's areas with half-count smoothing.
/// Auto includes the fallback area as an extra part only if some point lands outside every box.
Composition aoi_composition(const NormalizedCurve& normalized, const AoiPartition& partition,
                            FallbackPart mode = FallbackPart::Auto);

} // namespace mfc
