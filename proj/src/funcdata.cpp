#include "mfc/funcdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfc/error.hpp"

namespace mfc {

namespace {

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

Curve::Curve(std::vector<double> grid, std::vector<double> values, std::size_t dims)
    : grid_(std::move(grid)), values_(std::move(values)), dims_(dims) {
    if (dims_ == 0) throw InvalidInput("curve must have at least one dimension");
    if (grid_.size() < 2) throw InvalidInput("curve needs at least two samples");
    if (values_.size() != grid_.size() * dims_)
        throw InvalidInput("curve value table does not have T x d entries");
    for (std::size_t j = 1; j < grid_.size(); ++j) {
        if (!(grid_[j] > grid_[j - 1]))
            throw InvalidInput("curve grid is not strictly increasing at sample " + std::to_string(j));
    }
    if (!all_finite(grid_) || !all_finite(values_)) throw InvalidInput("curve contains non-finite values");
}

NormalizedCurve::NormalizedCurve(std::vector<double> values, std::size_t dims)
    : values_(std::move(values)), dims_(dims) {
    if (dims_ == 0) throw InvalidInput("normalized curve must have at least one dimension");
    if (values_.size() % dims_ != 0) throw InvalidInput("normalized curve table is ragged");
    if (values_.size() / dims_ < 2) throw InvalidInput("normalized curve needs at least two grid points");
    if (!all_finite(values_)) throw InvalidInput("normalized curve contains non-finite values");
}

std::optional<double> MeasureVector::get(const std::string& name) const {
    if (auto it = external.find(name); it != external.end()) return it->second;
    if (name == "response_time" || name == "RT") return response_time;
    if (name == "initiation_time") return initiation_time;
    if (name == "total_distance") return total_distance;
    if (name == "max_velocity") return max_velocity;
    if (name == "max_acceleration") return max_acceleration;
    if (name == "hovers") return hovers;
    if (name == "hover_time") return hover_time;
    if (name == "x_flips") return x_flips;
    if (name == "y_flips") return y_flips;
    if (name == "length") return length;
    return std::nullopt;
}

void MeasureVector::set_external(const std::string& name, double value) {
    if (!std::isfinite(value)) throw InvalidInput("measure '" + name + "' is not finite");
    external[name] = value;
}

const std::vector<std::string>& builtin_measure_names() {
    static const std::vector<std::string> names{
        "response_time", "initiation_time", "total_distance", "max_velocity", "max_acceleration",
        "hovers",        "hover_time",      "x_flips",        "y_flips",      "length"};
    return names;
}

AoiPartition::AoiPartition(std::vector<AoiBox> boxes, char fallback)
    : boxes_(std::move(boxes)), fallback_(fallback) {
    if (boxes_.empty()) throw InvalidInput("AOI partition needs at least one box");
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
        const auto& b = boxes_[i];
        if (!(b.x1 > b.x0) || !(b.y1 > b.y0))
            throw InvalidInput(std::string("AOI box '") + b.symbol + "' has non-positive area");
        if (b.symbol == fallback_) throw InvalidInput("AOI symbol collides with the fallback symbol");
        for (std::size_t j = 0; j < i; ++j) {
            if (boxes_[j].symbol == b.symbol)
                throw InvalidInput(std::string("duplicate AOI symbol '") + b.symbol + "'");
        }
    }
}

std::size_t AoiPartition::locate(double x, double y) const {
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
        const auto& b = boxes_[i];
        if (x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1) return i;
    }
    return boxes_.size();
}

char AoiPartition::symbol_of(std::size_t part) const {
    return part < boxes_.size() ? boxes_[part].symbol : fallback_;
}

Composition::Composition(std::vector<double> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw InvalidInput("composition needs at least one part");
    double sum = 0.0;
    for (double p : parts_) {
        if (!(p > 0.0) || !std::isfinite(p)) throw InvalidInput("composition parts must be positive");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidInput("composition parts must sum to one");
}

Curve standardize(const Curve& curve, Viewport viewport) {
    if (!(viewport.width > 0.0) || !(viewport.height > 0.0))
        throw InvalidInput("viewport dimensions must be positive");
    std::vector<double> values = curve.values();
    const std::size_t d = curve.dims();
    for (std::size_t j = 0; j < curve.size(); ++j) {
        values[j * d] /= viewport.width;
        if (d > 1) values[j * d + 1] /= viewport.height;
    }
    return Curve(curve.grid(), std::move(values), d);
}

Curve standardize_minmax(const Curve& curve, std::span<const double> lower, std::span<const double> upper) {
    const std::size_t d = curve.dims();
    if (lower.size() != d || upper.size() != d) throw InvalidInput("min-max bounds do not match curve dimension");
    std::vector<double> values = curve.values();
    for (std::size_t j = 0; j < curve.size(); ++j) {
        for (std::size_t k = 0; k < d; ++k) {
            const double span = upper[k] - lower[k];
            double& v = values[j * d + k];
            v = span > 0.0 ? (v - lower[k]) / span : 0.0;
        }
    }
    return Curve(curve.grid(), std::move(values), d);
}

namespace {

std::vector<double> first_difference(const std::vector<double>& grid, const std::vector<double>& values,
                                     std::size_t d) {
    const std::size_t T = grid.size();
    std::vector<double> out(values.size());
    for (std::size_t j = 0; j < T; ++j) {
        const std::size_t lo = j == 0 ? 0 : j - 1;
        const std::size_t hi = j + 1 == T ? T - 1 : j + 1;
        const double dt = grid[hi] - grid[lo];
        for (std::size_t k = 0; k < d; ++k) out[j * d + k] = (values[hi * d + k] - values[lo * d + k]) / dt;
    }
    return out;
}

} // namespace

Curve finite_derivative_unchecked(const Curve& curve, int order) {
    if (order < 1 || order > 2) throw InvalidInput("derivative order must be 1 or 2");
    std::vector<double> v = first_difference(curve.grid(), curve.values(), curve.dims());
    if (order == 2) v = first_difference(curve.grid(), v, curve.dims());
    return Curve(curve.grid(), std::move(v), curve.dims());
}

Curve finite_derivative(const Curve& curve, int order) {
    if (order < 1 || order > 2) throw InvalidInput("derivative order must be 1 or 2");
    const std::size_t need = order == 1 ? 3 : 5;
    if (curve.size() < need)
        throw InvalidInput("curve of length " + std::to_string(curve.size()) + " is too short for derivative order " +
                           std::to_string(order));
    return finite_derivative_unchecked(curve, order);
}

NormalizedCurve time_normalize(const Curve& curve, std::size_t m) {
    if (m < 2) throw InvalidInput("normalization grid needs at least two points");
    const auto& grid = curve.grid();
    const std::size_t T = grid.size();
    const std::size_t d = curve.dims();
    const double t0 = grid.front();
    const double span = grid.back() - t0;

    std::vector<double> out(m * d);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (i == 0 || i + 1 == m) {
            const std::size_t src = i == 0 ? 0 : T - 1;
            for (std::size_t k = 0; k < d; ++k) out[i * d + k] = curve.at(src, k);
            continue;
        }
        const double q = t0 + span * static_cast<double>(i) / static_cast<double>(m - 1);
        while (seg + 2 < T && grid[seg + 1] < q) ++seg;
        const double a = grid[seg];
        const double b = grid[seg + 1];
        const double w = (q - a) / (b - a);
        for (std::size_t k = 0; k < d; ++k) {
            const double va = curve.at(seg, k);
            const double vb = curve.at(seg + 1, k);
            out[i * d + k] = w == 0.0 ? va : (w == 1.0 ? vb : va + w * (vb - va));
        }
    }
    return NormalizedCurve(std::move(out), d);
}

MeasureVector extract_measures(const Curve& curve, const MeasureSettings& settings) {
    MeasureVector m;
    const auto& t = curve.grid();
    const std::size_t T = curve.size();
    const std::size_t d = curve.dims();
    const PointView pts = curve.points();

    m.response_time = t.back() - t.front();
    m.length = static_cast<double>(T);

    auto moved = [&](std::size_t j) {
        for (std::size_t k = 0; k < d; ++k)
            if (pts[j][k] != pts[j - 1][k]) return true;
        return false;
    };

    m.initiation_time = m.response_time;
    for (std::size_t j = 1; j < T; ++j) {
        if (moved(j)) {
            m.initiation_time = t[j] - t.front();
            break;
        }
    }

    for (std::size_t j = 1; j < T; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double dx = pts[j][k] - pts[j - 1][k];
            s += dx * dx;
        }
        m.total_distance += std::sqrt(s);
    }

    auto max_norm = [&](const Curve& c) {
        double best = 0.0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += c.at(j, k) * c.at(j, k);
            best = std::max(best, std::sqrt(s));
        }
        return best;
    };
    m.max_velocity = max_norm(finite_derivative_unchecked(curve, 1));
    m.max_acceleration = max_norm(finite_derivative_unchecked(curve, 2));

    // Hovers: maximal runs of identical consecutive positions.
    std::size_t run_start = 0;
    for (std::size_t j = 1; j <= T; ++j) {
        if (j < T && !moved(j)) continue;
        const double duration = t[j - 1] - t[run_start];
        if (j - 1 > run_start && duration >= settings.hover_threshold_ms) {
            m.hovers += 1.0;
            m.hover_time += duration;
        }
        run_start = j;
    }

    auto flips = [&](std::size_t dim) {
        double count = 0.0;
        int last_sign = 0;
        for (std::size_t j = 1; j < T; ++j) {
            const double delta = pts[j][dim] - pts[j - 1][dim];
            if (!(std::abs(delta) > settings.flip_threshold)) continue;
            const int sign = delta > 0 ? 1 : -1;
            if (last_sign != 0 && sign != last_sign) count += 1.0;
            last_sign = sign;
        }
        return count;
    };
    m.x_flips = flips(0);
    m.y_flips = d > 1 ? flips(1) : 0.0;
    return m;
}

SymbolSequence aoi_symbols(PointView points, const AoiPartition& partition) {
    if (points.dims < 2) throw InvalidInput("AOI lookup needs at least two coordinates");
    SymbolSequence out;
    out.reserve(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        const auto p = points[j];
        out.push_back(partition.symbol_of(partition.locate(p[0], p[1])));
    }
    return out;
}

Composition aoi_composition(const NormalizedCurve& normalized, const AoiPartition& partition, FallbackPart mode) {
    if (normalized.dims() < 2) throw InvalidInput("AOI lookup needs at least two coordinates");
    const std::size_t boxes = partition.boxes().size();
    std::vector<double> counts(boxes + 1, 0.0);
    const PointView pts = normalized.points();
    for (std::size_t j = 0; j < pts.size(); ++j) counts[partition.locate(pts[j][0], pts[j][1])] += 1.0;

    bool with_fallback = mode == FallbackPart::Always || (mode == FallbackPart::Auto && counts[boxes] > 0.0);
    if (!with_fallback) counts.pop_back();

    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double denom = total + 0.5 * static_cast<double>(counts.size());
    std::vector<double> parts(counts.size());
    for (std::size_t j = 0; j < counts.size(); ++j) parts[j] = (counts[j] + 0.5) / denom;
    const double sum = std::accumulate(parts.begin(), parts.end(), 0.0);
    for (double& p : parts) p /= sum;
    return Composition(std::move(parts));
}

} // namespace mfc
