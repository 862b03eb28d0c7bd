#include "mfc/semimetrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "mfc/common.hpp"
#include "mfc/error.hpp"

namespace mfc {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

int parse_dim_suffix(const std::string& suffix, const std::string& full) {
    if (suffix == "x") return 0;
    if (suffix == "y") return 1;
    if (suffix == "z") return 2;
    int value = 0;
    auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), value);
    if (ec != std::errc{} || ptr != suffix.data() + suffix.size() || value < 1)
        throw InvalidInput("bad dimension suffix in semi-metric '" + full + "'");
    return value - 1;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double ground_distance(std::span<const double> a, std::span<const double> b, GroundDistance g) {
    double s = 0.0;
    if (g == GroundDistance::Manhattan) {
        for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
        return s;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

void check_sequences(PointView x, PointView y, const char* what) {
    if (x.size() == 0 || y.size() == 0) throw InvalidInput(std::string(what) + ": empty sequence");
    if (x.dims != y.dims) throw InvalidInput(std::string(what) + ": dimension mismatch");
}

void check_same_grid(const NormalizedCurve& x, const NormalizedCurve& y, const char* what) {
    if (x.size() != y.size() || x.dims() != y.dims())
        throw InvalidInput(std::string(what) + ": curves differ in grid size or dimension");
}

double trapezoid_weight(std::size_t j, std::size_t m) {
    const double h = 1.0 / static_cast<double>(m - 1);
    return (j == 0 || j + 1 == m) ? 0.5 * h : h;
}

} // namespace

std::string family_name(Family f) {
    switch (f) {
    case Family::LockStep: return "lock-step";
    case Family::Elastic: return "elastic";
    case Family::Summary: return "svs";
    case Family::Composition: return "composition";
    case Family::SymbolSequence: return "symbol-sequence";
    }
    return "unknown";
}

Family SemiMetricSpec::family() const {
    switch (kind) {
    case MetricKind::Lp:
    case MetricKind::DistanceCorrelation: return Family::LockStep;
    case MetricKind::Dtw:
    case MetricKind::Frechet:
    case MetricKind::Hausdorff: return Family::Elastic;
    case MetricKind::SummaryScalar:
    case MetricKind::SummaryVector:
    case MetricKind::Measure: return Family::Summary;
    case MetricKind::Aitchison: return Family::Composition;
    case MetricKind::Levenshtein:
    case MetricKind::Hamming: return Family::SymbolSequence;
    }
    return Family::LockStep;
}

std::string SemiMetricSpec::key() const {
    const Family f = family();
    if (kind == MetricKind::Measure) return name;
    if (f == Family::Composition || f == Family::SymbolSequence) return collapse_repeats ? name + "@collapsed" : name;
    std::string k = name + "@a" + std::to_string(order);
    if (f == Family::Elastic && ground == GroundDistance::Manhattan) k += "/manhattan";
    return k;
}

std::uint64_t SemiMetricSpec::fingerprint() const {
    Fnv1a h;
    h.add(std::string_view("semimetric/v1"));
    h.add(key());
    h.add(static_cast<std::uint64_t>(kind));
    h.add(p);
    h.add(static_cast<std::uint64_t>(summary));
    h.add(static_cast<std::uint64_t>(static_cast<std::int64_t>(dim)));
    for (const auto& m : measures) h.add(m);
    return h.value();
}

SemiMetricSpec parse_semimetric(const std::string& name, int order, GroundDistance ground, bool collapse_repeats) {
    if (order < 0 || order > 2) throw InvalidInput("derivative order must be 0, 1 or 2 for '" + name + "'");
    SemiMetricSpec s;
    s.name = name;
    s.order = order;
    s.ground = ground;

    if (starts_with(name, "measure:")) {
        s.kind = MetricKind::Measure;
        s.order = 0;
        const std::string list = name.substr(8);
        if (list.empty()) throw InvalidInput("measure semi-metric without measure names");
        for (const auto& part : split(list, '+')) {
            if (part.empty()) throw InvalidInput("empty measure name in '" + name + "'");
            if (part == "flips2d") {
                s.measures.emplace_back("x_flips");
                s.measures.emplace_back("y_flips");
            } else {
                s.measures.push_back(part);
            }
        }
        return s;
    }
    if (name.size() > 1 && name[0] == 'L') {
        double p = 0.0;
        auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), p);
        if (ec != std::errc{} || ptr != name.data() + name.size())
            throw InvalidInput("unknown semi-metric '" + name + "'");
        if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidInput("L^p distance needs p >= 1");
        s.kind = MetricKind::Lp;
        s.p = p;
        return s;
    }
    if (name == "dcor" || name == "correlation") {
        s.kind = MetricKind::DistanceCorrelation;
        return s;
    }
    if (name == "dtw") {
        s.kind = MetricKind::Dtw;
        return s;
    }
    if (name == "frechet") {
        s.kind = MetricKind::Frechet;
        return s;
    }
    if (name == "hausdorff") {
        s.kind = MetricKind::Hausdorff;
        return s;
    }
    if (name == "aitchison" || name == "levenshtein" || name == "hamming") {
        if (order != 0) throw InvalidInput("'" + name + "' is only defined for derivative order 0");
        s.kind = name == "aitchison" ? MetricKind::Aitchison
                 : name == "levenshtein" ? MetricKind::Levenshtein
                                         : MetricKind::Hamming;
        s.collapse_repeats = collapse_repeats && s.kind == MetricKind::Levenshtein;
        return s;
    }

    const auto dash = name.find('-');
    const std::string head = name.substr(0, dash);
    if (head == "mean" || head == "globMax" || head == "globMin" || head == "globRange") {
        s.summary = head == "mean"      ? SummaryFunctional::Mean
                    : head == "globMax" ? SummaryFunctional::Max
                    : head == "globMin" ? SummaryFunctional::Min
                                        : SummaryFunctional::Range;
        if (dash == std::string::npos) {
            s.kind = MetricKind::SummaryVector;
        } else {
            s.kind = MetricKind::SummaryScalar;
            s.dim = parse_dim_suffix(name.substr(dash + 1), name);
        }
        return s;
    }
    throw InvalidInput("unknown semi-metric '" + name + "'");
}

double lp_distance(const NormalizedCurve& x, const NormalizedCurve& y, double p) {
    check_same_grid(x, y, "L^p distance");
    if (!(p >= 1.0)) throw InvalidInput("L^p distance needs p >= 1");
    const std::size_t m = x.size();
    const std::size_t d = x.dims();
    const auto& a = x.values();
    const auto& b = y.values();
    double integral = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double f = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = std::abs(a[j * d + k] - b[j * d + k]);
            f += p == 1.0 ? diff : (p == 2.0 ? diff * diff : std::pow(diff, p));
        }
        integral += trapezoid_weight(j, m) * f;
    }
    if (p == 1.0) return integral;
    if (p == 2.0) return std::sqrt(integral);
    return std::pow(integral, 1.0 / p);
}

namespace {

// Double-centered Euclidean distance matrix of the m grid points.
std::vector<double> centered_distances(const NormalizedCurve& x) {
    const std::size_t m = x.size();
    const PointView pts = x.points();
    std::vector<double> a(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            a[i * m + j] = a[j * m + i] = ground_distance(pts[i], pts[j], GroundDistance::Euclidean);
    std::vector<double> row(m, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) row[i] += a[i * m + j];
        grand += row[i];
        row[i] /= static_cast<double>(m);
    }
    grand /= static_cast<double>(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) a[i * m + j] += grand - row[i] - row[j];
    return a;
}

double mean_product(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s / static_cast<double>(a.size());
}

} // namespace

double dcor_distance(const NormalizedCurve& x, const NormalizedCurve& y) {
    check_same_grid(x, y, "distance correlation");
    const auto A = centered_distances(x);
    const auto B = centered_distances(y);
    const double vxy = mean_product(A, B);
    const double vxx = mean_product(A, A);
    const double vyy = mean_product(B, B);
    const double denom = vxx * vyy;
    if (!(denom > 0.0)) return 1.0;
    const double r2 = std::clamp(vxy / std::sqrt(denom), 0.0, 1.0);
    return 1.0 - std::sqrt(r2);
}

double dtw_distance(PointView x, PointView y, GroundDistance ground) {
    check_sequences(x, y, "DTW");
    const std::size_t n = x.size();
    const std::size_t m = y.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double c = ground_distance(x[i - 1], y[j - 1], ground);
            cur[j] = c + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double frechet_distance(PointView x, PointView y, GroundDistance ground) {
    check_sequences(x, y, "Frechet distance");
    const std::size_t n = x.size();
    const std::size_t m = y.size();
    std::vector<double> prev(m), cur(m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c = ground_distance(x[i], y[j], ground);
            double reach;
            if (i == 0 && j == 0) reach = 0.0;
            else if (i == 0) reach = cur[j - 1];
            else if (j == 0) reach = prev[0];
            else reach = std::min({prev[j], cur[j - 1], prev[j - 1]});
            cur[j] = std::max(reach, c);
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

double hausdorff_distance(PointView x, PointView y, GroundDistance ground) {
    check_sequences(x, y, "Hausdorff distance");
    auto directed = [ground](PointView a, PointView b) {
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < b.size() && nearest > worst; ++j)
                nearest = std::min(nearest, ground_distance(a[i], b[j], ground));
            worst = std::max(worst, nearest);
        }
        return worst;
    };
    return std::max(directed(x, y), directed(y, x));
}

double summary_value(const NormalizedCurve& x, SummaryFunctional summary, std::size_t dim) {
    if (dim >= x.dims()) throw InvalidInput("summary dimension index out of range");
    const std::size_t m = x.size();
    double lo = x.at(0, dim), hi = lo, integral = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double v = x.at(j, dim);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        integral += trapezoid_weight(j, m) * v;
    }
    switch (summary) {
    case SummaryFunctional::Mean: return integral;
    case SummaryFunctional::Max: return hi;
    case SummaryFunctional::Min: return lo;
    case SummaryFunctional::Range: return hi - lo;
    }
    return 0.0;
}

std::vector<double> summary_vector(const NormalizedCurve& x, SummaryFunctional summary) {
    std::vector<double> out(x.dims());
    for (std::size_t k = 0; k < x.dims(); ++k) out[k] = summary_value(x, summary, k);
    return out;
}

double svs_scalar_distance(const NormalizedCurve& x, const NormalizedCurve& y, SummaryFunctional summary,
                           std::size_t dim) {
    return std::abs(summary_value(x, summary, dim) - summary_value(y, summary, dim));
}

double svs_vector_distance(const NormalizedCurve& x, const NormalizedCurve& y, SummaryFunctional summary) {
    if (x.dims() != y.dims()) throw InvalidInput("summary distance: dimension mismatch");
    const auto a = summary_vector(x, summary);
    const auto b = summary_vector(y, summary);
    return ground_distance(a, b, GroundDistance::Euclidean);
}

double measure_distance(const MeasureVector& a, const MeasureVector& b, const std::vector<std::string>& names) {
    if (names.empty()) throw InvalidInput("measure distance needs at least one measure name");
    double s = 0.0;
    for (const auto& n : names) {
        const auto va = a.get(n);
        const auto vb = b.get(n);
        if (!va || !vb) throw InvalidInput("measure '" + n + "' is missing");
        const double d = *va - *vb;
        s += d * d;
    }
    return std::sqrt(s);
}

double aitchison_distance(const Composition& c, const Composition& d) {
    if (c.size() != d.size()) throw InvalidInput("Aitchison distance: part count mismatch");
    const std::size_t m = c.size();
    std::vector<double> lc(m), ld(m);
    for (std::size_t j = 0; j < m; ++j) {
        lc[j] = std::log(c.parts()[j]);
        ld[j] = std::log(d.parts()[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
            const double diff = (lc[j] - lc[k]) - (ld[j] - ld[k]);
            s += diff * diff;
        }
    }
    return std::sqrt(s / (2.0 * static_cast<double>(m)));
}

double levenshtein_distance(const SymbolSequence& s, const SymbolSequence& t) {
    const std::size_t n = s.size();
    const std::size_t m = t.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]);
}

double hamming_distance(const SymbolSequence& s, const SymbolSequence& t) {
    if (s.size() != t.size()) throw InvalidInput("Hamming distance needs sequences of equal length");
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.size(); ++i) count += s[i] != t[i] ? 1 : 0;
    return static_cast<double>(count);
}

SymbolSequence collapse_runs(const SymbolSequence& s) {
    SymbolSequence out;
    for (char c : s)
        if (out.empty() || out.back() != c) out.push_back(c);
    return out;
}

} // namespace mfc
