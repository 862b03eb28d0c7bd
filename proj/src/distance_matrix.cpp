#include "mfc/distance_matrix.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mfc/common.hpp"
#include "mfc/error.hpp"

namespace mfc {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'C', 'D', 'I', 'S', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 4);
}

bool get_u64(std::istream& in, std::uint64_t& v) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) return false;
    v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return true;
}

bool get_u32(std::istream& in, std::uint32_t& v) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) return false;
    v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return true;
}

const SymbolSequence& require(const std::optional<SymbolSequence>& s) {
    if (!s) throw InvalidInput("symbol sequences need an AOI partition");
    return *s;
}

} // namespace

DistanceMatrix::DistanceMatrix(SemiMetricSpec spec, std::vector<std::string> ids, std::vector<double> entries)
    : spec_(std::move(spec)), ids_(std::move(ids)), entries_(std::move(entries)) {
    if (entries_.size() != ids_.size() * ids_.size()) throw InvalidInput("distance matrix is not n x n");
}

double evaluate(const SemiMetricSpec& spec, const LabeledSample& a, const LabeledSample& b) {
    const auto order = static_cast<std::size_t>(spec.order);
    if (order >= a.normalized.size() || order >= b.normalized.size())
        throw InvalidInput("sample lacks derivative order " + std::to_string(spec.order));
    const NormalizedCurve& x = a.normalized[order];
    const NormalizedCurve& y = b.normalized[order];
    switch (spec.kind) {
    case MetricKind::Lp: return lp_distance(x, y, spec.p);
    case MetricKind::DistanceCorrelation: return dcor_distance(x, y);
    case MetricKind::Dtw: return dtw_distance(x.points(), y.points(), spec.ground);
    case MetricKind::Frechet: return frechet_distance(x.points(), y.points(), spec.ground);
    case MetricKind::Hausdorff: return hausdorff_distance(x.points(), y.points(), spec.ground);
    case MetricKind::SummaryScalar:
        return svs_scalar_distance(x, y, spec.summary, static_cast<std::size_t>(spec.dim));
    case MetricKind::SummaryVector: return svs_vector_distance(x, y, spec.summary);
    case MetricKind::Measure: return measure_distance(a.measures, b.measures, spec.measures);
    case MetricKind::Aitchison:
        if (!a.composition || !b.composition) throw InvalidInput("compositions need an AOI partition");
        return aitchison_distance(*a.composition, *b.composition);
    case MetricKind::Levenshtein:
        if (spec.collapse_repeats)
            return levenshtein_distance(collapse_runs(require(a.symbols_raw)), collapse_runs(require(b.symbols_raw)));
        return levenshtein_distance(require(a.symbols_raw), require(b.symbols_raw));
    case MetricKind::Hamming: return hamming_distance(require(a.symbols_normalized), require(b.symbols_normalized));
    }
    throw InvariantViolation("unhandled semi-metric kind");
}

DistanceMatrix pairwise_matrix(const Dataset& dataset, const SemiMetricSpec& spec, std::size_t jobs) {
    const std::size_t n = dataset.size();
    std::vector<double> entries(n * n, 0.0);
    parallel_for(n, jobs, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d;
            try {
                d = evaluate(spec, dataset.samples[i], dataset.samples[j]);
            } catch (const InvalidInput& e) {
                throw InvalidInput(spec.key() + " on pair (" + dataset.samples[i].key() + ", " +
                                   dataset.samples[j].key() + "): " + e.what());
            }
            if (!(d >= 0.0) || !std::isfinite(d))
                throw InvariantViolation(spec.key() + " produced an invalid distance on pair (" +
                                         dataset.samples[i].key() + ", " + dataset.samples[j].key() + ")");
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    });
    return DistanceMatrix(spec, dataset.ids(), std::move(entries));
}

std::filesystem::path cache_path(const std::filesystem::path& dir, const SemiMetricSpec& spec,
                                 std::uint64_t dataset_fingerprint) {
    std::string stem;
    for (char c : spec.key()) stem.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' ? c : '_');
    return dir / (stem + "-" + to_hex(spec.fingerprint()).substr(0, 8) + "-" + to_hex(dataset_fingerprint) + ".dm");
}

void write_cache(const std::filesystem::path& path, const DistanceMatrix& m, std::uint64_t dataset_fingerprint) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write cache " + tmp.string());
        out.write(kMagic, sizeof kMagic);
        put_u32(out, kVersion);
        put_u64(out, m.spec().fingerprint());
        put_u64(out, dataset_fingerprint);
        const std::size_t n = m.size();
        put_u64(out, n);
        for (const auto& id : m.ids()) {
            put_u32(out, static_cast<std::uint32_t>(id.size()));
            out.write(id.data(), static_cast<std::streamsize>(id.size()));
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) put_u64(out, std::bit_cast<std::uint64_t>(m(i, j)));
        if (!out) throw DataError("failed writing cache " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::optional<DistanceMatrix> read_cache(const std::filesystem::path& path, const SemiMetricSpec& spec,
                                         std::uint64_t dataset_fingerprint, const std::vector<std::string>& ids) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) return std::nullopt;
    std::uint32_t version = 0;
    std::uint64_t spec_fp = 0, data_fp = 0, n = 0;
    if (!get_u32(in, version) || version != kVersion) return std::nullopt;
    if (!get_u64(in, spec_fp) || spec_fp != spec.fingerprint()) return std::nullopt;
    if (!get_u64(in, data_fp) || data_fp != dataset_fingerprint) return std::nullopt;
    if (!get_u64(in, n) || n != ids.size()) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t len = 0;
        if (!get_u32(in, len) || len > (1u << 20)) return std::nullopt;
        std::string id(len, '\0');
        if (!in.read(id.data(), len) || id != ids[i]) return std::nullopt;
    }
    std::vector<double> entries(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            std::uint64_t bits = 0;
            if (!get_u64(in, bits)) return std::nullopt;
            entries[i * n + j] = entries[j * n + i] = std::bit_cast<double>(bits);
        }
    }
    return DistanceMatrix(spec, ids, std::move(entries));
}

void write_csv(const std::filesystem::path& path, const DistanceMatrix& m) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out.precision(17);
    out << "id";
    for (const auto& id : m.ids()) out << ',' << id;
    out << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
        out << m.ids()[i];
        for (std::size_t j = 0; j < m.size(); ++j) out << ',' << m(i, j);
        out << '\n';
    }
}

DistanceMatrix load_or_compute(const std::filesystem::path& cache_dir, const Dataset& dataset,
                               const SemiMetricSpec& spec, std::size_t jobs, bool* cache_hit) {
    const std::uint64_t fp = dataset.fingerprint();
    const auto path = cache_path(cache_dir, spec, fp);
    if (auto cached = read_cache(path, spec, fp, dataset.ids())) {
        if (cache_hit) *cache_hit = true;
        return std::move(*cached);
    }
    if (cache_hit) *cache_hit = false;
    DistanceMatrix m = pairwise_matrix(dataset, spec, jobs);
    write_cache(path, m, fp);
    return m;
}

} // namespace mfc
