#include "mfc/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mfc/common.hpp"
#include "mfc/error.hpp"

namespace mfc {

namespace {

using json = nlohmann::json;

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// Reads a CSV with the exact expected header; calls row(fields, line_no) per data line.
template <class Fn>
void read_csv(const std::filesystem::path& path, const std::vector<std::string>& header, Fn row) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file, expected a header");
    if (split_csv(line) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw DataError(path.string() + ": expected header '" + expected + "'");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (fields.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields");
        row(fields, line_no);
    }
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

std::vector<std::string> Dataset::ids() const {
    std::vector<std::string> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.key());
    return out;
}

std::uint64_t Dataset::fingerprint() const {
    Fnv1a h;
    h.add(std::string_view("dataset/v1"));
    h.add(static_cast<std::uint64_t>(samples.size()));
    for (const auto& s : samples) {
        h.add(s.key());
        h.add(static_cast<std::uint64_t>(s.label));
        for (const auto& nc : s.normalized) {
            h.add(static_cast<std::uint64_t>(nc.size()));
            for (double v : nc.values()) h.add(v);
        }
        for (const auto& name : builtin_measure_names()) h.add(*s.measures.get(name));
        for (const auto& [name, v] : s.measures.external) {
            h.add(name);
            h.add(v);
        }
        h.add(s.symbols_raw.value_or(""));
        h.add(s.symbols_normalized.value_or(""));
        if (s.composition)
            for (double p : s.composition->parts()) h.add(p);
    }
    return h.value();
}

Dataset preprocess(const std::vector<RawRecord>& records, const std::map<SampleKey, int>& labels,
                   const std::map<SampleKey, std::map<std::string, double>>& external_measures,
                   const std::optional<AoiPartition>& aoi, const PreprocessSettings& settings,
                   const std::string& question_filter) {
    Dataset ds;
    ds.aoi = aoi;

    std::vector<const RawRecord*> selected;
    std::set<SampleKey> seen;
    for (const auto& r : records) {
        if (!question_filter.empty() && r.question != question_filter) continue;
        SampleKey key{r.id, r.question};
        if (!seen.insert(key).second) throw DataError("duplicate trajectory for " + r.id + "/" + r.question);
        if (!labels.contains(key)) {
            ++ds.skipped_unlabeled;
            continue;
        }
        selected.push_back(&r);
    }
    for (const auto& [key, label] : labels) {
        if (!question_filter.empty() && key.second != question_filter) continue;
        if (!seen.contains(key)) throw DataError("label without trajectory: " + key.first + "/" + key.second);
    }
    std::sort(selected.begin(), selected.end(), [](const RawRecord* a, const RawRecord* b) {
        return std::tie(a->question, a->id) < std::tie(b->question, b->id);
    });

    // Per-question coordinate bounds for the min-max fallback.
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> bounds;
    for (const auto* r : selected) {
        const std::size_t d = r->curve.dims();
        auto& [lo, hi] = bounds[r->question];
        if (lo.empty()) {
            lo.assign(d, std::numeric_limits<double>::infinity());
            hi.assign(d, -std::numeric_limits<double>::infinity());
        }
        if (lo.size() != d) throw DataError("mixed curve dimensions within question " + r->question);
        for (std::size_t j = 0; j < r->curve.size(); ++j) {
            for (std::size_t k = 0; k < d; ++k) {
                lo[k] = std::min(lo[k], r->curve.at(j, k));
                hi[k] = std::max(hi[k], r->curve.at(j, k));
            }
        }
    }

    int max_label = 0;
    for (const auto* r : selected) {
        const int label = labels.at({r->id, r->question});
        if (label < 1) throw DataError("label for " + r->id + "/" + r->question + " must be a class number >= 1");
        max_label = std::max(max_label, label);
    }
    ds.class_count = static_cast<std::size_t>(max_label);

    bool any_outside = false;
    for (const auto* r : selected) {
        try {
            const auto& [lo, hi] = bounds.at(r->question);
            Curve standardized = (settings.standardization == Standardization::Viewport && r->viewport)
                                     ? standardize(r->curve, *r->viewport)
                                     : standardize_minmax(r->curve, lo, hi);
            std::vector<NormalizedCurve> normalized;
            normalized.push_back(time_normalize(standardized, settings.grid_size));
            if (!settings.derivatives_after_normalization) {
                normalized.push_back(time_normalize(finite_derivative(standardized, 1), settings.grid_size));
                normalized.push_back(time_normalize(finite_derivative(standardized, 2), settings.grid_size));
            } else {
                std::vector<double> unit_grid(settings.grid_size);
                for (std::size_t i = 0; i < unit_grid.size(); ++i)
                    unit_grid[i] = static_cast<double>(i) / static_cast<double>(unit_grid.size() - 1);
                Curve on_unit(unit_grid, normalized[0].values(), normalized[0].dims());
                for (int a = 1; a <= 2; ++a)
                    normalized.emplace_back(finite_derivative(on_unit, a).values(), on_unit.dims());
            }

            MeasureVector measures = extract_measures(r->curve, settings.measures);
            if (auto it = external_measures.find({r->id, r->question}); it != external_measures.end())
                for (const auto& [name, value] : it->second) measures.set_external(name, value);

            LabeledSample s{r->id,
                            r->question,
                            r->curve,
                            standardized,
                            std::move(normalized),
                            std::move(measures),
                            labels.at({r->id, r->question}) - 1,
                            std::nullopt,
                            std::nullopt,
                            std::nullopt};
            if (aoi) {
                s.symbols_raw = aoi_symbols(s.standardized.points(), *aoi);
                s.symbols_normalized = aoi_symbols(s.normalized[0].points(), *aoi);
                any_outside = any_outside || s.symbols_normalized->find(aoi->fallback()) != std::string::npos;
            }
            ds.samples.push_back(std::move(s));
        } catch (const InvalidInput& e) {
            throw DataError("sample " + r->id + "/" + r->question + ": " + e.what());
        }
    }
    if (aoi) {
        const FallbackPart mode = any_outside ? FallbackPart::Always : FallbackPart::Never;
        for (auto& s : ds.samples) s.composition = aoi_composition(s.normalized[0], *aoi, mode);
    }
    return ds;
}

std::vector<RawRecord> read_trajectories(const std::filesystem::path& path) {
    struct Pending {
        std::string id, question;
        std::vector<double> t, xy;
        std::optional<Viewport> viewport;
    };
    std::vector<RawRecord> out;
    std::set<SampleKey> finished;
    std::optional<Pending> cur;

    auto flush = [&] {
        if (!cur) return;
        try {
            out.push_back(RawRecord{cur->id, cur->question, Curve(cur->t, cur->xy, 2), cur->viewport});
        } catch (const InvalidInput& e) {
            throw DataError(path.string() + ": trajectory " + cur->id + "/" + cur->question + ": " + e.what());
        }
        finished.insert({cur->id, cur->question});
        cur.reset();
    };

    read_csv(path, {"id", "question", "t_ms", "x", "y", "viewport_w", "viewport_h"},
             [&](const std::vector<std::string>& f, std::size_t line) {
                 if (!cur || cur->id != f[0] || cur->question != f[1]) {
                     flush();
                     if (finished.contains({f[0], f[1]}))
                         throw DataError(path.string() + ":" + std::to_string(line) + ": rows of " + f[0] + "/" +
                                         f[1] + " are not contiguous");
                     cur = Pending{f[0], f[1], {}, {}, std::nullopt};
                     if (!f[5].empty() && !f[6].empty()) {
                         const double w = parse_double(f[5], path, line);
                         const double h = parse_double(f[6], path, line);
                         if (w > 0 && h > 0) cur->viewport = Viewport{w, h};
                     }
                 }
                 cur->t.push_back(parse_double(f[2], path, line));
                 cur->xy.push_back(parse_double(f[3], path, line));
                 cur->xy.push_back(parse_double(f[4], path, line));
             });
    flush();
    return out;
}

std::map<SampleKey, int> read_labels(const std::filesystem::path& path) {
    std::map<SampleKey, int> out;
    read_csv(path, {"id", "question", "label"}, [&](const std::vector<std::string>& f, std::size_t line) {
        int label = 0;
        auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), label);
        if (ec != std::errc{} || ptr != f[2].data() + f[2].size() || label < 1)
            throw DataError(path.string() + ":" + std::to_string(line) + ": label must be an integer >= 1");
        if (!out.emplace(SampleKey{f[0], f[1]}, label).second)
            throw DataError(path.string() + ":" + std::to_string(line) + ": duplicate label");
    });
    return out;
}

std::map<SampleKey, std::map<std::string, double>> read_external_measures(const std::filesystem::path& path) {
    std::map<SampleKey, std::map<std::string, double>> out;
    read_csv(path, {"id", "question", "measure_name", "value"},
             [&](const std::vector<std::string>& f, std::size_t line) {
                 if (f[2].empty()) throw DataError(path.string() + ":" + std::to_string(line) + ": empty measure name");
                 out[{f[0], f[1]}][f[2]] = parse_double(f[3], path, line);
             });
    return out;
}

AoiPartition read_aoi(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        const json doc = json::parse(in);
        std::vector<AoiBox> boxes;
        for (const auto& a : doc.at("areas")) {
            const auto sym = a.at("symbol").get<std::string>();
            if (sym.size() != 1) throw DataError(path.string() + ": AOI symbols must be single characters");
            boxes.push_back(AoiBox{sym[0], a.at("x0").get<double>(), a.at("y0").get<double>(),
                                   a.at("x1").get<double>(), a.at("y1").get<double>()});
        }
        const auto fallback = doc.at("fallback").get<std::string>();
        if (fallback.size() != 1) throw DataError(path.string() + ": fallback must be a single character");
        return AoiPartition(std::move(boxes), fallback[0]);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    } catch (const InvalidInput& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_trajectories(const std::filesystem::path& path, const std::vector<RawRecord>& records) {
    auto out = open_output(path);
    out << "id,question,t_ms,x,y,viewport_w,viewport_h\n";
    for (const auto& r : records) {
        const std::string vw = r.viewport ? fmt(r.viewport->width) : "";
        const std::string vh = r.viewport ? fmt(r.viewport->height) : "";
        for (std::size_t j = 0; j < r.curve.size(); ++j)
            out << r.id << ',' << r.question << ',' << fmt(r.curve.grid()[j]) << ',' << fmt(r.curve.at(j, 0)) << ','
                << fmt(r.curve.at(j, 1)) << ',' << vw << ',' << vh << '\n';
    }
}

void write_labels(const std::filesystem::path& path, const std::map<SampleKey, int>& labels) {
    auto out = open_output(path);
    out << "id,question,label\n";
    for (const auto& [key, label] : labels) out << key.first << ',' << key.second << ',' << label << '\n';
}

void write_aoi(const std::filesystem::path& path, const AoiPartition& aoi) {
    json doc;
    doc["areas"] = json::array();
    for (const auto& b : aoi.boxes())
        doc["areas"].push_back({{"symbol", std::string(1, b.symbol)}, {"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}});
    doc["fallback"] = std::string(1, aoi.fallback());
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

void write_preprocessed(const std::filesystem::path& path, const Dataset& dataset) {
    json doc;
    doc["format"] = "mfclass-preprocessed";
    doc["version"] = 1;
    doc["class_count"] = dataset.class_count;
    doc["fingerprint"] = to_hex(dataset.fingerprint());
    doc["skipped_unlabeled"] = dataset.skipped_unlabeled;
    doc["samples"] = json::array();
    for (const auto& s : dataset.samples) {
        json js;
        js["id"] = s.id;
        js["question"] = s.question;
        js["label"] = s.label + 1;
        js["grid_size"] = s.normalized[0].size();
        js["normalized"] = json::array();
        for (const auto& nc : s.normalized) js["normalized"].push_back(nc.values());
        json m;
        for (const auto& name : builtin_measure_names()) m[name] = *s.measures.get(name);
        for (const auto& [name, v] : s.measures.external) m[name] = v;
        js["measures"] = m;
        if (s.symbols_normalized) js["symbols"] = *s.symbols_normalized;
        if (s.composition) js["composition"] = s.composition->parts();
        doc["samples"].push_back(std::move(js));
    }
    auto out = open_output(path);
    out << doc.dump() << '\n';
}

} // namespace mfc
