#include "mfc/config.hpp"

#include <fstream>
#include <set>

#include "mfc/common.hpp"
#include "mfc/error.hpp"

namespace mfc {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

GroundDistance parse_ground(const std::string& s) {
    if (s == "euclidean") return GroundDistance::Euclidean;
    if (s == "manhattan") return GroundDistance::Manhattan;
    throw ConfigError("roster: unknown ground distance '" + s + "' (expected euclidean or manhattan)");
}

} // namespace

std::filesystem::path RunConfig::resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path;
    return base_dir / path;
}

std::filesystem::path RunConfig::cache_dir() const { return cache.empty() ? output_dir() / "cache" : resolve(cache); }

std::vector<RosterEntry> default_roster(bool with_aoi) {
    std::vector<RosterEntry> r;
    for (const char* n : {"L1", "L2", "L4", "dcor", "dtw", "frechet", "hausdorff", "mean", "globMax-x", "globMax-y",
                          "globMax", "globMin-x", "globMin-y", "globMin", "globRange-x", "globRange-y", "globRange"})
        r.push_back({n, 0});
    for (const char* n : {"L2", "dcor", "mean", "globMax", "globMax-y", "globRange-y"}) r.push_back({n, 1});
    for (const char* n : {"globMax", "globMax-y"}) r.push_back({n, 2});
    for (const char* n : {"RT", "initiation_time", "total_distance", "max_velocity", "max_acceleration", "hovers",
                          "hover_time", "flips2d", "length"})
        r.push_back({std::string("measure:") + n, 0});
    if (with_aoi) {
        r.push_back({"aitchison", 0});
        r.push_back({"levenshtein", 0, "euclidean", true});
        r.push_back({"hamming", 0});
    }
    return r;
}

RunConfig default_config() {
    RunConfig c;
    c.data.trajectories = "trajectories.csv";
    c.data.labels = "labels.csv";
    c.roster = default_roster(false);
    c.ensemble.type2_measures = builtin_measure_names();
    return c;
}

json config_to_json(const RunConfig& c) {
    json roster = json::array();
    for (const auto& e : c.roster)
        roster.push_back(json{{"name", e.name}, {"a", e.order}, {"ground", e.ground}, {"collapse", e.collapse}});
    const auto& g = c.ensemble.grid;
    return json{
        {"data",
         {{"trajectories", c.data.trajectories},
          {"labels", c.data.labels},
          {"aoi", c.data.aoi},
          {"measures", c.data.measures},
          {"question", c.data.question}}},
        {"preprocess",
         {{"grid_size", c.preprocess.grid_size},
          {"hover_threshold_ms", c.preprocess.measures.hover_threshold_ms},
          {"flip_threshold", c.preprocess.measures.flip_threshold},
          {"standardization", c.preprocess.standardization == Standardization::Viewport ? "viewport" : "minmax"},
          {"derivatives_after_normalization", c.preprocess.derivatives_after_normalization}}},
        {"roster", roster},
        {"weak",
         {{"bases", c.weak.bases},
          {"kernel", c.weak.kernel},
          {"k_grid", c.weak.k_grid},
          {"h_quantiles", c.weak.h_quantiles}}},
        {"ensemble",
         {{"gate", c.ensemble.gate == GateMode::Outer ? "outer" : "inner"},
          {"gate_threshold", c.ensemble.gate_threshold},
          {"super_learners", c.ensemble.super_learners},
          {"rf_trees", g.rf_trees},
          {"rf_mtry", g.rf_mtry},
          {"gb_trees", g.gb_trees},
          {"gb_shrinkage", g.gb_shrinkage},
          {"gb_depth", g.gb_depth},
          {"gb_min_leaf", g.gb_min_leaf},
          {"type2_measures", c.ensemble.type2_measures},
          {"save_models", c.ensemble.save_models}}},
        {"folds", {{"outer", c.outer_folds}, {"inner", c.inner_folds}}},
        {"seed", c.seed},
        {"output", c.output},
        {"cache", c.cache},
    };
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    allow_keys(j, "config", {"data", "preprocess", "roster", "weak", "ensemble", "folds", "seed", "output", "cache"});
    RunConfig c = default_config();
    c.base_dir = base_dir;

    if (!j.contains("seed")) throw ConfigError("config: 'seed' is required");
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("config.seed: expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
    read(j, "output", c.output, "config");
    read(j, "cache", c.cache, "config");

    if (j.contains("data")) {
        const auto& d = j.at("data");
        allow_keys(d, "data", {"trajectories", "labels", "aoi", "measures", "question"});
        read(d, "trajectories", c.data.trajectories, "data");
        read(d, "labels", c.data.labels, "data");
        read(d, "aoi", c.data.aoi, "data");
        read(d, "measures", c.data.measures, "data");
        read(d, "question", c.data.question, "data");
    }
    if (c.data.trajectories.empty() || c.data.labels.empty())
        throw ConfigError("data: trajectories and labels paths are required");

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        allow_keys(p, "preprocess",
                   {"grid_size", "hover_threshold_ms", "flip_threshold", "standardization",
                    "derivatives_after_normalization"});
        read(p, "grid_size", c.preprocess.grid_size, "preprocess");
        read(p, "hover_threshold_ms", c.preprocess.measures.hover_threshold_ms, "preprocess");
        read(p, "flip_threshold", c.preprocess.measures.flip_threshold, "preprocess");
        read(p, "derivatives_after_normalization", c.preprocess.derivatives_after_normalization, "preprocess");
        std::string mode = "viewport";
        read(p, "standardization", mode, "preprocess");
        if (mode == "viewport") c.preprocess.standardization = Standardization::Viewport;
        else if (mode == "minmax") c.preprocess.standardization = Standardization::MinMax;
        else throw ConfigError("preprocess.standardization: expected viewport or minmax");
    }
    if (c.preprocess.grid_size < 2) throw ConfigError("preprocess.grid_size must be at least 2");
    if (!(c.preprocess.measures.hover_threshold_ms >= 0.0) || !(c.preprocess.measures.flip_threshold >= 0.0))
        throw ConfigError("preprocess thresholds must be non-negative");

    if (j.contains("roster")) {
        if (!j.at("roster").is_array()) throw ConfigError("roster: expected an array");
        c.roster.clear();
        for (const auto& e : j.at("roster")) {
            RosterEntry r;
            if (e.is_string()) {
                r.name = e.get<std::string>();
            } else {
                allow_keys(e, "roster entry", {"name", "a", "ground", "collapse"});
                read(e, "name", r.name, "roster");
                read(e, "a", r.order, "roster");
                read(e, "ground", r.ground, "roster");
                read(e, "collapse", r.collapse, "roster");
            }
            c.roster.push_back(std::move(r));
        }
    }
    if (c.roster.empty()) throw ConfigError("roster must not be empty");

    if (j.contains("weak")) {
        const auto& w = j.at("weak");
        allow_keys(w, "weak", {"bases", "kernel", "k_grid", "h_quantiles"});
        read(w, "bases", c.weak.bases, "weak");
        read(w, "kernel", c.weak.kernel, "weak");
        read(w, "k_grid", c.weak.k_grid, "weak");
        read(w, "h_quantiles", c.weak.h_quantiles, "weak");
    }
    for (std::size_t k : c.weak.k_grid)
        if (k == 0) throw ConfigError("weak.k_grid entries must be positive");
    for (double q : c.weak.h_quantiles)
        if (!(q > 0.0 && q <= 1.0)) throw ConfigError("weak.h_quantiles entries must lie in (0, 1]");

    if (j.contains("ensemble")) {
        const auto& e = j.at("ensemble");
        allow_keys(e, "ensemble",
                   {"gate", "gate_threshold", "super_learners", "rf_trees", "rf_mtry", "gb_trees", "gb_shrinkage",
                    "gb_depth", "gb_min_leaf", "type2_measures", "save_models"});
        std::string gate = "outer";
        read(e, "gate", gate, "ensemble");
        if (gate == "outer") c.ensemble.gate = GateMode::Outer;
        else if (gate == "inner") c.ensemble.gate = GateMode::Inner;
        else throw ConfigError("ensemble.gate: expected outer or inner");
        read(e, "gate_threshold", c.ensemble.gate_threshold, "ensemble");
        read(e, "super_learners", c.ensemble.super_learners, "ensemble");
        read(e, "rf_trees", c.ensemble.grid.rf_trees, "ensemble");
        read(e, "rf_mtry", c.ensemble.grid.rf_mtry, "ensemble");
        read(e, "gb_trees", c.ensemble.grid.gb_trees, "ensemble");
        read(e, "gb_shrinkage", c.ensemble.grid.gb_shrinkage, "ensemble");
        read(e, "gb_depth", c.ensemble.grid.gb_depth, "ensemble");
        read(e, "gb_min_leaf", c.ensemble.grid.gb_min_leaf, "ensemble");
        read(e, "type2_measures", c.ensemble.type2_measures, "ensemble");
        read(e, "save_models", c.ensemble.save_models, "ensemble");
    }
    const std::set<std::string> known{"LC", "RF-I", "GB-I", "RF-II", "GB-II"};
    for (const auto& s : c.ensemble.super_learners)
        if (!known.count(s)) throw ConfigError("ensemble.super_learners: unknown entry '" + s + "'");
    const auto& g = c.ensemble.grid;
    if (g.rf_trees.empty() || g.rf_mtry.empty() || g.gb_trees.empty() || g.gb_shrinkage.empty() || g.gb_depth.empty())
        throw ConfigError("ensemble grids must not be empty");
    for (std::size_t t : g.rf_trees)
        if (t == 0) throw ConfigError("ensemble.rf_trees entries must be positive");
    for (double nu : g.gb_shrinkage)
        if (!(nu > 0.0)) throw ConfigError("ensemble.gb_shrinkage entries must be positive");
    for (int d : g.gb_depth)
        if (d < 1) throw ConfigError("ensemble.gb_depth entries must be at least 1");
    try {
        (void)resolve_mtry(g.rf_mtry, 1);
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("ensemble.rf_mtry: ") + e.what());
    }

    if (j.contains("folds")) {
        const auto& f = j.at("folds");
        allow_keys(f, "folds", {"outer", "inner"});
        read(f, "outer", c.outer_folds, "folds");
        read(f, "inner", c.inner_folds, "folds");
    }
    if (c.outer_folds < 2 || c.inner_folds < 2) throw ConfigError("folds: outer and inner must be at least 2");

    (void)resolve_roster(c);
    (void)resolve_bases(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

void save_config(const std::filesystem::path& path, const RunConfig& c) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file " + path.string());
    out << config_to_json(c).dump(2) << "\n";
}

std::uint64_t config_fingerprint(const RunConfig& c) {
    json j = config_to_json(c);
    j.erase("output");
    j.erase("cache");
    j["ensemble"].erase("save_models");
    Fnv1a h;
    h.add(j.dump());
    return h.value();
}

std::vector<SemiMetricSpec> resolve_roster(const RunConfig& c) {
    std::vector<SemiMetricSpec> out;
    std::set<std::string> seen;
    for (const auto& e : c.roster) {
        SemiMetricSpec s;
        try {
            s = parse_semimetric(e.name, e.order, parse_ground(e.ground), e.collapse);
        } catch (const InvalidInput& err) {
            throw ConfigError(std::string("roster: ") + err.what());
        }
        if (!seen.insert(s.key()).second) throw ConfigError("roster: duplicate semi-metric " + s.key());
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<BaseLearner> resolve_bases(const RunConfig& c) {
    if (c.weak.bases.empty()) throw ConfigError("weak.bases must not be empty");
    std::vector<BaseLearner> out;
    try {
        for (const auto& b : c.weak.bases) out.push_back(parse_base(b));
        (void)parse_kernel(c.weak.kernel);
    } catch (const InvalidInput& err) {
        throw ConfigError(std::string("weak: ") + err.what());
    }
    return out;
}

Dataset load_dataset(const RunConfig& c) {
    const auto records = read_trajectories(c.resolve(c.data.trajectories));
    const auto labels = read_labels(c.resolve(c.data.labels));
    std::map<SampleKey, std::map<std::string, double>> external;
    if (!c.data.measures.empty()) external = read_external_measures(c.resolve(c.data.measures));
    std::optional<AoiPartition> aoi;
    if (!c.data.aoi.empty()) aoi = read_aoi(c.resolve(c.data.aoi));
    for (const auto& s : resolve_roster(c)) {
        const bool needs_aoi = s.family() == Family::Composition || s.family() == Family::SymbolSequence;
        if (needs_aoi && !aoi) throw ConfigError("roster: " + s.key() + " needs an AOI partition (data.aoi)");
    }
    return preprocess(records, labels, external, aoi, c.preprocess, c.data.question);
}

} // namespace mfc
