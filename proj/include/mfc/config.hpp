#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mfc/dataset.hpp"
#include "mfc/ensemble.hpp"
#include "mfc/semimetrics.hpp"
#include "mfc/weaklearners.hpp"

namespace mfc {

struct RosterEntry {
    std::string name;
    int order = 0;
    std::string ground = "euclidean";
    bool collapse = false;

    bool operator==(const RosterEntry&) const = default;
};

enum class GateMode { Outer, Inner };

struct RunConfig {
    struct Data {
        std::string trajectories;
        std::string labels;
        std::string aoi;      // optional
        std::string measures; // optional, externally supplied (e.g. personalized) measures
        std::string question; // optional filter
        bool operator==(const Data&) const = default;
    } data;
    PreprocessSettings preprocess;
    std::vector<RosterEntry> roster;
    struct Weak {
        std::vector<std::string> bases{"fkNN", "kNCD"};
        std::string kernel = "gaussian";
        std::vector<std::size_t> k_grid;  // empty: odd k up to min(31, inner training size)
        std::vector<double> h_quantiles;  // empty: 0.05, 0.10, ..., 0.95
        bool operator==(const Weak&) const = default;
    } weak;
    struct Ensemble {
        GateMode gate = GateMode::Outer;
        double gate_threshold = 0.55;
        std::vector<std::string> super_learners{"RF-I", "GB-I", "RF-II", "GB-II", "LC"};
        SuperGrid grid;
        std::vector<std::string> type2_measures;
        bool save_models = false;
        bool operator==(const Ensemble&) const = default;
    } ensemble;
    int outer_folds = 10;
    int inner_folds = 5;
    std::uint64_t seed = 1;
    std::string output = "out";
    std::string cache; // empty: <output>/cache

    /// Directory that relative paths are resolved against (the config file's); not serialized.
    std::filesystem::path base_dir;

    bool operator==(const RunConfig& o) const {
        return data == o.data && preprocess == o.preprocess && roster == o.roster && weak == o.weak &&
               ensemble == o.ensemble && outer_folds == o.outer_folds && inner_folds == o.inner_folds &&
               seed == o.seed && output == o.output && cache == o.cache;
    }

    [[nodiscard]] std::filesystem::path resolve(const std::string& p) const;
    [[nodiscard]] std::filesystem::path output_dir() const { return resolve(output); }
    [[nodiscard]] std::filesystem::path cache_dir() const;
};

/// Roster mirroring the semi-metrics studied for the mouse-movement application.
std::vector<RosterEntry> default_roster(bool with_aoi);
RunConfig default_config();

nlohmann::json config_to_json(const RunConfig& c);
/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& c);

/// Fingerprint of everything that affects results (paths and output location excluded).
std::uint64_t config_fingerprint(const RunConfig& c);

std::vector<SemiMetricSpec> resolve_roster(const RunConfig& c);
std::vector<BaseLearner> resolve_bases(const RunConfig& c);

/// Reads and preprocesses the configured data files.
Dataset load_dataset(const RunConfig& c);

} // namespace mfc
