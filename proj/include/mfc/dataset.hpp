#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfc/funcdata.hpp"

namespace mfc {

/// One (respondent, question) trajectory as read from the input CSV, in pixels.
struct RawRecord {
    std::string id;
    std::string question;
    Curve curve;
    std::optional<Viewport> viewport;
};

using SampleKey = std::pair<std::string, std::string>; // (id, question)

enum class Standardization { Viewport, MinMax };

struct PreprocessSettings {
    std::size_t grid_size = 101;
    MeasureSettings measures;
    Standardization standardization = Standardization::Viewport;
    /// Off: derivatives on the raw grid, then time normalization. On: the reverse.
    bool derivatives_after_normalization = false;
    bool operator==(const PreprocessSettings& o) const {
        return grid_size == o.grid_size && measures.hover_threshold_ms == o.measures.hover_threshold_ms &&
               measures.flip_threshold == o.measures.flip_threshold && standardization == o.standardization &&
               derivatives_after_normalization == o.derivatives_after_normalization;
    }
};

struct LabeledSample {
    std::string id;
    std::string question;
    Curve raw;
    Curve standardized;
    std::vector<NormalizedCurve> normalized; // index = derivative order 0, 1, 2
    MeasureVector measures;
    int label = 0; // zero-based class index
    std::optional<SymbolSequence> symbols_raw;
    std::optional<SymbolSequence> symbols_normalized;
    std::optional<Composition> composition;

    [[nodiscard]] std::string key() const { return id + "/" + question; }
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::size_t class_count = 0;
    std::optional<AoiPartition> aoi;
    std::size_t skipped_unlabeled = 0;

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] std::vector<int> labels() const;
    [[nodiscard]] std::vector<std::string> ids() const;
    /// Hash over everything a distance can depend on.
    [[nodiscard]] std::uint64_t fingerprint() const;
};

/// Builds labeled samples: measures on the raw trajectory, standardization,
/// derivatives, time normalization and AOI encodings. Samples are ordered by
/// (question, id). Labels are 1-based class numbers; stored zero-based.
Dataset preprocess(const std::vector<RawRecord>& records, const std::map<SampleKey, int>& labels,
                   const std::map<SampleKey, std::map<std::string, double>>& external_measures,
                   const std::optional<AoiPartition>& aoi, const PreprocessSettings& settings,
                   const std::string& question_filter = "");

// File formats.
std::vector<RawRecord> read_trajectories(const std::filesystem::path& path);
std::map<SampleKey, int> read_labels(const std::filesystem::path& path);
std::map<SampleKey, std::map<std::string, double>> read_external_measures(const std::filesystem::path& path);
AoiPartition read_aoi(const std::filesystem::path& path);

void write_trajectories(const std::filesystem::path& path, const std::vector<RawRecord>& records);
void write_labels(const std::filesystem::path& path, const std::map<SampleKey, int>& labels);
void write_aoi(const std::filesystem::path& path, const AoiPartition& aoi);
void write_preprocessed(const std::filesystem::path& path, const Dataset& dataset);

} // namespace mfc
