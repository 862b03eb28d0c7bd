#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfc/config.hpp"
#include "mfc/dataset.hpp"

namespace mfc {

/// Synthetic mouse trajectories with known class structure:
///  amplitude — two classes differing in peak height (latent means 1 vs 2, sd 0.1);
///  timewarp  — one spatial path; class 2 doubles back before finishing; random monotone warps for all;
///  xor       — class = (high peak) XOR (slow response); each attribute alone is only weakly informative.
struct SynthData {
    std::vector<RawRecord> records;
    std::map<SampleKey, int> labels;
    AoiPartition aoi;
};

const std::vector<std::string>& synth_scenarios();

SynthData synthesize(const std::string& scenario, std::size_t n, std::uint64_t seed);

/// Run configuration for a synthetic directory (relative paths, a compact roster).
RunConfig synth_config(std::uint64_t seed);

/// Writes trajectories.csv, labels.csv, aoi.json and config.json into dir.
void write_synth(const std::filesystem::path& dir, const std::string& scenario, std::size_t n, std::uint64_t seed);

} // namespace mfc
