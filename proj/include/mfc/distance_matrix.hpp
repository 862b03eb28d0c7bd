#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfc/dataset.hpp"
#include "mfc/semimetrics.hpp"

namespace mfc {

/// Square, symmetric matrix of one semi-metric over a dataset, zero diagonal.
class DistanceMatrix {
public:
    DistanceMatrix(SemiMetricSpec spec, std::vector<std::string> ids, std::vector<double> entries);

    [[nodiscard]] const SemiMetricSpec& spec() const { return spec_; }
    [[nodiscard]] const std::vector<std::string>& ids() const { return ids_; }
    [[nodiscard]] std::size_t size() const { return ids_.size(); }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return entries_[i * ids_.size() + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return std::span<const double>(entries_).subspan(i * ids_.size(), ids_.size());
    }
    [[nodiscard]] const std::vector<double>& entries() const { return entries_; }

private:
    SemiMetricSpec spec_;
    std::vector<std::string> ids_;
    std::vector<double> entries_;
};

/// Evaluates spec on one pair of preprocessed samples.
double evaluate(const SemiMetricSpec& spec, const LabeledSample& a, const LabeledSample& b);

/// All pairs, assembled deterministically regardless of `jobs`.
DistanceMatrix pairwise_matrix(const Dataset& dataset, const SemiMetricSpec& spec, std::size_t jobs = 1);

/// Binary cache: magic, version, spec and dataset fingerprints, n, ids,
/// then the strict upper triangle as little-endian float64.
void write_cache(const std::filesystem::path& path, const DistanceMatrix& m, std::uint64_t dataset_fingerprint);
std::optional<DistanceMatrix> read_cache(const std::filesystem::path& path, const SemiMetricSpec& spec,
                                         std::uint64_t dataset_fingerprint, const std::vector<std::string>& ids);
void write_csv(const std::filesystem::path& path, const DistanceMatrix& m);

std::filesystem::path cache_path(const std::filesystem::path& dir, const SemiMetricSpec& spec,
                                 std::uint64_t dataset_fingerprint);

/// Reads the cached matrix when valid, otherwise computes and stores it.
DistanceMatrix load_or_compute(const std::filesystem::path& cache_dir, const Dataset& dataset,
                               const SemiMetricSpec& spec, std::size_t jobs, bool* cache_hit = nullptr);

} // namespace mfc
