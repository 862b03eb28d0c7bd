#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>

namespace mfc {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a, used for fingerprints and for turning names into seed tags.
class Fnv1a {
public:
    void add_bytes(const void* data, std::size_t size);
    void add(std::string_view s);
    void add(std::uint64_t v);
    void add(double v);
    [[nodiscard]] std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_string(std::string_view s);

/// Mixes a base seed with a sequence of tags (splitmix64 finalizer per step).
/// Every random stream in the pipeline is derived this way, so results never
/// depend on the order in which parallel tasks run.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

std::string to_hex(std::uint64_t v);

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Exceptions from
/// the body are rethrown on the calling thread (the one with the lowest index wins).
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& body);

/// Argmax over a probability vector; exact ties are broken by a draw from rng.
std::size_t argmax_random_tie(std::span<const double> values, Rng& rng);

} // namespace mfc
