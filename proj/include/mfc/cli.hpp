#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "mfc/config.hpp"

namespace mfc {

/// Command-line overrides shared by the commands.
struct CliOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> out;
    std::optional<GateMode> gate;
};

/// Exit codes: 0 ok, 1 usage error (bad flags, unknown scenario), 2 config error,
/// 3 data error, 4 internal invariant violation.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitConfig = 2, kExitData = 3, kExitInvariant = 4 };

RunConfig effective_config(const CliOptions& opts);

std::filesystem::path cmd_preprocess(const CliOptions& opts, std::ostream& log);
void cmd_distances(const CliOptions& opts, bool csv, std::ostream& log);
std::filesystem::path cmd_run(const CliOptions& opts, std::ostream& log);
void cmd_synth(const std::string& scenario, std::size_t n, std::uint64_t seed, const std::filesystem::path& out);
void cmd_config_init(std::ostream& out);

/// Parses argv, dispatches and maps exceptions to exit codes.
int run_cli(int argc, char** argv);

} // namespace mfc
