#pragma once

#include "hlift/cli/config.hpp"
#include "hlift/error.hpp"

#include <string>
#include <vector>

namespace hlift::cli {

/// 0 ok, 1 usage, 2 data, 3 missing or stale stage, 4 domain-degenerate, 5 numeric.
int exit_code(ErrorKind kind) noexcept;

/// Pipeline stages in dependency order.
inline const std::vector<std::string> kStages{"fit", "train", "forecast", "validate", "explain", "stress", "ablate"};

/// Runs one stage; upstream manifests must exist and carry cfg.hash.
void run_stage(const std::string& stage, const RunConfig& cfg);

/// Writes a fixture cluster CSV and its config into `dir`.
void write_fixture(const std::filesystem::path& dir, std::uint64_t seed);

/// Full command line (argv[0] included). Returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

} // namespace hlift::cli
