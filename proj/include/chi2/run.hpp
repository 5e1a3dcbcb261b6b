#pragma once

#include <chi2/config.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chi2 {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config_error = 2;     // bad config or unreadable input
inline constexpr int exit_numerical_error = 3;  // NumericalError from any stage

std::string_view version();

/// JSON text in which every floating-point number is written with 17
/// significant digits (std::to_chars, locale independent).
std::string dump_json(const nlohmann::json& doc, int indent = 2);

struct RunOutput {
  std::vector<std::filesystem::path> files;
  std::vector<std::string> summary;  // short human-readable lines
};

/// Executes the task and writes its artifacts to config.output.directory:
/// <prefix>.csv (curves and matrices), <prefix>.json (reports) and
/// <prefix>.config.json (the resolved configuration). Every file carries the
/// version and the resolved configuration. Throws ConfigError or NumericalError.
RunOutput run(const RunConfig& config, unsigned threads = 1);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
  bool validate_only = false;
};

/// Load, apply overrides, validate and run; reports on `out`/`err` and
/// returns the process exit code.
int run_main(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& out,
             std::ostream& err);

}  // namespace chi2
