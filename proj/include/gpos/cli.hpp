#pragma once

// Command-line front end: verify, suite and export commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gpos::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitStructural = 1;
inline constexpr int kExitFailure = 2;

struct Options {
  std::vector<std::pair<std::string, double>> tol_overrides;  // name=value
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  std::ostream* out = nullptr;  // defaults to std::cout / std::cerr
  std::ostream* err = nullptr;
};

// "name=value" -> pair; throws ConfigError on malformed input.
std::pair<std::string, double> parse_tol_override(const std::string& s);

int cmd_verify(const std::string& config_path, const std::optional<std::string>& report_path, const Options& opts);
int cmd_suite(const std::string& dir, const std::optional<std::string>& out_dir, const Options& opts);
int cmd_export(const std::string& config_path, const std::string& what, const std::optional<std::string>& out_path,
               const Options& opts);

// Writes to a sibling temporary file, then renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& content);

// Full argument parsing; returns the process exit code.
int run(int argc, char** argv);

}  // namespace gpos::cli
