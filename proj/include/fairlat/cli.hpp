#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fairlat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // internal errors, failed gradcheck
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

struct Options {
  std::string command;               // generate|train|eval|traverse|sweep|gradcheck
  std::string config_path;           // --config
  std::optional<std::string> out_dir;     // --out, overrides [global] out
  std::optional<std::uint64_t> seed;      // --seed, overrides [global] seed
  int jobs = 1;                      // --jobs
  bool quiet = false;                // suppress stdout summaries (files still written)
};

/// Runs a command and returns its exit code; errors are printed to stderr.
/// Every command is a pure function of (config file, input files) and writes
/// a manifest echoing the resolved configuration and artifact hashes.
int run(const Options& options);

}  // namespace fairlat::cli
