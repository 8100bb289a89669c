#pragma once

// Subcommands of the tcpshare tool. Each takes a parsed manifest, writes its
// tables under manifest.out and a short report to `report`, and returns the
// process exit code.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tcpshare/io.hpp"

namespace tcpshare::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct Manifest {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  io::Format format = io::Format::Csv;

  // resample
  std::optional<std::filesystem::path> packets;
  std::optional<std::filesystem::path> rtt;
  std::optional<double> t0;
  double fixed_interval = 0.1;  ///< 0 skips the fixed-interval table

  // verify
  std::vector<int> only;  ///< empty runs every check
  std::uint64_t oracle_steps = 10'000'000;
};

/// Defaults, then the config file, then the seed override.
io::RunConfig resolve_config(const Manifest& manifest);

int cmd_simulate(const Manifest& manifest, std::ostream& report);
int cmd_analytic(const Manifest& manifest, std::ostream& report);
int cmd_markov(const Manifest& manifest, std::ostream& report);
int cmd_resample(const Manifest& manifest, std::ostream& report);
int cmd_verify(const Manifest& manifest, std::ostream& report);

/// Parses arguments and dispatches. Config and usage errors return
/// kExitUsage with a diagnostic on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tcpshare::cli
