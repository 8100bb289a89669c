#pragma once

// Cross-validation suite: the simulator against the closed forms, the
// Markov chain against its Monte Carlo oracle, the resampler on a synthetic
// aliasing trace, and the command-line output for determinism. Thresholds
// are fixed here; a check either meets them or reports the shortfall.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tcpshare/simulator.hpp"

namespace tcpshare::verify {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;  ///< measured values against their thresholds
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Link and run parameters the scenarios start from. Each check
  /// overrides only what its scenario requires (loss mode, buffer, ...).
  sim::SimConfig base;
  std::uint64_t oracle_steps = 10'000'000;
  /// Scratch space for the determinism check; empty uses the system
  /// temporary directory.
  std::filesystem::path scratch;
};

inline constexpr int kCheckCount = 12;

std::string check_name(int id);

/// Runs one check, 1-based. Throws std::out_of_range for an unknown id.
CheckResult run_check(int id, const VerifyOptions& options);

std::vector<CheckResult> run_all(const VerifyOptions& options);

CheckResult loss_interval(const VerifyOptions& options);
CheckResult buffer_lower_bound(const VerifyOptions& options);
CheckResult synchronization_bound(const VerifyOptions& options);
CheckResult rtt_growth(const VerifyOptions& options);
CheckResult convergence(const VerifyOptions& options);
CheckResult step_sizes(const VerifyOptions& options);
CheckResult markov_chain(const VerifyOptions& options);
CheckResult distribution_shape(const VerifyOptions& options);
CheckResult macroscopic_consistency(const VerifyOptions& options);
CheckResult resampler_dealiasing(const VerifyOptions& options);
CheckResult step_absorption(const VerifyOptions& options);
CheckResult determinism(const VerifyOptions& options);

/// Outcome of one load step against a buffer sized relative to the
/// absorption volume.
struct AbsorptionTrial {
  double queue_at_step = 0.0;  ///< bits
  double rtt_after = 0.0;      ///< s, RTT once the step is absorbed
  double required = 0.0;       ///< rtt_after * delta, bits
  double headroom = 0.0;       ///< bits
  double lost = 0.0;           ///< bits
  double settle_time = 0.0;
};

/// Runs the config once with an unbounded buffer to find the queue at
/// `at`, then again with buffer = queue + factor * rtt_after * delta. The
/// two runs coincide up to `at` as long as no loss occurs before it.
AbsorptionTrial absorption_trial(const sim::SimConfig& config, double delta, double at,
                                 double headroom_factor);

}  // namespace tcpshare::verify
