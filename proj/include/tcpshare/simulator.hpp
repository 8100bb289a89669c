#pragma once

// Fixed-step fluid simulation of N AIMD flows sharing a tail-drop
// bottleneck. Windows grow continuously at 1/a segment per round trip,
// send at cwnd * MSS / RTT, and halve one RTT after their packet was
// dropped. The queue integrates arrival minus capacity.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tcpshare/config.hpp"

namespace tcpshare::sim {

enum class LossMode {
  Isolated,      ///< one flow hit per congestion event
  Synchronized,  ///< every overflowing packet during the lag RTT hits a flow
  Iid,           ///< independent per-packet losses at a fixed probability
};

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(const std::string& name);  // throws ConfigError

/// How overflow during a synchronized congestion event turns into dropped
/// packets.
enum class DropAccounting {
  /// One packet at the event start, then one per full segment of aggregate
  /// window growth since the event opened (N/a per round trip).
  WindowGrowth,
  /// One packet per MSS of fluid overflow volume.
  OverflowVolume,
};

std::string to_string(DropAccounting accounting);
DropAccounting drop_accounting_from_string(const std::string& name);

/// Non-responsive constant-rate source whose rate changes at `at`.
struct OfferedStep {
  double at = 0.0;
  double rate_before = 0.0;  ///< bit/s
  double rate_after = 0.0;   ///< bit/s
};

struct SimConfig {
  SharingConfig sharing;
  double duration = 600.0;
  double time_step = 0.0;        ///< 0 selects rtt_base / 100
  double sample_interval = 0.0;  ///< 0 selects 10 * time_step
  LossMode loss_mode = LossMode::Synchronized;
  double iid_p_loss = 0.0;  ///< per-packet loss probability for LossMode::Iid
  DropAccounting drop_accounting = DropAccounting::WindowGrowth;
  std::uint64_t seed = 1;
  /// Per-flow starting windows in segments; empty draws each uniformly from
  /// [0.5, 1.5] times the fair window at rtt_base.
  std::vector<double> initial_cwnds;
  double warmup_fraction = 0.2;  ///< leading share of the run excluded from measurements
  std::optional<OfferedStep> offered_step;

  double step() const { return time_step > 0 ? time_step : sharing.rtt_base / 100.0; }
  double sampling() const { return sample_interval > 0 ? sample_interval : 10.0 * step(); }
  double warmup_end() const { return warmup_fraction * duration; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct Sample {
  double time = 0.0;
  std::vector<double> rates;  ///< per-flow sending rate, bit/s
  double aggregate = 0.0;     ///< sum of rates
  double offered = 0.0;       ///< aggregate plus any non-responsive source
  double delivered = 0.0;     ///< mean link output since the previous sample
  double queue = 0.0;         ///< bits
  double rtt = 0.0;           ///< rtt_base + queue / capacity
};

struct LossEvent {
  double time = 0.0;
  int flow = 0;
  int count = 1;
};

/// A window reduction that took effect. hit_time is when the triggering
/// packet was dropped; time is one RTT later.
struct Halving {
  double time = 0.0;
  int flow = 0;
  double hit_time = 0.0;
  double hit_bitrate = 0.0;  ///< rate of the flow at hit_time
  double cwnd_before = 0.0;
  double rtt = 0.0;          ///< RTT at the moment the reduction took effect
};

struct CongestionEvent {
  double start = 0.0;
  double end = 0.0;
  std::vector<int> flows_hit;  ///< flows whose window reduction this event caused
  int losses = 0;
  double rtt_at_start = 0.0;
  double delivered_bits = 0.0;  ///< link output while the event was open
};

/// Tail-drop overflow volume in one integration step.
struct DropRecord {
  double time = 0.0;
  double bits = 0.0;
};

struct VolumeTotals {
  double offered = 0.0;
  double delivered = 0.0;
  double dropped = 0.0;
  double queue_start = 0.0;
  double queue_end = 0.0;
  double max_step_residual = 0.0;  ///< worst |offered - delivered - dropped - dQ| / offered
};

struct RateTrace {
  SharingConfig sharing;
  double duration = 0.0;
  double warmup_end = 0.0;
  double time_step = 0.0;
  std::vector<Sample> samples;
  std::vector<LossEvent> losses;
  std::vector<DropRecord> drops;
  std::vector<Halving> halvings;
  std::vector<CongestionEvent> events;
  VolumeTotals totals;
};

/// Runs the fluid model. Deterministic for a given config, including seed.
/// Safe to call concurrently on distinct configs.
RateTrace run(const SimConfig& config);

/// Flow hit by the next dropped packet, sampled in proportion to the
/// per-flow packet rate. Exposed for testing.
int sample_flow(const std::vector<double>& rates, std::mt19937_64& rng);

struct StepResponse {
  double lost = 0.0;          ///< bits dropped in the absorption window
  double settle_time = 0.0;   ///< s until the rate imbalance decayed by 1/e
  double queue_at_step = 0.0;
  double rtt_at_step = 0.0;
  double headroom = 0.0;      ///< buffer - queue_at_step
  RateTrace trace;
};

/// Adds (delta_offered > 0) or removes (< 0) a constant-rate source at
/// time `at`. Losses are counted over three settle times after the step.
StepResponse step_response(const SimConfig& config, double delta_offered, double at);

// Trace analysis -----------------------------------------------------------

/// Delivered volume over capacity * time, excluding the warm-up.
/// Throws std::invalid_argument for an empty or zero-length trace.
double measure_utilization(const RateTrace& trace, double capacity);

/// Groups loss events separated by at most `window` from the previous loss
/// of the same group. window <= 0 selects rtt_base.
std::vector<CongestionEvent> detect_events(const RateTrace& trace, double window = 0.0);

/// Mean time between packet losses of one flow after the warm-up:
/// N * measured time / number of lost packets.
double mean_loss_interval_per_flow(const RateTrace& trace);

/// Same, counting window reductions instead of lost packets. Differs from
/// the loss interval when a flow loses several packets in one event.
double mean_halving_interval_per_flow(const RateTrace& trace);

/// Linearly interpolated sample values.
double queue_at(const RateTrace& trace, double t);
double rate_at(const RateTrace& trace, int flow, double t);

}  // namespace tcpshare::sim
