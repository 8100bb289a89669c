#pragma once

// Closed-form bandwidth sharing relations for N AIMD flows behind one
// tail-drop bottleneck. Everything here is a pure function of its
// arguments and is real-valued: congestion windows are fluid, not rounded.

#include <optional>

#include "tcpshare/config.hpp"

namespace tcpshare::analytic {

/// One flow's window and the rate it produces at a given RTT.
struct FlowState {
  double cwnd = 1.0;  ///< segments
  double bitrate = 0.0;

  static FlowState from_cwnd(double cwnd, double mss, double rtt);
  static FlowState from_bitrate(double bitrate, double mss, double rtt);
};

struct QueueState {
  double occupancy = 0.0;  ///< bits
  double delay = 0.0;      ///< occupancy / capacity, s

  static QueueState from_occupancy(double occupancy, double capacity);
};

/// Effect of halving one flow's window. delta_queue and delta_rtt are
/// reductions (non-negative). delta_bitrate_other applies to each of the
/// N-1 remaining flows, assumed to share C - b_hit evenly.
struct StepResult {
  double delta_bitrate_hit = 0.0;
  double delta_bitrate_other = 0.0;
  double delta_queue = 0.0;
  double delta_rtt = 0.0;
};

enum class StepRole { Hit, Other };

struct RttGrowth {
  double exact = 0.0;
  double linearized = 0.0;
};

struct QueueGrowth {
  double exact = 0.0;  ///< bits
  double linearized = 0.0;
};

struct LossInterval {
  double aggregate = 0.0;  ///< mean time between losses on the link, s
  double per_flow = 0.0;   ///< mean time between losses of one flow, s
};

struct Throughput {
  double aggregate = 0.0;  ///< bit/s
  double per_flow = 0.0;   ///< bit/s
  double cwnd_eq = 0.0;    ///< segments
};

double fair_share(const SharingConfig& cfg);

/// cwnd * mss / rtt. Throws std::invalid_argument for rtt <= 0.
double bitrate_from_cwnd(double cwnd, double mss, double rtt);

StepResult step_down(const SharingConfig& cfg, const FlowState& hit, double rtt_before);

/// Rate change of a flow when some flow with rate hit_bitrate halves.
/// For StepRole::Hit the result is the net change of the halved flow
/// itself (halving plus its share of the queue relaxation), and
/// flow.bitrate is ignored.
double step_up(const SharingConfig& cfg, const FlowState& flow, double hit_bitrate,
               StepRole role = StepRole::Other);

/// RTT reduction for a hit at 4/3 of the fair share: (2/3) RTT / N.
double rtt_step_ideal(const SharingConfig& cfg);

/// Smallest buffer that survives an isolated halving at the idealized
/// switching point: (2/3) C RTT0 / N.
double buffer_bound_best(const SharingConfig& cfg);

/// Buffer needed when N/a flows halve within one round trip:
/// 2 C RTT0 / (3a). Does not depend on N.
double buffer_bound_sync(const SharingConfig& cfg);

/// Queue room needed to absorb an offered-load change delta_offered
/// without loss: RTT * delta. Uses rtt_base unless rtt is given.
double queue_absorption(const SharingConfig& cfg, double delta_offered,
                        std::optional<double> rtt = std::nullopt);

/// RTT between losses, starting at rtt_start (default rtt_base) with the
/// queue in quasi-equilibrium. Exact square-root law and its tangent.
RttGrowth rtt_growth(const SharingConfig& cfg, double t,
                     std::optional<double> rtt_start = std::nullopt);

/// Queue occupancy grown from an empty queue after t seconds.
QueueGrowth queue_growth(const SharingConfig& cfg, double t);

LossInterval loss_interval(const SharingConfig& cfg, std::optional<double> rtt = std::nullopt);

double loss_probability(const SharingConfig& cfg, std::optional<double> rtt = std::nullopt);

/// Inverse of loss_probability. Throws std::invalid_argument unless
/// 0 < p_loss < 1.
Throughput macroscopic_throughput(double p_loss, double mss, double rtt, double ack_ratio,
                                  int flow_count);

/// Rate of a flow that starts at b0 and relaxes toward the fair share
/// while the queue grows. rtt_start defaults to rtt_base.
double convergence_trajectory(const SharingConfig& cfg, double b0, double t,
                              std::optional<double> rtt_start = std::nullopt);

}  // namespace tcpshare::analytic
