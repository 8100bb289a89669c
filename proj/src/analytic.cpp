#include "tcpshare/analytic.hpp"

#include <cmath>
#include <stdexcept>

namespace tcpshare::analytic {

namespace {

// RTT increase per round trip when every flow adds 1/a segment: MSS N / (C a).
double rtt_increment(const SharingConfig& cfg) {
  return cfg.mss * cfg.flow_count / (cfg.capacity * cfg.ack_ratio);
}

}  // namespace

FlowState FlowState::from_cwnd(double cwnd, double mss, double rtt) {
  return {cwnd, bitrate_from_cwnd(cwnd, mss, rtt)};
}

FlowState FlowState::from_bitrate(double bitrate, double mss, double rtt) {
  if (!(rtt > 0) || !(mss > 0)) throw std::invalid_argument("rtt and mss must be > 0");
  return {bitrate * rtt / mss, bitrate};
}

QueueState QueueState::from_occupancy(double occupancy, double capacity) {
  return {occupancy, occupancy / capacity};
}

double fair_share(const SharingConfig& cfg) { return cfg.capacity / cfg.flow_count; }

double bitrate_from_cwnd(double cwnd, double mss, double rtt) {
  if (!(rtt > 0)) throw std::invalid_argument("bitrate_from_cwnd: rtt must be > 0");
  return cwnd * mss / rtt;
}

StepResult step_down(const SharingConfig& cfg, const FlowState& hit, double rtt_before) {
  if (hit.bitrate > cfg.capacity)
    throw std::invalid_argument("step_down: hit bitrate exceeds capacity");
  if (hit.bitrate < 0) throw std::invalid_argument("step_down: negative bitrate");

  StepResult r;
  r.delta_rtt = hit.bitrate * rtt_before / (2.0 * cfg.capacity);
  r.delta_queue = r.delta_rtt * cfg.capacity;
  r.delta_bitrate_hit = step_up(cfg, hit, hit.bitrate, StepRole::Hit);
  if (cfg.flow_count > 1) {
    FlowState other{0.0, (cfg.capacity - hit.bitrate) / (cfg.flow_count - 1)};
    r.delta_bitrate_other = step_up(cfg, other, hit.bitrate, StepRole::Other);
  }
  return r;
}

double step_up(const SharingConfig& cfg, const FlowState& flow, double hit_bitrate,
               StepRole role) {
  if (hit_bitrate < 0 || hit_bitrate >= 2.0 * cfg.capacity)
    throw std::invalid_argument("step_up: hit bitrate must lie in [0, 2C)");
  const double gain = hit_bitrate / (2.0 * cfg.capacity - hit_bitrate);
  if (role == StepRole::Hit) return hit_bitrate / 2.0 * (gain - 1.0);
  return flow.bitrate * gain;
}

double rtt_step_ideal(const SharingConfig& cfg) {
  return 2.0 / 3.0 * cfg.rtt_base / cfg.flow_count;
}

double buffer_bound_best(const SharingConfig& cfg) {
  return 2.0 / 3.0 * cfg.capacity * cfg.rtt_base / cfg.flow_count;
}

double buffer_bound_sync(const SharingConfig& cfg) {
  return 2.0 / (3.0 * cfg.ack_ratio) * cfg.capacity * cfg.rtt_base;
}

double queue_absorption(const SharingConfig& cfg, double delta_offered,
                        std::optional<double> rtt) {
  if (delta_offered < 0) throw std::invalid_argument("queue_absorption: negative load change");
  return rtt.value_or(cfg.rtt_base) * delta_offered;
}

RttGrowth rtt_growth(const SharingConfig& cfg, double t, std::optional<double> rtt_start) {
  if (t < 0) throw std::invalid_argument("rtt_growth: t must be >= 0");
  const double r0 = rtt_start.value_or(cfg.rtt_base);
  const double k = rtt_increment(cfg);
  return {std::sqrt(2.0 * k * t + r0 * r0), r0 + k / r0 * t};
}

QueueGrowth queue_growth(const SharingConfig& cfg, double t) {
  const RttGrowth rtt = rtt_growth(cfg, t);
  return {(rtt.exact - cfg.rtt_base) * cfg.capacity,
          cfg.mss * cfg.flow_count / (cfg.ack_ratio * cfg.rtt_base) * t};
}

LossInterval loss_interval(const SharingConfig& cfg, std::optional<double> rtt) {
  const double r = rtt.value_or(cfg.rtt_base);
  const double n = cfg.flow_count;
  LossInterval li;
  li.aggregate = 2.0 * cfg.ack_ratio / 3.0 * r * r * cfg.capacity / (cfg.mss * n * n);
  li.per_flow = li.aggregate * n;
  return li;
}

double loss_probability(const SharingConfig& cfg, std::optional<double> rtt) {
  const double r = rtt.value_or(cfg.rtt_base);
  const double x = cfg.mss * cfg.flow_count / (r * cfg.capacity);
  return 3.0 / (2.0 * cfg.ack_ratio) * x * x;
}

Throughput macroscopic_throughput(double p_loss, double mss, double rtt, double ack_ratio,
                                  int flow_count) {
  if (!(p_loss > 0 && p_loss < 1))
    throw std::invalid_argument("macroscopic_throughput: p_loss must lie in (0, 1)");
  if (!(rtt > 0)) throw std::invalid_argument("macroscopic_throughput: rtt must be > 0");
  Throughput tp;
  tp.cwnd_eq = std::sqrt(3.0 / (2.0 * ack_ratio)) / std::sqrt(p_loss);
  tp.per_flow = tp.cwnd_eq * mss / rtt;
  tp.aggregate = tp.per_flow * flow_count;
  return tp;
}

double convergence_trajectory(const SharingConfig& cfg, double b0, double t,
                              std::optional<double> rtt_start) {
  if (t < 0) throw std::invalid_argument("convergence_trajectory: t must be >= 0");
  const double bs = cfg.fair_share();
  const double r0 = rtt_start.value_or(cfg.rtt_base);
  const double stretch = 2.0 * cfg.mss * t / (cfg.ack_ratio * bs * r0 * r0) + 1.0;
  return (b0 - bs) / std::sqrt(stretch) + bs;
}

}  // namespace tcpshare::analytic
