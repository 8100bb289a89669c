#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "tcpshare/simulator.hpp"

namespace tcpshare::sim {

double measure_utilization(const RateTrace& trace, double capacity) {
  if (!(capacity > 0)) throw std::invalid_argument("measure_utilization: capacity must be > 0");
  double volume = 0.0;
  double span = 0.0;
  const auto& s = trace.samples;
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k - 1].time < trace.warmup_end) continue;
    const double dt = s[k].time - s[k - 1].time;
    volume += s[k].delivered * dt;
    span += dt;
  }
  if (!(span > 0)) throw std::invalid_argument("measure_utilization: trace covers no time");
  return volume / (capacity * span);
}

std::vector<CongestionEvent> detect_events(const RateTrace& trace, double window) {
  if (window <= 0) window = trace.sharing.rtt_base;
  std::vector<LossEvent> losses = trace.losses;
  std::stable_sort(losses.begin(), losses.end(),
                   [](const LossEvent& a, const LossEvent& b) { return a.time < b.time; });

  std::vector<CongestionEvent> events;
  std::set<int> flows;
  for (const auto& loss : losses) {
    if (events.empty() || loss.time - events.back().end > window) {
      if (!events.empty()) events.back().flows_hit.assign(flows.begin(), flows.end());
      flows.clear();
      CongestionEvent ev;
      ev.start = loss.time;
      ev.rtt_at_start = queue_at(trace, loss.time) / trace.sharing.capacity + trace.sharing.rtt_base;
      events.push_back(ev);
    }
    auto& ev = events.back();
    ev.end = loss.time;
    ev.losses += loss.count;
    flows.insert(loss.flow);
  }
  if (!events.empty()) events.back().flows_hit.assign(flows.begin(), flows.end());

  // Link output during each event window, from the per-sample delivered rate.
  const auto& s = trace.samples;
  for (auto& ev : events) {
    const double lo = ev.start;
    const double hi = std::max(ev.end, ev.start + window);
    for (std::size_t k = 1; k < s.size(); ++k) {
      const double a = std::max(lo, s[k - 1].time);
      const double b = std::min(hi, s[k].time);
      if (b > a) ev.delivered_bits += s[k].delivered * (b - a);
    }
  }
  return events;
}

namespace {

double per_flow_interval(const RateTrace& trace, double count) {
  if (count == 0) return std::numeric_limits<double>::infinity();
  const double span = trace.duration - trace.warmup_end;
  return trace.sharing.flow_count * span / count;
}

}  // namespace

double mean_loss_interval_per_flow(const RateTrace& trace) {
  double count = 0;
  for (const auto& l : trace.losses)
    if (l.time >= trace.warmup_end) count += l.count;
  return per_flow_interval(trace, count);
}

double mean_halving_interval_per_flow(const RateTrace& trace) {
  const auto count = std::count_if(trace.halvings.begin(), trace.halvings.end(),
                                   [&](const Halving& h) { return h.time >= trace.warmup_end; });
  return per_flow_interval(trace, static_cast<double>(count));
}

namespace {

template <class Get>
double interpolate(const std::vector<Sample>& s, double t, Get get) {
  if (s.empty()) throw std::invalid_argument("interpolate: empty trace");
  if (t <= s.front().time) return get(s.front());
  if (t >= s.back().time) return get(s.back());
  const auto hi = std::lower_bound(s.begin(), s.end(), t,
                                   [](const Sample& x, double v) { return x.time < v; });
  const auto lo = std::prev(hi);
  const double w = (t - lo->time) / (hi->time - lo->time);
  return get(*lo) * (1.0 - w) + get(*hi) * w;
}

}  // namespace

double queue_at(const RateTrace& trace, double t) {
  return interpolate(trace.samples, t, [](const Sample& x) { return x.queue; });
}

double rate_at(const RateTrace& trace, int flow, double t) {
  const auto i = static_cast<std::size_t>(flow);
  return interpolate(trace.samples, t, [i](const Sample& x) { return x.rates.at(i); });
}

}  // namespace tcpshare::sim
