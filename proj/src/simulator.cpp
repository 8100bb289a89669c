#include "tcpshare/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tcpshare::sim {

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::Isolated: return "isolated";
    case LossMode::Synchronized: return "synchronized";
    case LossMode::Iid: return "iid";
  }
  return "unknown";
}

LossMode loss_mode_from_string(const std::string& name) {
  if (name == "isolated") return LossMode::Isolated;
  if (name == "synchronized") return LossMode::Synchronized;
  if (name == "iid") return LossMode::Iid;
  throw ConfigError("loss_mode", "expected isolated, synchronized or iid, got '" + name + "'");
}

std::string to_string(DropAccounting accounting) {
  return accounting == DropAccounting::WindowGrowth ? "window_growth" : "overflow_volume";
}

DropAccounting drop_accounting_from_string(const std::string& name) {
  if (name == "window_growth") return DropAccounting::WindowGrowth;
  if (name == "overflow_volume") return DropAccounting::OverflowVolume;
  throw ConfigError("drop_accounting",
                    "expected window_growth or overflow_volume, got '" + name + "'");
}

void SimConfig::validate() const {
  sharing.validate();
  if (!(duration > 10.0 * sharing.rtt_base))
    throw ConfigError("duration", "must exceed 10 * rtt_base");
  if (time_step < 0 || step() > sharing.rtt_base / 50.0 * (1.0 + 1e-12))
    throw ConfigError("time_step", "must be positive and at most rtt_base / 50");
  if (sample_interval < 0) throw ConfigError("sample_interval", "must be >= 0");
  if (sampling() < step()) throw ConfigError("sample_interval", "must be >= time_step");
  if (loss_mode == LossMode::Iid && !(iid_p_loss > 0 && iid_p_loss < 1))
    throw ConfigError("iid_p_loss", "must lie in (0, 1) for iid loss mode");
  if (!initial_cwnds.empty()) {
    if (initial_cwnds.size() != static_cast<std::size_t>(sharing.flow_count))
      throw ConfigError("initial_cwnds", "needs exactly flow_count entries");
    for (double w : initial_cwnds)
      if (!(w >= 1.0)) throw ConfigError("initial_cwnds", "windows must be >= 1 segment");
  }
  if (!(warmup_fraction >= 0 && warmup_fraction < 1))
    throw ConfigError("warmup_fraction", "must lie in [0, 1)");
  if (offered_step) {
    if (!(offered_step->at >= 0 && offered_step->at < duration))
      throw ConfigError("offered_step", "step time must lie in [0, duration)");
    if (offered_step->rate_before < 0 || offered_step->rate_after < 0)
      throw ConfigError("offered_step", "source rates must be >= 0");
  }
}

int sample_flow(const std::vector<double>& rates, std::mt19937_64& rng) {
  const double total = std::accumulate(rates.begin(), rates.end(), 0.0);
  if (rates.size() == 1 || !(total > 0)) return 0;
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    acc += rates[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(rates.size()) - 1;
}

namespace {

struct PendingHalving {
  double due = 0.0;
  double hit_time = 0.0;
  double hit_bitrate = 0.0;
};

class FluidModel {
 public:
  explicit FluidModel(const SimConfig& cfg)
      : cfg_(cfg), s_(cfg.sharing), rng_(cfg.seed), dt_(cfg.step()) {
    const auto n = static_cast<std::size_t>(s_.flow_count);
    cwnd_ = cfg.initial_cwnds;
    if (cwnd_.empty()) {
      const double fair = s_.fair_share() * s_.rtt_base / s_.mss;
      std::uniform_real_distribution<double> spread(0.5, 1.5);
      cwnd_.resize(n);
      for (auto& w : cwnd_) w = std::max(1.0, spread(rng_) * fair);
    }
    rates_.assign(n, 0.0);
    pending_.assign(n, std::nullopt);

    trace_.sharing = s_;
    trace_.duration = cfg.duration;
    trace_.warmup_end = cfg.warmup_end();
    trace_.time_step = dt_;
  }

  RateTrace run() {
    const auto steps = static_cast<long long>(std::llround(cfg_.duration / dt_));
    const auto every = std::max<long long>(1, std::llround(cfg_.sampling() / dt_));
    double delivered_since_sample = 0.0;
    double time_since_sample = 0.0;
    trace_.totals.queue_start = queue_;

    for (long long k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) * dt_;
      apply_due_halvings(t);

      const double rtt = s_.rtt_base + queue_ / s_.capacity;
      double tcp = 0.0;
      for (std::size_t i = 0; i < cwnd_.size(); ++i) {
        rates_[i] = cwnd_[i] * s_.mss / rtt;
        tcp += rates_[i];
      }
      const double arrival = tcp + cross_traffic(t);

      if (k % every == 0) {
        Sample smp;
        smp.time = t;
        smp.rates = rates_;
        smp.aggregate = tcp;
        smp.offered = arrival;
        smp.delivered = time_since_sample > 0 ? delivered_since_sample / time_since_sample
                                              : std::min(arrival, s_.capacity);
        smp.queue = queue_;
        smp.rtt = rtt;
        trace_.samples.push_back(std::move(smp));
        delivered_since_sample = 0.0;
        time_since_sample = 0.0;
      }

      if (open_ && (arrival <= s_.capacity || t >= open_->start + open_->rtt_at_start - 1e-12))
        close_event();

      // Queue update with exact volume bookkeeping.
      const double offered = arrival * dt_;
      double next = queue_ + offered - s_.capacity * dt_;
      double delivered = s_.capacity * dt_;
      double dropped = 0.0;
      if (next < 0.0) {
        delivered = queue_ + offered;
        next = 0.0;
      }
      if (next > s_.buffer) {
        dropped = next - s_.buffer;
        next = s_.buffer;
      }
      const double residual = std::abs(offered - delivered - dropped - (next - queue_));
      if (offered > 0)
        trace_.totals.max_step_residual =
            std::max(trace_.totals.max_step_residual, residual / offered);
      trace_.totals.offered += offered;
      trace_.totals.delivered += delivered;
      trace_.totals.dropped += dropped;
      delivered_since_sample += delivered;
      time_since_sample += dt_;
      if (open_) open_->delivered_bits += delivered;

      if (dropped > 0.0) {
        trace_.drops.push_back({t, dropped});
        on_overflow(t, rtt, dropped);
      }
      if (cfg_.loss_mode == LossMode::Iid) random_losses(t, rtt);

      for (auto& w : cwnd_) w += dt_ / (s_.ack_ratio * rtt);
      queue_ = next;
    }
    if (open_) close_event();
    trace_.totals.queue_end = queue_;
    return std::move(trace_);
  }

 private:
  struct OpenEvent {
    CongestionEvent event;
    double start = 0.0;
    double rtt_at_start = 0.0;
    double overflow = 0.0;
    double window_at_start = 0.0;
    int drops = 0;
    double delivered_bits = 0.0;
  };

  double cross_traffic(double t) const {
    if (!cfg_.offered_step) return 0.0;
    return t < cfg_.offered_step->at ? cfg_.offered_step->rate_before
                                     : cfg_.offered_step->rate_after;
  }

  void apply_due_halvings(double t) {
    for (std::size_t i = 0; i < cwnd_.size(); ++i) {
      auto& p = pending_[i];
      if (!p || p->due > t + 1e-12) continue;
      Halving h;
      h.time = t;
      h.flow = static_cast<int>(i);
      h.hit_time = p->hit_time;
      h.hit_bitrate = p->hit_bitrate;
      h.cwnd_before = cwnd_[i];
      h.rtt = s_.rtt_base + queue_ / s_.capacity;
      trace_.halvings.push_back(h);
      cwnd_[i] = std::max(1.0, cwnd_[i] / 2.0);
      p.reset();
    }
  }

  // Records a dropped packet of `flow`; schedules its window reduction
  // unless one is already pending. Returns true if a reduction was scheduled.
  bool hit(int flow, double t, double rtt) {
    trace_.losses.push_back({t, flow, 1});
    auto& p = pending_[static_cast<std::size_t>(flow)];
    if (p) return false;
    p = PendingHalving{t + rtt, t, rates_[static_cast<std::size_t>(flow)]};
    return true;
  }

  void on_overflow(double t, double rtt, double dropped) {
    if (!open_) {
      open_ = OpenEvent{};
      open_->start = t;
      open_->rtt_at_start = rtt;
      open_->event.start = t;
      open_->event.rtt_at_start = rtt;
      open_->window_at_start = total_window();
      register_drop(t, rtt);
    }
    open_->overflow += dropped;
    if (cfg_.loss_mode != LossMode::Synchronized) return;
    if (cfg_.drop_accounting == DropAccounting::OverflowVolume) {
      while (open_->overflow > static_cast<double>(open_->drops) * s_.mss) register_drop(t, rtt);
    } else {
      const double growth = total_window() - open_->window_at_start;
      while (static_cast<double>(open_->drops) < 1.0 + std::floor(growth)) register_drop(t, rtt);
    }
  }

  double total_window() const { return std::accumulate(cwnd_.begin(), cwnd_.end(), 0.0); }

  void register_drop(double t, double rtt) {
    const int flow = sample_flow(rates_, rng_);
    ++open_->drops;
    ++open_->event.losses;
    open_->event.end = t;
    if (hit(flow, t, rtt)) open_->event.flows_hit.push_back(flow);
  }

  void close_event() {
    open_->event.delivered_bits = open_->delivered_bits;
    trace_.events.push_back(std::move(open_->event));
    open_.reset();
  }

  void random_losses(double t, double rtt) {
    const double log_keep = std::log1p(-cfg_.iid_p_loss);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < cwnd_.size(); ++i) {
      const double packets = rates_[i] * dt_ / s_.mss;
      const double p_any = -std::expm1(packets * log_keep);
      if (u01(rng_) < p_any) hit(static_cast<int>(i), t, rtt);
    }
  }

  const SimConfig& cfg_;
  const SharingConfig& s_;
  std::mt19937_64 rng_;
  double dt_;
  double queue_ = 0.0;
  std::vector<double> cwnd_;
  std::vector<double> rates_;
  std::vector<std::optional<PendingHalving>> pending_;
  std::optional<OpenEvent> open_;
  RateTrace trace_;
};

}  // namespace

RateTrace run(const SimConfig& config) {
  config.validate();
  return FluidModel(config).run();
}

StepResponse step_response(const SimConfig& config, double delta_offered, double at) {
  SimConfig cfg = config;
  OfferedStep step;
  step.at = at;
  if (delta_offered >= 0) {
    step.rate_after = delta_offered;
  } else {
    step.rate_before = -delta_offered;
  }
  cfg.offered_step = step;
  cfg.validate();

  StepResponse out;
  out.trace = FluidModel(cfg).run();
  const auto& samples = out.trace.samples;
  const auto first = std::lower_bound(samples.begin(), samples.end(), at,
                                      [](const Sample& s, double t) { return s.time < t; });
  if (first == samples.end()) throw std::invalid_argument("step_response: step after last sample");
  out.queue_at_step = first->queue;
  out.rtt_at_step = first->rtt;
  out.headroom = cfg.sharing.buffer - first->queue;

  // Drift of the offered rate from capacity just before the step; TCP
  // probing keeps this slightly positive while the queue is nonempty.
  const double capacity = cfg.sharing.capacity;
  const double baseline = first != samples.begin() ? std::prev(first)->offered - capacity : 0.0;
  const double threshold = std::abs(delta_offered) / std::exp(1.0);
  out.settle_time = 0.0;
  if (delta_offered != 0.0) {
    out.settle_time = out.trace.duration - at;
    for (auto it = first; it != samples.end(); ++it) {
      if (std::abs(it->offered - capacity - baseline) <= threshold) {
        out.settle_time = it->time - at;
        break;
      }
    }
  }

  const double horizon = at + 3.0 * out.settle_time;
  for (const auto& d : out.trace.drops)
    if (d.time >= at && d.time <= horizon) out.lost += d.bits;
  return out;
}

}  // namespace tcpshare::sim
