#include "tcpshare/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "tcpshare/analytic.hpp"
#include "tcpshare/commands.hpp"
#include "tcpshare/crosscheck.hpp"
#include "tcpshare/markov.hpp"
#include "tcpshare/resampler.hpp"

namespace tcpshare::verify {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

sim::SimConfig with_mode(sim::SimConfig c, sim::LossMode mode, double buffer) {
  c.loss_mode = mode;
  c.sharing.buffer = buffer;
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string check_name(int id) {
  static const char* names[] = {"loss_interval",        "buffer_lower_bound",
                                "synchronization_bound", "rtt_growth",
                                "convergence",          "step_sizes",
                                "markov_chain",         "distribution_shape",
                                "macroscopic_consistency", "resampler_dealiasing",
                                "step_absorption",      "determinism"};
  if (id < 1 || id > kCheckCount) throw std::out_of_range("no check " + std::to_string(id));
  return names[id - 1];
}

namespace {

CheckResult result(int id) {
  CheckResult r;
  r.id = id;
  r.name = check_name(id);
  return r;
}

}  // namespace

CheckResult loss_interval(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const auto trace = sim::run(o.base);
  const double ts = sim::mean_loss_interval_per_flow(trace);
  CheckResult r = result(1);
  r.seconds = since(t0);
  r.passed = std::abs(ts - 11.0) <= 0.2 * 11.0 && r.seconds < 30.0;
  r.detail = fmt::format("T_s = {:.3f} s (target 11 s +-20%), runtime {:.2f} s (< 30 s)", ts,
                         r.seconds);
  return r;
}

CheckResult buffer_lower_bound(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const double bound = analytic::buffer_bound_best(o.base.sharing);
  const auto full = sim::run(with_mode(o.base, sim::LossMode::Isolated, bound));
  const auto half = sim::run(with_mode(o.base, sim::LossMode::Isolated, 0.5 * bound));
  const double u_full = sim::measure_utilization(full, o.base.sharing.capacity);
  const double u_half = sim::measure_utilization(half, o.base.sharing.capacity);
  CheckResult r = result(2);
  r.seconds = since(t0);
  r.passed = u_full >= 0.99 && u_half <= 0.98 && r.seconds < 60.0;
  r.detail = fmt::format(
      "bound {:.4g} bit: utilization {:.4f} at 1.0x (>= 0.99), {:.4f} at 0.5x (<= 0.98)", bound,
      u_full, u_half);
  return r;
}

CheckResult synchronization_bound(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const double bound = analytic::buffer_bound_sync(o.base.sharing);
  const auto trace = sim::run(with_mode(o.base, sim::LossMode::Synchronized, bound));
  const double u = sim::measure_utilization(trace, o.base.sharing.capacity);
  const int most =
      static_cast<int>(std::floor(o.base.sharing.flow_count / o.base.sharing.ack_ratio));
  int events = 0, inside = 0;
  for (const auto& e : trace.events) {
    if (e.start < trace.warmup_end) continue;
    ++events;
    const int hits = static_cast<int>(e.flows_hit.size());
    if (hits >= 2 && hits <= most) ++inside;
  }
  const double share = events ? static_cast<double>(inside) / events : 0.0;
  CheckResult r = result(3);
  r.seconds = since(t0);
  r.passed = u >= 0.99 && share >= 0.9;
  r.detail = fmt::format(
      "bound {:.4g} bit: utilization {:.4f} (>= 0.99); {}/{} events halve 2..{} flows "
      "({:.3f}, >= 0.90)",
      bound, u, inside, events, most, share);
  return r;
}

CheckResult rtt_growth(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const auto g = sim::check_rtt_growth(sim::run(o.base));
  CheckResult r = result(4);
  r.seconds = since(t0);
  r.passed = g.intervals > 0 && g.max_rel_error < 0.02;
  r.detail = fmt::format("{} loss-free intervals, worst relative error {:.4f} (< 0.02)",
                         g.intervals, g.max_rel_error);
  return r;
}

CheckResult convergence(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const auto c = sim::check_convergence(sim::run(o.base), 2.0, 0.05);
  const double share = c.events ? static_cast<double>(c.passed) / c.events : 0.0;
  CheckResult r = result(5);
  r.seconds = since(t0);
  r.passed = c.events > 0 && share >= 0.95;
  r.detail = fmt::format(
      "{}/{} events within 5% over 2 s ({:.3f}, >= 0.95); {} measurable, worst error {:.4f}",
      c.passed, c.events, share, c.measured, c.worst_error);
  return r;
}

CheckResult step_sizes(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const auto trace = sim::run(with_mode(o.base, sim::LossMode::Isolated, o.base.sharing.buffer));
  const auto s = sim::check_step_sizes(trace, 0.05);
  CheckResult r = result(6);
  r.seconds = since(t0);
  r.passed = s.measured >= 10 && s.passed == s.measured;
  r.detail = fmt::format(
      "{}/{} measurable isolated events within 5% (of {} single reductions); worst error "
      "hit {:.4f}, others {:.4f}",
      s.passed, s.measured, s.candidates, s.worst_hit_error, s.worst_other_error);
  return r;
}

CheckResult markov_chain(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  struct Case {
    double p_loss, ack_ratio;
  };
  const Case cases[] = {{1e-4, 2.0}, {1e-3, 2.0}, {1e-2, 1.0}};
  bool ok = true;
  std::string detail;
  for (std::size_t i = 0; i < std::size(cases); ++i) {
    const markov::ChainParams params{cases[i].p_loss, cases[i].ack_ratio, 0};
    const auto matrix = markov::build_chain(params);
    const auto lu = markov::stationary(matrix);
    const auto power = markov::stationary_power(matrix);
    double agree = 0.0;
    for (int k = 0; k < lu.size(); ++k)
      agree = std::max(agree, std::abs(lu.probabilities[k] - power.probabilities[k]));
    const double residual = markov::node_balance_residual(params, lu);
    const auto mc = markov::monte_carlo_oracle(params, o.base.sharing.mss,
                                               o.base.sharing.rtt_base, o.oracle_steps, 1 + i);
    const double tv = markov::total_variation(lu.probabilities, mc.probabilities);
    ok = ok && residual < 1e-10 && agree < 1e-9 && tv < 0.05;
    detail += fmt::format("{}(p={:g},a={:g}: residual {:.1e}, solvers {:.1e}, TV {:.4f})",
                          i ? "; " : "", cases[i].p_loss, cases[i].ack_ratio, residual, agree, tv);
  }
  CheckResult r = result(7);
  r.seconds = since(t0);
  r.passed = ok && r.seconds < 120.0;
  r.detail = detail + fmt::format(" [limits 1e-10, 1e-9, 0.05; runtime {:.2f} s < 120 s]",
                                  r.seconds);
  return r;
}

CheckResult distribution_shape(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const auto& cfg = o.base.sharing;
  const double p = analytic::loss_probability(cfg);
  const auto dist = markov::stationary(markov::build_chain({p, cfg.ack_ratio, 0}));
  const auto rates = markov::bitrate_distribution(dist, cfg.mss, cfg.rtt_base);
  const double bs = cfg.fair_share();
  const double mass = rates.mass_between(bs / 3.0, 3.0 * bs);
  const auto cmp = markov::compare_to_lognormal(dist, markov::LogNormalFit::for_loss(p, cfg.ack_ratio));
  CheckResult r = result(8);
  r.seconds = since(t0);
  r.passed = mass > 0.9 && cmp.central_gap < 0.05;
  r.detail = fmt::format(
      "P_loss {:.4g}: mass in (b_s/3, 3 b_s) {:.4f} (> 0.90), central CDF gap {:.4f} (< 0.05)", p,
      mass, cmp.central_gap);
  return r;
}

CheckResult macroscopic_consistency(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  std::vector<SharingConfig> configs{o.base.sharing};
  for (int n : {1, 3, 30, 100}) {
    SharingConfig c = o.base.sharing;
    c.flow_count = n;
    configs.push_back(c);
  }
  SharingConfig fast = o.base.sharing;
  fast.capacity = 1e10;
  fast.ack_ratio = 1.0;
  configs.push_back(fast);
  double worst = 0.0;
  for (const auto& c : configs) {
    const double p = analytic::loss_probability(c);
    const auto tp = analytic::macroscopic_throughput(p, c.mss, c.rtt_base, c.ack_ratio, c.flow_count);
    worst = std::max(worst, std::abs(tp.per_flow - c.fair_share()) / c.fair_share());
  }
  CheckResult r = result(9);
  r.seconds = since(t0);
  r.passed = worst < 1e-9;
  r.detail = fmt::format("{} configs, worst fair-share round-trip error {:.2e} (< 1e-9)",
                         configs.size(), worst);
  return r;
}

CheckResult resampler_dealiasing(const VerifyOptions&) {
  const auto t0 = Clock::now();
  const double period = 0.109;
  const int packets = 100;
  const double size = 12000.0;
  const auto trace = resampler::burst_trace(period, packets, size, 1e9, 300);
  const double cycle_mean = packets * size / period;
  // Start inside the idle gap so each interval holds exactly one burst.
  const auto matched = resampler::resample(
      trace, resampler::RttSeries::constant(period, 0.0, 300 * period), 0.5 * period);
  const auto fixed = resampler::fixed_sample(trace, 0.1);
  const auto m = matched.flow_rates(0);
  const auto f = fixed.flow_rates(0);
  double worst = 0.0;
  for (double b : m) worst = std::max(worst, std::abs(b - cycle_mean) / cycle_mean);
  const double vm = resampler::variance(m);
  const double vf = resampler::variance(f);
  CheckResult r = result(10);
  r.seconds = since(t0);
  r.passed = !m.empty() && vf >= 5.0 * vm && worst < 0.01;
  r.detail = fmt::format(
      "variance fixed 0.1 s {:.3e} vs RTT-matched {:.3e} (ratio >= 5); worst deviation from "
      "cycle mean {:.2e} (< 0.01)",
      vf, vm, worst);
  return r;
}

AbsorptionTrial absorption_trial(const sim::SimConfig& config, double delta, double at,
                                 double headroom_factor) {
  sim::SimConfig c = config;
  c.duration = at + 5.0;
  c.warmup_fraction = 0.0;
  c.sharing.buffer = 1e18;
  const auto probe = sim::step_response(c, 0.0, at);

  AbsorptionTrial t;
  t.queue_at_step = probe.queue_at_step;
  t.rtt_after = probe.rtt_at_step / (1.0 - delta / c.sharing.capacity);
  t.required = analytic::queue_absorption(c.sharing, delta, t.rtt_after);
  c.sharing.buffer = t.queue_at_step + headroom_factor * t.required;
  const auto step = sim::step_response(c, delta, at);
  t.headroom = step.headroom;
  t.lost = step.lost;
  t.settle_time = step.settle_time;
  return t;
}

CheckResult step_absorption(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  const double delta = 0.2 * o.base.sharing.capacity;
  const double at = 10.0;
  const auto full = absorption_trial(o.base, delta, at, 1.0);
  const auto half = absorption_trial(o.base, delta, at, 0.5);
  CheckResult r = result(11);
  r.seconds = since(t0);
  r.passed = full.lost == 0.0 && half.lost > 0.0;
  r.detail = fmt::format(
      "step {:.3g} bit/s at {} s: headroom {:.4g} bit (1.0x RTT*dB) lost {:.4g} bit (== 0); "
      "headroom {:.4g} bit (0.5x) lost {:.4g} bit (> 0)",
      delta, at, full.headroom, full.lost, half.headroom, half.lost);
  return r;
}

CheckResult determinism(const VerifyOptions& o) {
  const auto t0 = Clock::now();
  namespace fs = std::filesystem;
  const fs::path root =
      (o.scratch.empty() ? fs::temp_directory_path() : o.scratch) /
      fmt::format("tcpshare-determinism-{}",
                  std::chrono::system_clock::now().time_since_epoch().count());
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  io::write_json_file(config, io::to_json(o.base));

  std::vector<fs::path> dirs{root / "a", root / "b"};
  bool ran = true;
  for (const auto& d : dirs) {
    cli::Manifest m;
    m.command = "simulate";
    m.config = config;
    m.out = d;
    std::ostringstream sink;
    ran = ran && cli::cmd_simulate(m, sink) == cli::kExitOk;
  }
  int files = 0, same = 0;
  if (ran)
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++files;
      const fs::path other = dirs[1] / entry.path().filename();
      if (fs::exists(other) && read_file(entry.path()) == read_file(other)) ++same;
    }
  fs::remove_all(root);
  CheckResult r = result(12);
  r.seconds = since(t0);
  r.passed = ran && files > 0 && same == files;
  r.detail = fmt::format("{}/{} output files byte-identical across two runs", same, files);
  return r;
}

CheckResult run_check(int id, const VerifyOptions& o) {
  using Fn = CheckResult (*)(const VerifyOptions&);
  static const Fn checks[] = {loss_interval,        buffer_lower_bound, synchronization_bound,
                              rtt_growth,           convergence,        step_sizes,
                              markov_chain,         distribution_shape, macroscopic_consistency,
                              resampler_dealiasing, step_absorption,    determinism};
  if (id < 1 || id > kCheckCount) throw std::out_of_range("no check " + std::to_string(id));
  return checks[id - 1](o);
}

std::vector<CheckResult> run_all(const VerifyOptions& o) {
  std::vector<CheckResult> out;
  for (int id = 1; id <= kCheckCount; ++id) out.push_back(run_check(id, o));
  return out;
}

}  // namespace tcpshare::verify
