#include "tcpshare/crosscheck.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "tcpshare/analytic.hpp"

namespace tcpshare::sim {

namespace {

std::vector<double> sorted_times(const RateTrace& trace) {
  std::vector<double> t;
  for (const auto& h : trace.halvings) t.push_back(h.time);
  for (const auto& l : trace.losses) t.push_back(l.time);
  std::sort(t.begin(), t.end());
  return t;
}

bool any_in(const std::vector<double>& sorted, double lo, double hi) {
  auto it = std::upper_bound(sorted.begin(), sorted.end(), lo);
  return it != sorted.end() && *it <= hi;
}

std::size_t sample_index(const RateTrace& trace, double t) {
  auto it = std::lower_bound(trace.samples.begin(), trace.samples.end(), t,
                             [](const Sample& s, double v) { return s.time < v; });
  return static_cast<std::size_t>(it - trace.samples.begin());
}

// Least-squares quadratic through (t, y), evaluated at t_eval.
double quadratic_extrapolate(const std::vector<double>& t, const std::vector<double>& y,
                             double t_eval) {
  const Eigen::Index n = static_cast<Eigen::Index>(t.size());
  const double t0 = t.front();
  const double span = std::max(t.back() - t0, 1e-12);
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = (t[i] - t0) / span;
    a(i, 0) = 1.0;
    a(i, 1) = x;
    a(i, 2) = x * x;
    b(i) = y[i];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  const double x = (t_eval - t0) / span;
  return c(0) + c(1) * x + c(2) * x * x;
}

const QuietInterval* containing(const std::vector<QuietInterval>& iv, double t) {
  for (const auto& q : iv)
    if (q.start <= t && t < q.end) return &q;
  return nullptr;
}

}  // namespace

std::vector<QuietInterval> quiet_intervals(const RateTrace& trace, double settle_rtts) {
  std::vector<QuietInterval> out;
  const auto disturb = sorted_times(trace);
  const double buffer = trace.sharing.buffer;
  const double eps = 1e-9 * std::max(buffer, 1.0);

  double clean_from = trace.warmup_end;
  bool open = false;
  QuietInterval cur;
  double prev = trace.samples.empty() ? 0.0 : trace.samples.front().time;
  for (const Sample& s : trace.samples) {
    const bool bad = s.queue <= eps || s.queue >= buffer - eps || any_in(disturb, prev, s.time);
    if (bad) {
      if (open && cur.end > cur.start) out.push_back(cur);
      open = false;
      clean_from = std::max(clean_from, s.time + settle_rtts * s.rtt);
    } else if (s.time >= clean_from) {
      if (!open) {
        cur.start = s.time;
        open = true;
      }
      cur.end = s.time;
    }
    prev = s.time;
  }
  if (open && cur.end > cur.start) out.push_back(cur);
  return out;
}

RttGrowthCheck check_rtt_growth(const RateTrace& trace, double settle_rtts) {
  RttGrowthCheck r;
  for (const auto& q : quiet_intervals(trace, settle_rtts)) {
    const std::size_t i0 = sample_index(trace, q.start);
    const double r0 = trace.samples[i0].rtt;
    bool used = false;
    for (std::size_t i = i0; i < trace.samples.size() && trace.samples[i].time <= q.end; ++i) {
      const Sample& s = trace.samples[i];
      const double pred = analytic::rtt_growth(trace.sharing, s.time - q.start, r0).exact;
      r.max_rel_error = std::max(r.max_rel_error, std::abs(s.rtt - pred) / pred);
      used = true;
    }
    if (used) ++r.intervals;
  }
  return r;
}

ConvergenceCheck check_convergence(const RateTrace& trace, double window, double tolerance) {
  ConvergenceCheck r;
  const auto quiet = quiet_intervals(trace, 3.0);
  const int n = trace.sharing.flow_count;
  for (const auto& ev : trace.events) {
    if (ev.start < trace.warmup_end) continue;
    ++r.events;
    // Last reduction caused by this event.
    double last = ev.start;
    for (const auto& h : trace.halvings)
      if (h.hit_time >= ev.start && h.hit_time <= ev.end) last = std::max(last, h.time);
    // First quiet instant after it, within the same gap between events.
    const QuietInterval* q = nullptr;
    for (const auto& c : quiet)
      if (c.start >= last) {
        q = &c;
        break;
      }
    if (!q) continue;
    bool crosses = false;
    for (const auto& other : trace.events)
      if (other.start > ev.start && other.start <= q->start) crosses = true;
    if (crosses) continue;

    const double t0 = q->start;
    const double t1 = std::min(q->end, t0 + window);
    const std::size_t i0 = sample_index(trace, t0);
    if (i0 + 2 >= trace.samples.size() || trace.samples[i0 + 2].time > t1) continue;
    ++r.measured;
    const Sample& s0 = trace.samples[i0];
    double worst = 0.0;
    for (std::size_t i = i0; i < trace.samples.size() && trace.samples[i].time <= t1; ++i) {
      const Sample& s = trace.samples[i];
      for (int f = 0; f < n; ++f) {
        const double pred =
            analytic::convergence_trajectory(trace.sharing, s0.rates[f], s.time - t0, s0.rtt);
        worst = std::max(worst, std::abs(s.rates[f] - pred) / pred);
      }
    }
    r.errors.push_back(worst);
    r.worst_error = std::max(r.worst_error, worst);
    if (worst <= tolerance) ++r.passed;
  }
  return r;
}

StepCheck check_step_sizes(const RateTrace& trace, double tolerance) {
  StepCheck r;
  const auto disturb = sorted_times(trace);
  const auto quiet = quiet_intervals(trace, 6.0);
  const int n = trace.sharing.flow_count;

  for (const auto& h : trace.halvings) {
    if (h.hit_time < trace.warmup_end) continue;
    // Single reduction: nothing else within three RTTs before the hit and
    // nothing between the hit and the end of the fit window.
    bool alone = true;
    for (const auto& o : trace.halvings)
      if (&o != &h && o.time > h.hit_time - 3.0 * h.rtt && o.time <= h.time + 6.0 * h.rtt)
        alone = false;
    int losses_in_lag = 0;
    for (const auto& l : trace.losses)
      if (l.time >= h.hit_time - 3.0 * h.rtt && l.time < h.time) ++losses_in_lag;
    if (!alone || losses_in_lag != 1) continue;
    ++r.candidates;

    const double fit_from = h.time + 6.0 * h.rtt;
    const QuietInterval* q = containing(quiet, fit_from);
    if (!q) continue;
    const double fit_to = std::min(q->end, fit_from + 1.0);
    if (fit_to - fit_from < 0.3) continue;
    // Queue must have stayed busy from the hit to the fit window.
    bool busy = true;
    for (std::size_t i = sample_index(trace, h.hit_time);
         i < trace.samples.size() && trace.samples[i].time <= fit_from; ++i)
      if (trace.samples[i].queue <= 0.0) busy = false;
    if (!busy || any_in(disturb, h.time, fit_to)) continue;
    ++r.measured;

    std::vector<double> ts;
    std::vector<std::vector<double>> ys(n);
    for (std::size_t i = sample_index(trace, fit_from);
         i < trace.samples.size() && trace.samples[i].time <= fit_to; ++i) {
      ts.push_back(trace.samples[i].time);
      for (int f = 0; f < n; ++f) ys[f].push_back(trace.samples[i].rates[f]);
    }

    bool ok = true;
    for (int f = 0; f < n; ++f) {
      const double before = f == h.flow ? h.hit_bitrate : rate_at(trace, f, h.hit_time);
      const double after = quadratic_extrapolate(ts, ys[f], h.hit_time);
      const double measured = after - before;
      const bool hit = f == h.flow;
      const double pred =
          analytic::step_up(trace.sharing, {0.0, before}, h.hit_bitrate,
                            hit ? analytic::StepRole::Hit : analytic::StepRole::Other);
      const double err = std::abs(measured - pred) / std::abs(pred);
      if (hit)
        r.worst_hit_error = std::max(r.worst_hit_error, err);
      else
        r.worst_other_error = std::max(r.worst_other_error, err);
      if (err > tolerance) ok = false;
    }
    if (ok) ++r.passed;
  }
  return r;
}

}  // namespace tcpshare::sim
