#include "doctest.h"

#include <cmath>

#include "tcpshare/analytic.hpp"
#include "tcpshare/crosscheck.hpp"

using namespace tcpshare;
using namespace tcpshare::sim;

namespace {

// Loss-free trace whose RTT follows the square-root law from an empty queue.
RateTrace synthetic_growth(double wobble) {
  RateTrace t;
  t.duration = 20;
  t.time_step = 1e-3;
  t.sharing.buffer = 1e9;
  const double c = t.sharing.capacity;
  for (int i = 0; i <= 2000; ++i) {
    Sample s;
    s.time = i * 0.01;
    s.rtt = analytic::rtt_growth(t.sharing, s.time).exact * (1 + wobble * std::sin(s.time));
    s.queue = (s.rtt - t.sharing.rtt_base) * c;
    s.rates.assign(t.sharing.flow_count, c / t.sharing.flow_count);
    s.aggregate = s.offered = s.delivered = c;
    t.samples.push_back(s);
  }
  return t;
}

}  // namespace

TEST_SUITE("crosscheck") {

TEST_CASE("quiet intervals exclude disturbances") {
  const auto t = run(SimConfig{});
  const auto iv = quiet_intervals(t);
  REQUIRE(!iv.empty());
  for (const auto& q : iv) {
    CHECK(q.start >= t.warmup_end);
    CHECK(q.end > q.start);
    for (const auto& l : t.losses) CHECK(!(l.time > q.start && l.time <= q.end));
    for (const auto& h : t.halvings) CHECK(!(h.time > q.start && h.time <= q.end));
    for (const auto& s : t.samples)
      if (s.time >= q.start && s.time <= q.end) {
        CHECK(s.queue > 0);
        CHECK(s.queue < t.sharing.buffer);
      }
  }
}

TEST_CASE("rtt growth check on an exact trace") {
  const auto exact = check_rtt_growth(synthetic_growth(0.0));
  CHECK(exact.intervals == 1);
  CHECK(exact.max_rel_error < 1e-9);

  const auto off = check_rtt_growth(synthetic_growth(0.05));
  CHECK(off.max_rel_error > 0.04);
}

TEST_CASE("rtt growth in simulated runs") {
  for (auto mode : {LossMode::Synchronized, LossMode::Isolated}) {
    SimConfig c;
    c.loss_mode = mode;
    const auto r = check_rtt_growth(run(c));
    CHECK(r.intervals > 20);
    CHECK(r.max_rel_error < 0.02);
  }
}

TEST_CASE("convergence after congestion events") {
  const auto r = check_convergence(run(SimConfig{}));
  CHECK(r.events > 20);
  CHECK(r.measured >= 0.9 * r.events);
  CHECK(r.passed >= 0.95 * r.measured);
  CHECK(r.errors.size() == static_cast<std::size_t>(r.measured));
}

TEST_CASE("rate steps at isolated reductions") {
  SimConfig c;
  c.loss_mode = LossMode::Isolated;
  int measured = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    c.seed = seed;
    const auto r = check_step_sizes(run(c));
    CHECK(r.measured <= r.candidates);
    CHECK(r.passed == r.measured);
    CHECK(r.worst_hit_error < 0.05);
    CHECK(r.worst_other_error < 0.05);
    measured += r.measured;
  }
  CHECK(measured >= 30);

  // Synchronized reductions never qualify.
  const auto sync = check_step_sizes(run(SimConfig{}));
  CHECK(sync.measured <= sync.candidates);
}

}  // TEST_SUITE
