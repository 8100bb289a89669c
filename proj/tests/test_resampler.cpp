#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tcpshare/resampler.hpp"

using namespace tcpshare;
using namespace tcpshare::resampler;

namespace {

PacketTrace constant_rate(double rate, double size, double until, int flow = 0) {
  PacketTrace t;
  const double gap = size / rate;
  for (int k = 0; (k + 0.5) * gap <= until; ++k) t.records.push_back({(k + 0.5) * gap, size, flow});
  return t;
}

// Volume of one flow's piecewise-constant fluid rate over (lo, hi].
double fluid_volume(const sim::RateTrace& t, int flow, double lo, double hi) {
  double v = 0;
  for (std::size_t k = 0; k + 1 < t.samples.size(); ++k) {
    const double a = std::max(lo, t.samples[k].time);
    const double b = std::min(hi, t.samples[k + 1].time);
    if (b > a) v += t.samples[k].rates[flow] * (b - a);
  }
  return v;
}

}  // namespace

TEST_SUITE("resampler") {

TEST_CASE("constant rate stays constant") {
  const auto trace = constant_rate(1.2e6, 12000, 10.0);
  // Boundaries fall midway between arrivals.
  const auto r = resample(trace, RttSeries::constant(0.1, 0, 10), 0.01);
  REQUIRE(r.intervals() > 50);
  for (std::size_t i = 0; i < r.intervals(); ++i)
    CHECK(r.aggregate(i) == doctest::Approx(1.2e6).epsilon(1e-9));

  const auto f = fixed_sample(trace, 0.5);
  REQUIRE(f.intervals() > 10);
  for (std::size_t i = 0; i < f.intervals(); ++i)
    CHECK(f.aggregate(i) == doctest::Approx(1.2e6).epsilon(1e-9));
}

TEST_CASE("boundaries follow the rtt recurrence") {
  PacketTrace t;
  for (int k = 0; k <= 105; ++k) t.records.push_back({k * 0.01, 1000, 0});
  const auto r = resample(t, RttSeries::constant(0.1, 0, 2), 0.0);
  REQUIRE(r.boundaries.size() == 11);
  for (std::size_t i = 0; i < r.boundaries.size(); ++i)
    CHECK(r.boundaries[i] == doctest::Approx(0.1 * i));

  RttSeries varying;
  varying.knots = {{0.0, 0.1}, {0.25, 0.2}, {2.0, 0.2}};
  const auto v = resample(t, varying, 0.0);
  const std::vector<double> expected{0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9};
  REQUIRE(v.boundaries.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i)
    CHECK(v.boundaries[i] == doctest::Approx(expected[i]));
}

TEST_CASE("intervals are open on the left") {
  PacketTrace t;
  t.records = {{0.0, 100, 0}, {0.1, 100, 0}, {0.15, 100, 1}, {0.2, 100, 0}, {0.35, 1, 0}};
  const auto r = resample(t, RttSeries::constant(0.1, 0, 1), 0.0);
  REQUIRE(r.intervals() == 3);
  CHECK(r.flows == std::vector<int>{0, 1});
  CHECK(r.flow_rates(0)[0] == doctest::Approx(1000));
  CHECK(r.flow_rates(0)[1] == doctest::Approx(1000));
  CHECK(r.flow_rates(1)[1] == doctest::Approx(1000));
  CHECK(r.flow_rates(7) == std::vector<double>(3, 0.0));
}

TEST_CASE("burst trace de-aliasing") {
  const double period = 0.109, size = 12000;
  const int packets = 100;
  const auto trace = burst_trace(period, packets, size, 1e9, 300);
  const double truth = packets * size / period;

  const auto matched = resample(trace, RttSeries::constant(period, 0, 300 * period), 0.5 * period);
  const auto rates = matched.flow_rates(0);
  REQUIRE(rates.size() > 250);
  for (double r : rates) CHECK(r == doctest::Approx(truth).epsilon(0.01));

  const auto fixed = fixed_sample(trace, 0.1).flow_rates(0);
  REQUIRE(fixed.size() > 250);
  CHECK(variance(fixed) >= 5 * variance(rates));
  CHECK(variance(fixed) > 1e10);
}

TEST_CASE("empty and invalid input") {
  const PacketTrace empty;
  CHECK(fixed_sample(empty, 0.1).intervals() == 0);
  CHECK(resample(empty, RttSeries::constant(0.1, 0, 1), 0).intervals() == 0);
  CHECK_THROWS_AS(fixed_sample(empty, 0.0), std::invalid_argument);

  const auto t = constant_rate(1e6, 1000, 2.0);
  CHECK_THROWS_AS(resample(t, RttSeries::constant(0.1, 0, 1), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(resample(t, RttSeries::constant(0.1, 0, 2), 0.0), std::invalid_argument);

  PacketTrace backwards;
  backwards.records = {{1.0, 100, 0}, {0.5, 100, 0}};
  CHECK_THROWS_AS(backwards.validate(), std::invalid_argument);

  RttSeries bad;
  bad.knots = {{0.0, 0.1}, {0.0, 0.1}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(RttSeries::constant(0.1, 1, 2).at(0.5), std::out_of_range);
  CHECK_THROWS_AS(burst_trace(0.01, 100, 12000, 1e8, 1), std::invalid_argument);
}

TEST_CASE("rtt from queue occupancy") {
  const auto flat = rtt_from_queue_trace({{0, 0}, {1, 0}, {2, 0}}, 1e8, 0.1);
  for (const auto& k : flat.knots) CHECK(k.rtt == doctest::Approx(0.1));

  const auto full = rtt_from_queue_trace({{0, 3e6}}, 1e8, 0.1);
  CHECK(full.knots[0].rtt == doctest::Approx(0.13));

  std::vector<std::pair<double, double>> ramp;
  for (int i = 0; i < 50; ++i) ramp.emplace_back(i * 0.1, i * 1e5);
  const auto r = rtt_from_queue_trace(ramp, 1e8, 0.1);
  for (std::size_t i = 1; i < r.knots.size(); ++i) CHECK(r.knots[i].rtt > r.knots[i - 1].rtt);
  CHECK(r.at(0.25) == doctest::Approx(r.knots[2].rtt));
}

TEST_CASE("packetized simulation reproduces the fluid rates") {
  sim::SimConfig c;
  c.duration = 60;
  const auto sim_trace = sim::run(c);
  const double mss = c.sharing.mss;
  const auto packets = packetize(sim_trace, mss);
  packets.validate();

  double fluid_total = 0;
  for (int f = 0; f < c.sharing.flow_count; ++f)
    fluid_total += fluid_volume(sim_trace, f, 0, sim_trace.samples.back().time);
  CHECK(packets.volume() == doctest::Approx(fluid_total).epsilon(c.sharing.flow_count * mss /
                                                                 fluid_total));

  const double t0 = 30.0;
  const auto r = resample(packets, rtt_from_queue_trace(sim_trace), t0);
  REQUIRE(r.intervals() > 100);
  double worst_agg = 0, worst_flow = 0;
  for (std::size_t i = 0; i < r.intervals(); ++i) {
    const double lo = r.boundaries[i], hi = r.boundaries[i + 1];
    double agg = 0;
    for (std::size_t k = 0; k < r.flows.size(); ++k) {
      const double v = fluid_volume(sim_trace, r.flows[k], lo, hi);
      agg += v;
      // A flow's interval volume is quantized to whole segments.
      if (v >= 100 * mss)
        worst_flow = std::max(worst_flow, std::abs(r.rates[i][k] * (hi - lo) / v - 1));
    }
    worst_agg = std::max(worst_agg, std::abs(r.aggregate(i) * (hi - lo) / agg - 1));
  }
  CHECK(worst_agg < 0.02);
  CHECK(worst_flow < 0.02);
}

TEST_CASE("csv round trip") {
  const auto trace = burst_trace(0.109, 3, 12000, 1e9, 4, 0.01);
  std::stringstream s;
  write_packet_csv(s, trace);
  const auto back = read_packet_csv(s);
  REQUIRE(back.records.size() == trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    CHECK(back.records[i].arrival == trace.records[i].arrival);
    CHECK(back.records[i].size == trace.records[i].size);
  }

  RttSeries rtt;
  rtt.knots = {{0, 0.1}, {0.5, 0.125}};
  std::stringstream rs;
  write_rtt_csv(rs, rtt);
  const auto rtt_back = read_rtt_csv(rs);
  REQUIRE(rtt_back.knots.size() == 2);
  CHECK(rtt_back.knots[1].rtt == 0.125);

  std::stringstream bad("arrival_s,size_bits,flow_id\n0.1,12000,0\n0.2,abc,0\n");
  try {
    read_packet_csv(bad);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  std::stringstream wrong_header("time,size\n");
  CHECK_THROWS_AS(read_packet_csv(wrong_header), std::runtime_error);
}

}  // TEST_SUITE
