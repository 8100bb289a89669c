#include "tcpshare/resampler.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace tcpshare::resampler {

void PacketTrace::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!(records[i].size > 0))
      throw std::invalid_argument(fmt::format("packet {}: size must be > 0", i));
    if (i > 0 && records[i].arrival < records[i - 1].arrival)
      throw std::invalid_argument(fmt::format("packet {}: arrivals must be non-decreasing", i));
  }
}

double PacketTrace::volume() const {
  double v = 0.0;
  for (const auto& p : records) v += p.size;
  return v;
}

RttSeries RttSeries::constant(double rtt, double from, double to) {
  return {{{from, rtt}, {to, rtt}}};
}

void RttSeries::validate() const {
  if (knots.empty()) throw std::invalid_argument("rtt series is empty");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].rtt > 0))
      throw std::invalid_argument(fmt::format("rtt knot {}: rtt must be > 0", i));
    if (i > 0 && !(knots[i].time > knots[i - 1].time))
      throw std::invalid_argument(fmt::format("rtt knot {}: times must increase", i));
  }
}

double RttSeries::at(double t) const {
  if (knots.empty() || t < knots.front().time)
    throw std::out_of_range(fmt::format("rtt series does not cover t = {}", t));
  auto it = std::upper_bound(knots.begin(), knots.end(), t,
                             [](double v, const RttKnot& k) { return v < k.time; });
  return std::prev(it)->rtt;
}

double ResampledTrace::aggregate(std::size_t i) const {
  double s = 0.0;
  for (double r : rates[i]) s += r;
  return s;
}

std::vector<double> ResampledTrace::flow_rates(int flow) const {
  std::vector<double> out(rates.size(), 0.0);
  auto it = std::lower_bound(flows.begin(), flows.end(), flow);
  if (it == flows.end() || *it != flow) return out;
  const auto k = static_cast<std::size_t>(it - flows.begin());
  for (std::size_t i = 0; i < rates.size(); ++i) out[i] = rates[i][k];
  return out;
}

namespace {

std::vector<int> flow_ids(const PacketTrace& trace) {
  std::vector<int> ids;
  for (const auto& p : trace.records) ids.push_back(p.flow);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Fills rates for the given boundaries; packets outside them are ignored.
void bin(const PacketTrace& trace, ResampledTrace& out) {
  out.flows = flow_ids(trace);
  const std::size_t n = out.boundaries.empty() ? 0 : out.boundaries.size() - 1;
  out.rates.assign(n, std::vector<double>(out.flows.size(), 0.0));
  if (n == 0) return;
  std::size_t i = 0;
  for (const auto& p : trace.records) {
    if (p.arrival <= out.boundaries.front()) continue;
    while (i < n && p.arrival > out.boundaries[i + 1]) ++i;
    if (i == n) break;
    const auto k = std::lower_bound(out.flows.begin(), out.flows.end(), p.flow) - out.flows.begin();
    out.rates[i][k] += p.size;
  }
  for (std::size_t j = 0; j < n; ++j)
    for (double& r : out.rates[j]) r /= out.duration(j);
}

}  // namespace

ResampledTrace resample(const PacketTrace& trace, const RttSeries& rtt, double t0) {
  trace.validate();
  rtt.validate();
  ResampledTrace out;
  if (trace.records.empty()) return out;
  const double first = trace.records.front().arrival;
  const double last = trace.records.back().arrival;
  if (t0 < first) throw std::invalid_argument("resample: t0 precedes the first arrival");
  if (rtt.knots.front().time > t0 || rtt.knots.back().time < last)
    throw std::invalid_argument("resample: rtt series does not cover the trace span");

  out.boundaries.push_back(t0);
  for (double t = t0;;) {
    const double next = t + rtt.at(t);
    if (next > last) break;
    out.boundaries.push_back(next);
    t = next;
  }
  bin(trace, out);
  return out;
}

ResampledTrace fixed_sample(const PacketTrace& trace, double interval) {
  if (!(interval > 0)) throw std::invalid_argument("fixed_sample: interval must be > 0");
  trace.validate();
  ResampledTrace out;
  if (trace.records.empty()) return out;
  const double first = trace.records.front().arrival;
  const double last = trace.records.back().arrival;
  // Bin k covers (k w, (k + 1) w].
  const double k0 = std::ceil(first / interval) - 1.0;
  for (double k = k0; (k + 1.0) * interval <= last; k += 1.0) {
    if (out.boundaries.empty()) out.boundaries.push_back(k * interval);
    out.boundaries.push_back((k + 1.0) * interval);
  }
  bin(trace, out);
  return out;
}

RttSeries rtt_from_queue_trace(const std::vector<std::pair<double, double>>& queue,
                               double capacity, double rtt_base) {
  RttSeries s;
  s.knots.reserve(queue.size());
  for (const auto& [t, q] : queue) s.knots.push_back({t, rtt_base + q / capacity});
  return s;
}

RttSeries rtt_from_queue_trace(const sim::RateTrace& trace) {
  std::vector<std::pair<double, double>> q;
  q.reserve(trace.samples.size());
  for (const auto& s : trace.samples) q.emplace_back(s.time, s.queue);
  return rtt_from_queue_trace(q, trace.sharing.capacity, trace.sharing.rtt_base);
}

PacketTrace packetize(const sim::RateTrace& trace, double mss) {
  if (!(mss > 0)) throw std::invalid_argument("packetize: mss must be > 0");
  PacketTrace out;
  const int n = trace.sharing.flow_count;
  for (int f = 0; f < n; ++f) {
    double volume = 0.0;
    double next = mss;
    for (std::size_t k = 0; k + 1 < trace.samples.size(); ++k) {
      const double t = trace.samples[k].time;
      const double r = trace.samples[k].rates[f];
      const double end = volume + r * (trace.samples[k + 1].time - t);
      while (r > 0 && next <= end) {
        out.records.push_back({t + (next - volume) / r, mss, f});
        next += mss;
      }
      volume = end;
    }
  }
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const Packet& a, const Packet& b) { return a.arrival < b.arrival; });
  return out;
}

PacketTrace burst_trace(double period, int packets_per_burst, double packet_size,
                        double line_rate, int cycles, double start) {
  const double gap = packet_size / line_rate;
  if (!(period > 0) || packets_per_burst < 1 || !(gap * packets_per_burst < period))
    throw std::invalid_argument("burst_trace: burst does not fit in the period");
  PacketTrace out;
  for (int c = 0; c < cycles; ++c)
    for (int k = 0; k < packets_per_burst; ++k)
      out.records.push_back({start + c * period + k * gap, packet_size, 0});
  return out;
}

double variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double s = 0.0;
  for (double v : values) s += (v - mean) * (v - mean);
  return s / static_cast<double>(values.size());
}

namespace {

std::vector<std::vector<std::string>> read_rows(std::istream& in, const std::string& header) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1) {
      if (line != header)
        throw std::runtime_error(fmt::format("line 1: expected header '{}'", header));
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.push_back(std::to_string(number));  // carried for error messages
    rows.push_back(std::move(cells));
  }
  return rows;
}

double number(const std::vector<std::string>& row, std::size_t i) {
  try {
    std::size_t used = 0;
    const double v = std::stod(row.at(i), &used);
    if (used != row[i].size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(fmt::format("line {}: column {} is not a number", row.back(), i + 1));
  }
}

void expect_columns(const std::vector<std::string>& row, std::size_t n) {
  if (row.size() != n + 1)
    throw std::runtime_error(fmt::format("line {}: expected {} columns", row.back(), n));
}

}  // namespace

PacketTrace read_packet_csv(std::istream& in) {
  PacketTrace t;
  for (const auto& row : read_rows(in, "arrival_s,size_bits,flow_id")) {
    expect_columns(row, 3);
    t.records.push_back({number(row, 0), number(row, 1), static_cast<int>(number(row, 2))});
  }
  t.validate();
  return t;
}

RttSeries read_rtt_csv(std::istream& in) {
  RttSeries s;
  for (const auto& row : read_rows(in, "time_s,rtt_s")) {
    expect_columns(row, 2);
    s.knots.push_back({number(row, 0), number(row, 1)});
  }
  s.validate();
  return s;
}

void write_packet_csv(std::ostream& out, const PacketTrace& trace) {
  fmt::print(out, "arrival_s,size_bits,flow_id\n");
  for (const auto& p : trace.records) fmt::print(out, "{},{},{}\n", p.arrival, p.size, p.flow);
}

void write_rtt_csv(std::ostream& out, const RttSeries& rtt) {
  fmt::print(out, "time_s,rtt_s\n");
  for (const auto& k : rtt.knots) fmt::print(out, "{},{}\n", k.time, k.rtt);
}

void write_resampled_csv(std::ostream& out, const ResampledTrace& trace) {
  fmt::print(out, "t_s,flow_id,bitrate_bps\n");
  for (std::size_t i = 0; i < trace.intervals(); ++i)
    for (std::size_t k = 0; k < trace.flows.size(); ++k)
      fmt::print(out, "{},{},{}\n", trace.boundaries[i + 1], trace.flows[k], trace.rates[i][k]);
}

}  // namespace tcpshare::resampler
