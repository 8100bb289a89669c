#pragma once

// Rate traces from packet captures. resample() cuts the time axis at
// t[i+1] = t[i] + RTT(t[i]) so that every interval spans one round trip of
// the bottleneck, which removes the beat between the sampling interval and
// the TCP round trip. fixed_sample() is the plain uniform-bin baseline.

#include <iosfwd>
#include <optional>
#include <vector>

#include "tcpshare/simulator.hpp"

namespace tcpshare::resampler {

struct Packet {
  double arrival = 0.0;  ///< s
  double size = 0.0;     ///< bits
  int flow = 0;
};

struct PacketTrace {
  std::vector<Packet> records;

  /// Throws std::invalid_argument for decreasing arrivals or sizes <= 0.
  void validate() const;
  double volume() const;
};

struct RttKnot {
  double time = 0.0;
  double rtt = 0.0;
};

/// RTT(t) held constant from each knot to the next.
struct RttSeries {
  std::vector<RttKnot> knots;

  static RttSeries constant(double rtt, double from, double to);

  /// Throws std::invalid_argument for non-increasing times or rtt <= 0.
  void validate() const;
  /// Value of the last knot at or before t. Throws std::out_of_range for
  /// t before the first knot.
  double at(double t) const;
};

/// Rates over consecutive intervals (boundaries[i], boundaries[i + 1]].
struct ResampledTrace {
  std::vector<double> boundaries;
  std::vector<int> flows;                  ///< sorted flow ids
  std::vector<std::vector<double>> rates;  ///< [interval][flow index], bit/s

  std::size_t intervals() const { return rates.size(); }
  double duration(std::size_t i) const { return boundaries[i + 1] - boundaries[i]; }
  double aggregate(std::size_t i) const;
  /// Rates of one flow id across intervals; zeros for an unknown id.
  std::vector<double> flow_rates(int flow) const;
};

/// Boundaries from t0 by the RTT recurrence. Each rate is the volume of
/// packets arriving in (t[i], t[i+1]] over the interval length. The
/// trailing partial interval is dropped. Throws std::invalid_argument if t0
/// precedes the first arrival or the RTT series does not cover
/// [t0, last arrival].
ResampledTrace resample(const PacketTrace& trace, const RttSeries& rtt, double t0);

/// Uniform bins (k w, (k + 1) w] from the bin holding the first arrival to
/// the last complete bin. Empty trace gives an empty result.
ResampledTrace fixed_sample(const PacketTrace& trace, double interval);

/// rtt_base + queue / capacity at each sample.
RttSeries rtt_from_queue_trace(const std::vector<std::pair<double, double>>& queue,
                               double capacity, double rtt_base);
RttSeries rtt_from_queue_trace(const sim::RateTrace& trace);

/// Splits each flow's fluid rate into packets of `mss` bits, emitted when
/// the cumulative volume crosses each multiple of mss. Rates are held
/// constant between samples.
PacketTrace packetize(const sim::RateTrace& trace, double mss);

/// Single flow sending `packets_per_burst` back-to-back packets at
/// `line_rate` at the start of every period, idle for the rest.
PacketTrace burst_trace(double period, int packets_per_burst, double packet_size,
                        double line_rate, int cycles, double start = 0.0);

/// Population variance; 0 for fewer than two values.
double variance(const std::vector<double>& values);

// CSV: arrival_s,size_bits,flow_id / time_s,rtt_s / t_s,flow_id,bitrate_bps.
// Readers throw std::runtime_error with the line number on malformed rows.
PacketTrace read_packet_csv(std::istream& in);
RttSeries read_rtt_csv(std::istream& in);
void write_packet_csv(std::ostream& out, const PacketTrace& trace);
void write_rtt_csv(std::ostream& out, const RttSeries& rtt);
void write_resampled_csv(std::ostream& out, const ResampledTrace& trace);

}  // namespace tcpshare::resampler
