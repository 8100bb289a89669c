#pragma once

#include <stdexcept>
#include <string>

namespace tcpshare {

/// Raised when a configuration value violates its documented range.
/// field() names the offending parameter in snake_case, matching the
/// JSON config schema.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Parameters of one shared bottleneck. Units: bit/s, seconds, bits.
///
/// The defaults reproduce the 10-flow, 100 Mbit/s, 100 ms laboratory
/// setup with a buffer of roughly 30 ms queuing delay.
struct SharingConfig {
  double capacity = 1e8;   ///< bottleneck rate C, bit/s
  int flow_count = 10;     ///< number of greedy flows N
  double rtt_base = 0.1;   ///< propagation round trip time, s
  double mss = 12000.0;    ///< segment size, bits
  double ack_ratio = 2.0;  ///< segments per returned ACK
  double buffer = 3e6;     ///< queue capacity in front of the link, bits

  /// Throws ConfigError naming the first field out of range.
  void validate() const;

  double fair_share() const { return capacity / flow_count; }
  double bdp() const { return capacity * rtt_base; }
};

inline void SharingConfig::validate() const {
  if (!(capacity > 0)) throw ConfigError("capacity", "must be > 0");
  if (flow_count < 1) throw ConfigError("flow_count", "must be >= 1");
  if (!(rtt_base > 0)) throw ConfigError("rtt_base", "must be > 0");
  if (!(mss > 0)) throw ConfigError("mss", "must be > 0");
  if (!(ack_ratio >= 1)) throw ConfigError("ack_ratio", "must be >= 1");
  if (!(buffer >= 0)) throw ConfigError("buffer", "must be >= 0");
}

}  // namespace tcpshare
