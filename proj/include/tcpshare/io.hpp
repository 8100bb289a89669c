#pragma once

// Config parsing and table output shared by the command-line front end.
//
// Config files are JSON objects. Link and simulation fields sit at the top
// level with the same snake_case names as SharingConfig and SimConfig;
// Markov chain settings go in an optional "markov" object. Every field is
// optional and unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "tcpshare/simulator.hpp"

namespace tcpshare::io {

struct MarkovSettings {
  std::optional<double> p_loss;  ///< unset derives it from the link config
  int cwnd_max = 0;
  double sigma = 0.41;
  std::optional<double> rtt;      ///< unset uses rtt_base
  std::uint64_t oracle_steps = 0;  ///< 0 skips the Monte Carlo cross-check
};

struct RunConfig {
  sim::SimConfig sim;
  MarkovSettings markov;
};

/// Throws ConfigError naming the offending field for wrong types, unknown
/// keys and out-of-range values.
RunConfig parse_config(const nlohmann::json& j);

/// Reads and parses a config file. Syntax errors become ConfigError with
/// field "<json>"; a missing file becomes ConfigError with field "config".
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const sim::SimConfig& config);

enum class Format { Csv, Json };
Format format_from_string(const std::string& name);  // throws ConfigError

using Cell = std::variant<double, std::int64_t, std::string>;

/// Column names carry their unit suffix, e.g. time_s or bitrate_bps.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

void write_csv(std::ostream& out, const Table& table);
/// Array of objects keyed by column name.
void write_json(std::ostream& out, const Table& table);
/// Writes <dir>/<name>.csv or .json. Returns the path written.
std::filesystem::path write_table(const std::filesystem::path& dir, const Table& table,
                                  Format format);

Table trace_table(const sim::RateTrace& trace);       // time_s,flow_id,bitrate_bps
Table aggregate_table(const sim::RateTrace& trace);   // time_s,aggregate_bps,...
Table queue_table(const sim::RateTrace& trace);       // time_s,queue_bits,rtt_s
Table loss_table(const sim::RateTrace& trace);        // time_s,flow_id,packets
Table halving_table(const sim::RateTrace& trace);
Table event_table(const sim::RateTrace& trace);

/// Utilization, loss and halving intervals, event statistics.
nlohmann::json summarize(const sim::RateTrace& trace);

/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace tcpshare::io
