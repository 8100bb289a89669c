#include "tcpshare/io.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace tcpshare::io {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& prefix) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(prefix + key, "unknown field");
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

void read(const json& obj, const char* key, double& dst, const std::string& prefix = "") {
  if (const json* v = find(obj, key)) {
    if (!v->is_number()) throw ConfigError(prefix + key, "expected a number");
    dst = v->get<double>();
  }
}

void read(const json& obj, const char* key, int& dst, const std::string& prefix = "") {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_integer()) throw ConfigError(prefix + key, "expected an integer");
    dst = v->get<int>();
  }
}

void read(const json& obj, const char* key, std::uint64_t& dst, const std::string& prefix = "") {
  if (const json* v = find(obj, key)) {
    if (!v->is_number_unsigned()) throw ConfigError(prefix + key, "expected a non-negative integer");
    dst = v->get<std::uint64_t>();
  }
}

void read(const json& obj, const char* key, std::string& dst, const std::string& prefix = "") {
  if (const json* v = find(obj, key)) {
    if (!v->is_string()) throw ConfigError(prefix + key, "expected a string");
    dst = v->get<std::string>();
  }
}

void read(const json& obj, const char* key, std::optional<double>& dst,
          const std::string& prefix = "") {
  if (find(obj, key)) {
    double v = 0.0;
    read(obj, key, v, prefix);
    dst = v;
  }
}

std::string cell_text(const Cell& c) {
  return std::visit([](const auto& v) { return fmt::format("{}", v); }, c);
}

json cell_json(const Cell& c) {
  return std::visit([](const auto& v) { return json(v); }, c);
}

}  // namespace

RunConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("<json>", "top level must be an object");
  reject_unknown(j,
                 {"capacity", "flow_count", "rtt_base", "mss", "ack_ratio", "buffer", "duration",
                  "time_step", "sample_interval", "loss_mode", "iid_p_loss", "drop_accounting",
                  "seed", "initial_cwnds", "warmup_fraction", "offered_step", "markov"},
                 "");
  RunConfig rc;
  auto& s = rc.sim;
  read(j, "capacity", s.sharing.capacity);
  read(j, "flow_count", s.sharing.flow_count);
  read(j, "rtt_base", s.sharing.rtt_base);
  read(j, "mss", s.sharing.mss);
  read(j, "ack_ratio", s.sharing.ack_ratio);
  read(j, "buffer", s.sharing.buffer);
  read(j, "duration", s.duration);
  read(j, "time_step", s.time_step);
  read(j, "sample_interval", s.sample_interval);
  read(j, "iid_p_loss", s.iid_p_loss);
  read(j, "seed", s.seed);
  read(j, "warmup_fraction", s.warmup_fraction);

  std::string name;
  read(j, "loss_mode", name);
  if (!name.empty()) s.loss_mode = sim::loss_mode_from_string(name);
  name.clear();
  read(j, "drop_accounting", name);
  if (!name.empty()) s.drop_accounting = sim::drop_accounting_from_string(name);

  if (const json* w = find(j, "initial_cwnds")) {
    if (!w->is_array()) throw ConfigError("initial_cwnds", "expected an array of numbers");
    for (const auto& v : *w) {
      if (!v.is_number()) throw ConfigError("initial_cwnds", "expected an array of numbers");
      s.initial_cwnds.push_back(v.get<double>());
    }
  }
  if (const json* st = find(j, "offered_step")) {
    if (!st->is_object()) throw ConfigError("offered_step", "expected an object");
    reject_unknown(*st, {"at", "rate_before", "rate_after"}, "offered_step.");
    sim::OfferedStep step;
    read(*st, "at", step.at, "offered_step.");
    read(*st, "rate_before", step.rate_before, "offered_step.");
    read(*st, "rate_after", step.rate_after, "offered_step.");
    s.offered_step = step;
  }
  if (const json* m = find(j, "markov")) {
    if (!m->is_object()) throw ConfigError("markov", "expected an object");
    const std::string p = "markov.";
    reject_unknown(*m, {"p_loss", "cwnd_max", "sigma", "rtt", "oracle_steps"}, p);
    read(*m, "p_loss", rc.markov.p_loss, p);
    read(*m, "cwnd_max", rc.markov.cwnd_max, p);
    read(*m, "sigma", rc.markov.sigma, p);
    read(*m, "rtt", rc.markov.rtt, p);
    read(*m, "oracle_steps", rc.markov.oracle_steps, p);
    if (rc.markov.p_loss && !(*rc.markov.p_loss > 0 && *rc.markov.p_loss < 1))
      throw ConfigError("markov.p_loss", "must lie in (0, 1)");
    if (rc.markov.cwnd_max != 0 && rc.markov.cwnd_max < 4)
      throw ConfigError("markov.cwnd_max", "must be >= 4");
    if (!(rc.markov.sigma > 0)) throw ConfigError("markov.sigma", "must be > 0");
    if (rc.markov.rtt && !(*rc.markov.rtt > 0)) throw ConfigError("markov.rtt", "must be > 0");
  }
  s.validate();
  return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<json>", e.what());
  }
  return parse_config(j);
}

json to_json(const sim::SimConfig& c) {
  json j = {{"capacity", c.sharing.capacity},
            {"flow_count", c.sharing.flow_count},
            {"rtt_base", c.sharing.rtt_base},
            {"mss", c.sharing.mss},
            {"ack_ratio", c.sharing.ack_ratio},
            {"buffer", c.sharing.buffer},
            {"duration", c.duration},
            {"time_step", c.step()},
            {"sample_interval", c.sampling()},
            {"loss_mode", sim::to_string(c.loss_mode)},
            {"drop_accounting", sim::to_string(c.drop_accounting)},
            {"seed", c.seed},
            {"warmup_fraction", c.warmup_fraction}};
  if (c.loss_mode == sim::LossMode::Iid) j["iid_p_loss"] = c.iid_p_loss;
  if (!c.initial_cwnds.empty()) j["initial_cwnds"] = c.initial_cwnds;
  if (c.offered_step)
    j["offered_step"] = {{"at", c.offered_step->at},
                         {"rate_before", c.offered_step->rate_before},
                         {"rate_after", c.offered_step->rate_after}};
  return j;
}

Format format_from_string(const std::string& name) {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  throw ConfigError("format", "expected csv or json, got '" + name + "'");
}

void write_csv(std::ostream& out, const Table& table) {
  fmt::print(out, "{}\n", fmt::join(table.columns, ","));
  std::vector<std::string> cells;
  for (const auto& row : table.rows) {
    cells.clear();
    for (const auto& c : row) cells.push_back(cell_text(c));
    fmt::print(out, "{}\n", fmt::join(cells, ","));
  }
}

void write_json(std::ostream& out, const Table& table) {
  json arr = json::array();
  for (const auto& row : table.rows) {
    json obj = json::object();
    for (std::size_t i = 0; i < row.size() && i < table.columns.size(); ++i)
      obj[table.columns[i]] = cell_json(row[i]);
    arr.push_back(std::move(obj));
  }
  out << arr.dump() << '\n';
}

std::filesystem::path write_table(const std::filesystem::path& dir, const Table& table,
                                  Format format) {
  const auto path = dir / (table.name + (format == Format::Csv ? ".csv" : ".json"));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (format == Format::Csv)
    write_csv(out, table);
  else
    write_json(out, table);
  return path;
}

Table trace_table(const sim::RateTrace& trace) {
  Table t{"trace", {"time_s", "flow_id", "bitrate_bps"}, {}};
  for (const auto& s : trace.samples)
    for (std::size_t f = 0; f < s.rates.size(); ++f)
      t.rows.push_back({s.time, static_cast<std::int64_t>(f), s.rates[f]});
  return t;
}

Table aggregate_table(const sim::RateTrace& trace) {
  Table t{"aggregate", {"time_s", "aggregate_bps", "offered_bps", "delivered_bps"}, {}};
  for (const auto& s : trace.samples) t.rows.push_back({s.time, s.aggregate, s.offered, s.delivered});
  return t;
}

Table queue_table(const sim::RateTrace& trace) {
  Table t{"queue", {"time_s", "queue_bits", "rtt_s"}, {}};
  for (const auto& s : trace.samples) t.rows.push_back({s.time, s.queue, s.rtt});
  return t;
}

Table loss_table(const sim::RateTrace& trace) {
  Table t{"losses", {"time_s", "flow_id", "packets"}, {}};
  for (const auto& l : trace.losses)
    t.rows.push_back({l.time, static_cast<std::int64_t>(l.flow), static_cast<std::int64_t>(l.count)});
  return t;
}

Table halving_table(const sim::RateTrace& trace) {
  Table t{"halvings",
          {"time_s", "flow_id", "hit_time_s", "hit_bitrate_bps", "cwnd_before_segments", "rtt_s"},
          {}};
  for (const auto& h : trace.halvings)
    t.rows.push_back({h.time, static_cast<std::int64_t>(h.flow), h.hit_time, h.hit_bitrate,
                      h.cwnd_before, h.rtt});
  return t;
}

Table event_table(const sim::RateTrace& trace) {
  Table t{"events",
          {"start_s", "end_s", "flows_hit_count", "lost_packets", "rtt_at_start_s",
           "delivered_bits"},
          {}};
  for (const auto& e : trace.events)
    t.rows.push_back({e.start, e.end, static_cast<std::int64_t>(e.flows_hit.size()),
                      static_cast<std::int64_t>(e.losses), e.rtt_at_start, e.delivered_bits});
  return t;
}

json summarize(const sim::RateTrace& trace) {
  json j;
  j["utilization"] = sim::measure_utilization(trace, trace.sharing.capacity);
  j["loss_interval_per_flow_s"] = sim::mean_loss_interval_per_flow(trace);
  j["halving_interval_per_flow_s"] = sim::mean_halving_interval_per_flow(trace);

  double rtt_sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : trace.samples)
    if (s.time >= trace.warmup_end) {
      rtt_sum += s.rtt;
      ++n;
    }
  j["mean_rtt_s"] = n ? rtt_sum / static_cast<double>(n) : 0.0;

  std::map<std::size_t, int> hist;
  int count = 0;
  double hits = 0.0;
  for (const auto& e : trace.events) {
    if (e.start < trace.warmup_end) continue;
    ++count;
    hits += static_cast<double>(e.flows_hit.size());
    ++hist[e.flows_hit.size()];
  }
  json h = json::object();
  for (const auto& [k, v] : hist) h[std::to_string(k)] = v;
  const double span = trace.duration - trace.warmup_end;
  j["events"] = {{"count", count},
                 {"mean_spacing_s", count ? span / count : 0.0},
                 {"mean_flows_hit", count ? hits / count : 0.0},
                 {"flows_hit_histogram", h}};
  j["measured_from_s"] = trace.warmup_end;
  j["volume"] = {{"offered_bits", trace.totals.offered},
                 {"delivered_bits", trace.totals.delivered},
                 {"dropped_bits", trace.totals.dropped},
                 {"max_step_residual", trace.totals.max_step_residual}};
  return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace tcpshare::io
