#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tcpshare/commands.hpp"
#include "tcpshare/io.hpp"

using namespace tcpshare;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "tcpshare");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tcpshare_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name, const std::string& content) const {
    std::ofstream(path / name) << content;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::map<std::string, double> analytic_values(const std::string& report) {
  std::map<std::string, double> v;
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    if (line.empty() || line[0] == '#' || a == std::string::npos || a == b) continue;
    if (line.substr(0, a) == "quantity") continue;
    v[line.substr(0, a)] = std::stod(line.substr(a + 1, b - a - 1));
  }
  return v;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  const auto rc = io::parse_config(json::object());
  CHECK(rc.sim.sharing.capacity == 1e8);
  CHECK(rc.sim.duration == 600);
  CHECK(rc.sim.loss_mode == sim::LossMode::Synchronized);

  const auto custom = io::parse_config(json::parse(
      R"({"flow_count": 4, "loss_mode": "isolated", "markov": {"p_loss": 0.001}})"));
  CHECK(custom.sim.sharing.flow_count == 4);
  CHECK(custom.sim.loss_mode == sim::LossMode::Isolated);
  CHECK(*custom.markov.p_loss == 0.001);

  auto field_of = [](const char* text) {
    try {
      io::parse_config(json::parse(text));
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("(none)");
  };
  CHECK(field_of(R"({"capacity": "fast"})") == "capacity");
  CHECK(field_of(R"({"flow_count": 2.5})") == "flow_count");
  CHECK(field_of(R"({"buffer_size": 1})") == "buffer_size");
  CHECK(field_of(R"({"markov": {"p_loss": 2}})") == "markov.p_loss");
  CHECK(field_of(R"({"duration": 0.5})") == "duration");
  CHECK(field_of("[1, 2]") != "(none)");

  const auto back = io::parse_config(io::to_json(custom.sim));
  CHECK(io::to_json(back.sim) == io::to_json(custom.sim));
}

TEST_CASE("config file errors exit with usage status") {
  TempDir dir("config");
  const auto broken = dir.file("broken.json", "{\"capacity\": 1e8,");
  auto r = invoke({"simulate", "--config", broken.string(), "--out", dir.path.string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("invalid config") != std::string::npos);

  const auto typed = dir.file("typed.json", R"({"rtt_base": "slow"})");
  r = invoke({"analytic", "--config", typed.string(), "--out", dir.path.string()});
  CHECK(r.code == cli::kExitUsage);
  CHECK(r.err.find("rtt_base") != std::string::npos);

  r = invoke({"simulate", "--config", (dir.path / "missing.json").string()});
  CHECK(r.code == cli::kExitUsage);
  r = invoke({"simulate", "--format", "xml"});
  CHECK(r.code == cli::kExitUsage);
  r = invoke({"frobnicate"});
  CHECK(r.code == cli::kExitUsage);
  r = invoke({});
  CHECK(r.code == cli::kExitUsage);
  r = invoke({"--help"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("simulate") != std::string::npos);
}

TEST_CASE("simulate writes tables and a summary") {
  TempDir dir("simulate");
  const auto r = invoke({"simulate", "--out", dir.path.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(first_line(dir.path / "trace.csv") == "time_s,flow_id,bitrate_bps");
  CHECK(first_line(dir.path / "queue.csv") == "time_s,queue_bits,rtt_s");
  CHECK(first_line(dir.path / "losses.csv") == "time_s,flow_id,packets");
  CHECK(fs::exists(dir.path / "aggregate.csv"));
  CHECK(fs::exists(dir.path / "halvings.csv"));
  CHECK(fs::exists(dir.path / "events.csv"));

  const auto summary = json::parse(slurp(dir.path / "summary.json"));
  CHECK(summary["loss_interval_per_flow_s"].get<double>() == doctest::Approx(11.0).epsilon(0.2));
  CHECK(summary["utilization"].get<double>() > 0.99);
  CHECK(summary["config"]["capacity"].get<double>() == 1e8);
}

TEST_CASE("same seed gives identical files") {
  TempDir dir("seed");
  const auto cfg = dir.file("short.json", R"({"duration": 40})");
  const auto a = dir.path / "a", b = dir.path / "b", c = dir.path / "c";
  for (const auto& [out, seed] : {std::pair{a, "5"}, std::pair{b, "5"}, std::pair{c, "6"}})
    REQUIRE(invoke({"simulate", "--config", cfg.string(), "--seed", seed, "--out", out.string(),
                    "--format", "json"})
                .code == cli::kExitOk);
  for (const char* name : {"trace.json", "losses.json", "summary.json", "events.json"})
    CHECK(slurp(a / name) == slurp(b / name));
  CHECK(slurp(a / "trace.json") != slurp(c / "trace.json"));
}

TEST_CASE("analytic report") {
  TempDir dir("analytic");
  auto r = invoke({"analytic", "--out", dir.path.string()});
  REQUIRE(r.code == cli::kExitOk);
  auto v = analytic_values(r.out);
  CHECK(v.at("buffer_best") == doctest::Approx(6.67e5).epsilon(1e-3));
  CHECK(v.at("buffer_sync") == doctest::Approx(3.33e6).epsilon(1e-3));
  CHECK(v.at("loss_interval_per_flow") == doctest::Approx(11.1).epsilon(1e-2));
  CHECK(v.at("loss_probability") == doctest::Approx(1.08e-4).epsilon(1e-2));
  CHECK(first_line(dir.path / "analytic.csv") == "quantity,value,unit");
  const double ts_a2 = v.at("loss_interval_per_flow");

  const auto single = dir.file("single.json", R"({"flow_count": 1})");
  v = analytic_values(invoke({"analytic", "--config", single.string(), "--out",
                              dir.path.string()}).out);
  CHECK(v.at("buffer_best") == doctest::Approx(2.0 / 3.0 * v.at("bdp")));

  const auto a1 = dir.file("a1.json", R"({"ack_ratio": 1})");
  v = analytic_values(invoke({"analytic", "--config", a1.string(), "--out",
                              dir.path.string()}).out);
  CHECK(v.at("loss_interval_per_flow") == doctest::Approx(ts_a2 / 2));
}

TEST_CASE("markov tables") {
  TempDir dir("markov");
  const auto r = invoke({"markov", "--out", dir.path.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto s = json::parse(slurp(dir.path / "markov_summary.json"));
  CHECK(s["total_mass"].get<double>() == doctest::Approx(1.0));
  CHECK(s["lognormal"]["central_gap"].get<double>() < 0.05);
  CHECK(s["mass_within_third_to_triple"].get<double>() > 0.9);
  CHECK(s["node_balance_residual"].get<double>() < 1e-10);

  std::ifstream in(dir.path / "stationary.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "cwnd_segments,probability");
  double sum = 0;
  while (std::getline(in, line)) sum += std::stod(line.substr(line.find(',') + 1));
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("resample from files") {
  TempDir dir("resample");
  std::ostringstream packets;
  packets << "arrival_s,size_bits,flow_id\n";
  for (int c = 0; c < 50; ++c)
    for (int k = 0; k < 10; ++k) packets << c * 0.109 + k * 1e-4 << ",12000," << k % 2 << "\n";
  const auto pf = dir.file("packets.csv", packets.str());
  const auto rf = dir.file("rtt.csv", "time_s,rtt_s\n0,0.109\n10,0.109\n");
  const auto r = invoke({"resample", "--packets", pf.string(), "--rtt", rf.string(), "--t0",
                         "0.05", "--out", dir.path.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto s = json::parse(slurp(dir.path / "resample_summary.json"));
  CHECK(s["packets"].get<int>() == 500);
  CHECK(s["aggregate_variance_bps2"].get<double>() < 1e-3);
  CHECK(s["fixed"]["aggregate_variance_bps2"].get<double>() > 1e10);
  CHECK(first_line(dir.path / "resampled.csv") == "t_s,flow_id,bitrate_bps");

  const auto bad = dir.file("bad.csv", "arrival_s,size_bits,flow_id\n0.1,x,0\n");
  CHECK(invoke({"resample", "--packets", bad.string(), "--out", dir.path.string()}).code ==
        cli::kExitCheckFailed);
}

TEST_CASE("verify header documents the defaults") {
  TempDir dir("verify");
  const auto empty = dir.file("empty.json", "{}");
  const auto r = invoke({"verify", "--config", empty.string(), "--only", "9", "--out",
                         dir.path.string()});
  CHECK(r.code == cli::kExitOk);
  std::istringstream in(r.out);
  std::string source, header, line;
  std::getline(in, source);
  std::getline(in, header);
  CHECK(source.rfind("# config", 0) == 0);
  REQUIRE(header.rfind("# ", 0) == 0);
  CHECK(json::parse(header.substr(2)) == io::to_json(sim::SimConfig{}));
  std::getline(in, line);
  CHECK(line.rfind("PASS  9", 0) == 0);
  const auto v = json::parse(slurp(dir.path / "verify.json"));
  CHECK(v["passed"].get<bool>());
}

}  // TEST_SUITE
