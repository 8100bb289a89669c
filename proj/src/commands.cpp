#include "tcpshare/commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "CLI11.hpp"
#include "tcpshare/analytic.hpp"
#include "tcpshare/markov.hpp"
#include "tcpshare/resampler.hpp"
#include "tcpshare/verify.hpp"

namespace tcpshare::cli {

using nlohmann::json;
namespace fs = std::filesystem;

io::RunConfig resolve_config(const Manifest& m) {
  io::RunConfig rc = m.config ? io::load_config(*m.config) : io::RunConfig{};
  if (m.seed) rc.sim.seed = *m.seed;
  rc.sim.validate();
  return rc;
}

namespace {

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw ConfigError("out", "cannot create directory " + dir.string());
}

std::string source_line(const Manifest& m) {
  return m.config ? "config " + m.config->string() : std::string("config: built-in defaults");
}

}  // namespace

int cmd_simulate(const Manifest& m, std::ostream& report) {
  const auto rc = resolve_config(m);
  prepare_out(m.out);
  const auto trace = sim::run(rc.sim);
  for (const auto& t : {io::trace_table(trace), io::aggregate_table(trace), io::queue_table(trace),
                        io::loss_table(trace), io::halving_table(trace), io::event_table(trace)})
    io::write_table(m.out, t, m.format);
  json summary = io::summarize(trace);
  summary["config"] = io::to_json(rc.sim);
  io::write_json_file(m.out / "summary.json", summary);

  fmt::print(report, "# {}\n", source_line(m));
  fmt::print(report, "utilization            {:.5f}\n", summary["utilization"].get<double>());
  fmt::print(report, "loss interval per flow {:.3f} s\n",
             summary["loss_interval_per_flow_s"].get<double>());
  fmt::print(report, "congestion events      {} (mean {:.2f} flows hit)\n",
             summary["events"]["count"].get<int>(),
             summary["events"]["mean_flows_hit"].get<double>());
  fmt::print(report, "mean rtt               {:.4f} s\n", summary["mean_rtt_s"].get<double>());
  fmt::print(report, "output                 {}\n", m.out.string());
  return kExitOk;
}

int cmd_analytic(const Manifest& m, std::ostream& report) {
  const auto rc = resolve_config(m);
  const SharingConfig& c = rc.sim.sharing;
  const double bs = c.fair_share();
  // A single flow cannot exceed the link.
  const double b_hit = std::min(4.0 / 3.0 * bs, c.capacity);
  const auto step = analytic::step_down(c, {b_hit * c.rtt_base / c.mss, b_hit}, c.rtt_base);
  const auto li = analytic::loss_interval(c);
  const double p = analytic::loss_probability(c);
  const auto tp = analytic::macroscopic_throughput(p, c.mss, c.rtt_base, c.ack_ratio, c.flow_count);
  const double tenth = 0.1 * c.capacity;

  io::Table t{"analytic", {"quantity", "value", "unit"}, {}};
  auto add = [&](const char* q, double v, const char* unit) { t.rows.push_back({q, v, unit}); };
  add("fair_share", bs, "bit/s");
  add("bdp", c.bdp(), "bit");
  add("hit_bitrate_ideal", b_hit, "bit/s");
  add("step_delta_bitrate_hit", step.delta_bitrate_hit, "bit/s");
  add("step_delta_bitrate_other", step.delta_bitrate_other, "bit/s");
  add("step_delta_queue", step.delta_queue, "bit");
  add("step_delta_rtt", step.delta_rtt, "s");
  add("rtt_step_ideal", analytic::rtt_step_ideal(c), "s");
  add("buffer_best", analytic::buffer_bound_best(c), "bit");
  add("buffer_sync", analytic::buffer_bound_sync(c), "bit");
  add("absorption_queue_10pct_load", analytic::queue_absorption(c, tenth), "bit");
  add("rtt_increment_per_rtt", c.mss * c.flow_count / (c.capacity * c.ack_ratio), "s");
  add("rtt_after_loss_interval", analytic::rtt_growth(c, li.aggregate).exact, "s");
  add("queue_after_loss_interval", analytic::queue_growth(c, li.aggregate).exact, "bit");
  add("loss_interval_aggregate", li.aggregate, "s");
  add("loss_interval_per_flow", li.per_flow, "s");
  add("loss_probability", p, "1/packet");
  add("cwnd_equilibrium", tp.cwnd_eq, "segments");
  add("throughput_per_flow", tp.per_flow, "bit/s");
  add("throughput_aggregate", tp.aggregate, "bit/s");
  // Deviation from the fair share halves once the stretch factor reaches 4.
  add("convergence_half_time", 1.5 * c.ack_ratio * bs * c.rtt_base * c.rtt_base / c.mss, "s");

  prepare_out(m.out);
  io::write_table(m.out, t, m.format);
  fmt::print(report, "# {}\n", source_line(m));
  if (m.format == io::Format::Json)
    io::write_json(report, t);
  else
    io::write_csv(report, t);
  return kExitOk;
}

int cmd_markov(const Manifest& m, std::ostream& report) {
  const auto rc = resolve_config(m);
  const SharingConfig& c = rc.sim.sharing;
  const double p = rc.markov.p_loss.value_or(analytic::loss_probability(c));
  const double rtt = rc.markov.rtt.value_or(c.rtt_base);
  const markov::ChainParams params{p, c.ack_ratio, rc.markov.cwnd_max};
  const auto matrix = markov::build_chain(params);
  const auto dist = markov::stationary(matrix);
  const auto power = markov::stationary_power(matrix);
  double agree = 0.0;
  for (int k = 0; k < dist.size(); ++k)
    agree = std::max(agree, std::abs(dist.probabilities[k] - power.probabilities[k]));
  const auto rates = markov::bitrate_distribution(dist, c.mss, rtt);
  const markov::LogNormalFit fit = markov::LogNormalFit::for_loss(p, c.ack_ratio, rc.markov.sigma);
  const auto cmp = markov::compare_to_lognormal(dist, fit);
  const double cs = markov::equilibrium_cwnd(p, c.ack_ratio);
  const double bs = cs * c.mss / rtt;

  prepare_out(m.out);
  io::Table st{"stationary", {"cwnd_segments", "probability"}, {}};
  io::Table br{"bitrate", {"bitrate_bps", "probability"}, {}};
  io::Table ln{"lognormal", {"cwnd_segments", "chain_cdf", "lognormal_cdf", "abs_gap"}, {}};
  double acc = 0.0;
  for (int s = 1; s <= dist.size(); ++s) {
    const double pr = dist.probability(s);
    acc += pr;
    const double f = markov::lognormal_cdf(fit, s + 0.5);
    st.rows.push_back({static_cast<std::int64_t>(s), pr});
    br.rows.push_back({rates.bitrates[s - 1], pr});
    ln.rows.push_back({static_cast<std::int64_t>(s), acc, f, std::abs(acc - f)});
  }
  for (const auto& t : {st, br, ln}) io::write_table(m.out, t, m.format);

  json s = {{"p_loss", p},
            {"shortcut_p", params.shortcut_p()},
            {"ack_ratio", c.ack_ratio},
            {"cwnd_max", dist.size()},
            {"cwnd_equilibrium_segments", cs},
            {"median_cwnd_segments", dist.median()},
            {"mean_cwnd_segments", dist.mean_cwnd()},
            {"mean_bitrate_bps", rates.mean()},
            {"equilibrium_bitrate_bps", bs},
            {"mass_within_third_to_triple", rates.mass_between(bs / 3.0, 3.0 * bs)},
            {"total_mass", rates.total_mass()},
            {"node_balance_residual", markov::node_balance_residual(params, dist)},
            {"solver_agreement_linf", agree},
            {"lognormal", {{"mu", fit.mu},
                           {"sigma", fit.sigma},
                           {"central_gap", cmp.central_gap},
                           {"full_gap", cmp.full_gap},
                           {"band_low_segments", cmp.band_low},
                           {"band_high_segments", cmp.band_high},
                           {"tail_ratio", cmp.tail_ratio}}}};
  if (rc.markov.oracle_steps > 0) {
    const auto mc = markov::monte_carlo_oracle(params, c.mss, rtt, rc.markov.oracle_steps,
                                               rc.sim.seed);
    s["oracle"] = {{"steps", mc.steps},
                   {"total_variation", markov::total_variation(dist.probabilities, mc.probabilities)}};
  }
  io::write_json_file(m.out / "markov_summary.json", s);

  fmt::print(report, "# {}\n", source_line(m));
  fmt::print(report, "p_loss {:.4g}, cwnd_s {:.1f} segments, {} states\n", p, cs, dist.size());
  fmt::print(report, "median {} segments, mean {:.2f} segments\n", dist.median(), dist.mean_cwnd());
  fmt::print(report, "mass in (b_s/3, 3 b_s) {:.4f}\n", rates.mass_between(bs / 3.0, 3.0 * bs));
  fmt::print(report, "log-normal CDF gap: central {:.4f}, full {:.4f}, tail ratio {:.1f}\n",
             cmp.central_gap, cmp.full_gap, cmp.tail_ratio);
  if (s.contains("oracle"))
    fmt::print(report, "oracle TV distance {:.4f}\n", s["oracle"]["total_variation"].get<double>());
  return kExitOk;
}

int cmd_resample(const Manifest& m, std::ostream& report) {
  const auto rc = resolve_config(m);
  resampler::PacketTrace packets;
  resampler::RttSeries rtt;
  std::string origin;
  if (m.packets) {
    std::ifstream in(*m.packets);
    if (!in) throw ConfigError("packets", "cannot open " + m.packets->string());
    packets = resampler::read_packet_csv(in);
    origin = m.packets->string();
  } else {
    const auto trace = sim::run(rc.sim);
    packets = resampler::packetize(trace, rc.sim.sharing.mss);
    rtt = resampler::rtt_from_queue_trace(trace);
    origin = "simulated run, packetized at mss";
  }
  if (m.rtt) {
    std::ifstream in(*m.rtt);
    if (!in) throw ConfigError("rtt", "cannot open " + m.rtt->string());
    rtt = resampler::read_rtt_csv(in);
  } else if (rtt.knots.empty() && !packets.records.empty()) {
    rtt = resampler::RttSeries::constant(rc.sim.sharing.rtt_base, packets.records.front().arrival,
                                         packets.records.back().arrival);
  }
  prepare_out(m.out);
  const double t0 = m.t0.value_or(packets.records.empty() ? 0.0 : packets.records.front().arrival);
  const auto matched = packets.records.empty() ? resampler::ResampledTrace{}
                                               : resampler::resample(packets, rtt, t0);

  auto to_table = [](const char* name, const resampler::ResampledTrace& r) {
    io::Table t{name, {"t_s", "flow_id", "bitrate_bps"}, {}};
    for (std::size_t i = 0; i < r.intervals(); ++i)
      for (std::size_t k = 0; k < r.flows.size(); ++k)
        t.rows.push_back({r.boundaries[i + 1], static_cast<std::int64_t>(r.flows[k]), r.rates[i][k]});
    return t;
  };
  io::write_table(m.out, to_table("resampled", matched), m.format);

  std::vector<double> agg;
  for (std::size_t i = 0; i < matched.intervals(); ++i) agg.push_back(matched.aggregate(i));
  json s = {{"source", origin},
            {"packets", packets.records.size()},
            {"volume_bits", packets.volume()},
            {"intervals", matched.intervals()},
            {"aggregate_variance_bps2", resampler::variance(agg)}};
  if (m.fixed_interval > 0) {
    const auto fixed = resampler::fixed_sample(packets, m.fixed_interval);
    io::write_table(m.out, to_table("fixed", fixed), m.format);
    std::vector<double> fa;
    for (std::size_t i = 0; i < fixed.intervals(); ++i) fa.push_back(fixed.aggregate(i));
    s["fixed"] = {{"interval_s", m.fixed_interval},
                  {"intervals", fixed.intervals()},
                  {"aggregate_variance_bps2", resampler::variance(fa)}};
  }
  io::write_json_file(m.out / "resample_summary.json", s);

  fmt::print(report, "# {}\n", source_line(m));
  fmt::print(report, "{} packets from {}\n", packets.records.size(), origin);
  fmt::print(report, "{} RTT intervals, aggregate variance {:.4g} (bit/s)^2\n",
             matched.intervals(), resampler::variance(agg));
  if (s.contains("fixed"))
    fmt::print(report, "{} fixed {} s bins, aggregate variance {:.4g} (bit/s)^2\n",
               s["fixed"]["intervals"].get<std::size_t>(), m.fixed_interval,
               s["fixed"]["aggregate_variance_bps2"].get<double>());
  return kExitOk;
}

int cmd_verify(const Manifest& m, std::ostream& report) {
  const auto rc = resolve_config(m);
  verify::VerifyOptions opts;
  opts.base = rc.sim;
  opts.oracle_steps = m.oracle_steps;

  std::vector<int> ids = m.only;
  if (ids.empty())
    for (int i = 1; i <= verify::kCheckCount; ++i) ids.push_back(i);

  fmt::print(report, "# {}\n# {}\n", source_line(m), io::to_json(rc.sim).dump());
  json results = json::array();
  bool all = true;
  for (int id : ids) {
    const auto r = verify::run_check(id, opts);
    all = all && r.passed;
    fmt::print(report, "{} {:2d} {:<24} {}\n", r.passed ? "PASS" : "FAIL", r.id, r.name, r.detail);
    results.push_back({{"id", r.id},
                       {"name", r.name},
                       {"passed", r.passed},
                       {"detail", r.detail},
                       {"seconds", r.seconds}});
  }
  prepare_out(m.out);
  io::write_json_file(m.out / "verify.json",
                      {{"config", io::to_json(rc.sim)}, {"checks", results}, {"passed", all}});
  return all ? kExitOk : kExitCheckFailed;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bandwidth sharing of AIMD flows at a tail-drop bottleneck", "tcpshare"};
  app.require_subcommand(1);

  Manifest m;
  std::string config, format = "csv", out_dir = ".";
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file (defaults apply for missing fields)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "random seed, overrides the config");
    sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
  };

  auto* simulate = app.add_subcommand("simulate", "run the fluid simulator");
  auto* analytic = app.add_subcommand("analytic", "tabulate the closed-form quantities");
  auto* markov = app.add_subcommand("markov", "solve the congestion-window chain");
  auto* resample = app.add_subcommand("resample", "RTT-resample a packet trace");
  auto* verify = app.add_subcommand("verify", "run the cross-validation checks");
  for (auto* sub : {simulate, analytic, markov, resample, verify}) add_common(sub);

  std::string packets, rtt;
  double t0 = 0.0;
  auto* t0_opt = resample->add_option("--t0", t0, "first interval boundary, s");
  resample->add_option("--packets", packets, "CSV arrival_s,size_bits,flow_id")
      ->check(CLI::ExistingFile);
  resample->add_option("--rtt", rtt, "CSV time_s,rtt_s")->check(CLI::ExistingFile);
  resample->add_option("--interval", m.fixed_interval, "fixed baseline bin, s (0 disables)")
      ->check(CLI::NonNegativeNumber);
  verify->add_option("--only", m.only, "check ids to run")->check(CLI::Range(1, verify::kCheckCount));
  verify->add_option("--oracle-steps", m.oracle_steps, "Monte Carlo oracle steps")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto* chosen = app.get_subcommands().front();
  m.command = chosen->get_name();
  if (!config.empty()) m.config = config;
  m.out = out_dir;
  if (chosen->count("--seed")) m.seed = seed;
  if (!packets.empty()) m.packets = packets;
  if (!rtt.empty()) m.rtt = rtt;
  if (t0_opt->count()) m.t0 = t0;

  try {
    m.format = io::format_from_string(format);
    if (m.command == "simulate") return cmd_simulate(m, out);
    if (m.command == "analytic") return cmd_analytic(m, out);
    if (m.command == "markov") return cmd_markov(m, out);
    if (m.command == "resample") return cmd_resample(m, out);
    return cmd_verify(m, out);
  } catch (const ConfigError& e) {
    fmt::print(err, "error: invalid config: {}\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitCheckFailed;
  }
}

}  // namespace tcpshare::cli
