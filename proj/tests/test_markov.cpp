#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tcpshare/analytic.hpp"
#include "tcpshare/markov.hpp"

using namespace tcpshare;
using namespace tcpshare::markov;

namespace {

// Gauss-Seidel on the balance equations written state by state:
// inflow from i-1 by increment and from 2i, 2i+1 by halving equals outflow.
std::vector<double> balance_oracle(double p, double a, int n) {
  std::vector<double> x(n + 2, 1.0 / n);
  for (int sweep = 0; sweep < 200000; ++sweep) {
    double change = 0;
    for (int i = 1; i <= n; ++i) {
      double in = i > 1 ? x[i - 1] / a : 0.0;
      for (int j : {2 * i, 2 * i + 1})
        if (j <= n && j >= 2) in += j * p * x[j];
      // Increments out of the top state stay there.
      const double out = (i > 1 ? i * p : 0.0) + (i < n ? 1.0 / a : 0.0);
      const double next = in / out;
      change = std::max(change, std::abs(next - x[i]));
      x[i] = next;
    }
    double sum = 0;
    for (int i = 1; i <= n; ++i) sum += x[i];
    for (int i = 1; i <= n; ++i) x[i] /= sum;
    if (change < 1e-16) break;
  }
  return {x.begin() + 1, x.begin() + n + 1};
}

double default_p_loss() { return analytic::loss_probability(SharingConfig{}); }

}  // namespace

TEST_SUITE("markov") {

TEST_CASE("transition matrix") {
  for (double p : {1e-4, 1e-3, 1e-2}) {
    const auto m = build_chain({p, 2.0});
    for (int j = 0; j < m.size(); ++j) {
      CHECK(m.a.col(j).sum() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(m.a.col(j).minCoeff() >= 0.0);
    }
  }

  const double p = 0.01, a = 2.0;
  const double big_p = a * p;
  const auto m = build_chain({p, a, 7});
  CHECK(m.size() == 7);
  const double down2 = m.at(1, 2), up2 = m.at(3, 2);
  CHECK(down2 / (down2 + up2) == doctest::Approx(2 * big_p / (1 + 2 * big_p)));
  const double down3 = m.at(1, 3), up3 = m.at(4, 3);
  CHECK(down3 / (down3 + up3) == doctest::Approx(3 * big_p / (1 + 3 * big_p)));
  CHECK(m.at(1, 1) + m.at(2, 1) == doctest::Approx(1.0));
  CHECK(m.at(3, 6) > 0);
  CHECK(m.at(3, 7) > 0);
}

TEST_CASE("invalid chain parameters") {
  CHECK_THROWS_AS(build_chain({1e-3, 2.0, 3}), ConfigError);
  CHECK_THROWS_AS(build_chain({0.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(build_chain({1.0, 2.0}), ConfigError);
  CHECK_THROWS_AS(build_chain({1e-3, 0.5}), ConfigError);
}

TEST_CASE("stationary solution") {
  for (double p : {1e-4, 1e-3, 1e-2}) {
    const ChainParams params{p, 2.0};
    const auto m = build_chain(params);
    const auto lu = stationary(m);
    const auto pw = stationary_power(m);
    double sum = 0, diff = 0;
    for (int s = 1; s <= lu.size(); ++s) {
      sum += lu.probability(s);
      diff = std::max(diff, std::abs(lu.probability(s) - pw.probability(s)));
      CHECK(lu.probability(s) >= -1e-15);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(diff < 1e-9);
    CHECK(node_balance_residual(params, lu) < 1e-10);
    CHECK(node_balance_residual(params, pw) < 1e-10);
  }
}

TEST_CASE("stationary solution matches the balance oracle") {
  for (auto [p, a] : {std::pair{1e-2, 2.0}, std::pair{1e-2, 1.0}, std::pair{3e-3, 2.0}}) {
    const ChainParams params{p, a};
    const auto dist = stationary(build_chain(params));
    const auto oracle = balance_oracle(p, a, params.states());
    REQUIRE(oracle.size() == dist.probabilities.size());
    for (int s = 1; s <= dist.size(); ++s)
      CHECK(std::abs(dist.probability(s) - oracle[s - 1]) < 1e-12 + 1e-8 * oracle[s - 1]);
  }
}

TEST_CASE("truncation does not matter") {
  const double p = default_p_loss();
  const int n = default_cwnd_max(p, 2.0);
  const auto base = stationary(build_chain({p, 2.0, n}));
  const auto wide = stationary(build_chain({p, 2.0, 2 * n}));
  for (int s = 1; s <= n / 2; ++s)
    CHECK(std::abs(base.probability(s) - wide.probability(s)) < 1e-12);
  CHECK(base.mass_above(n / 2) < 1e-9);
}

TEST_CASE("median and mean track the equilibrium window") {
  const double p = default_p_loss();
  const auto dist = stationary(build_chain({p, 2.0}));
  const double cs = equilibrium_cwnd(p, 2.0);
  CHECK(cs == doctest::Approx(83.3).epsilon(1e-3));
  CHECK(std::abs(dist.median() - cs) <= 2.0);
  CHECK(dist.cdf(dist.median()) >= 0.5);
  CHECK(dist.cdf(dist.median() - 1) < 0.5);
  CHECK(dist.quantile(0.5) == dist.median());

  for (double q : {1e-4, 1e-3, 1e-2}) {
    const auto d = stationary(build_chain({q, 2.0}));
    CHECK(d.median() == doctest::Approx(equilibrium_cwnd(q, 2.0)).epsilon(0.15));
  }

  // The chain mean sits 6.4% above the equilibrium window, as expected of a
  // right-skewed distribution whose median is near it.
  const double ratio = dist.mean_cwnd() / cs;
  CHECK(ratio == doctest::Approx(1.064).epsilon(0.005));
  WARN(ratio <= 1.05);
}

TEST_CASE("bit-rate distribution") {
  const auto cfg = SharingConfig{};
  const auto dist = stationary(build_chain({default_p_loss(), 2.0}));
  const auto br = bitrate_distribution(dist, cfg.mss, cfg.rtt_base);
  const double bs = cfg.capacity / cfg.flow_count;
  CHECK(br.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(br.mass_between(bs / 3, 3 * bs) > 0.9);
  CHECK(br.bitrates[0] == doctest::Approx(cfg.mss / cfg.rtt_base));
  CHECK(br.mean() == doctest::Approx(dist.mean_cwnd() * cfg.mss / cfg.rtt_base));
  CHECK(br.mass_between(br.bitrates[0], br.bitrates[1]) == 0.0);
}

TEST_CASE("log-normal cdf") {
  const auto fit = LogNormalFit::for_loss(default_p_loss(), 2.0);
  CHECK(fit.mu == doctest::Approx(std::log(83.3)).epsilon(1e-3));
  CHECK(fit.sigma == 0.41);
  CHECK(lognormal_cdf(fit, std::exp(fit.mu)) == doctest::Approx(0.5));
  CHECK(lognormal_cdf(fit, 0.0) == 0.0);
  CHECK(lognormal_cdf(fit, 1e-9) < 1e-12);
  CHECK(lognormal_cdf(fit, 1e9) == doctest::Approx(1.0));
  CHECK(lognormal_cdf(fit, 28) < 0.005);
  CHECK(lognormal_cdf(fit, 250) > 0.995);
  // Against the closed form through erfc.
  for (double w : {10.0, 50.0, 100.0, 200.0}) {
    const double z = (std::log(w) - fit.mu) / fit.sigma;
    CHECK(lognormal_cdf(fit, w) == doctest::Approx(0.5 * std::erfc(-z / std::sqrt(2.0))));
  }
}

TEST_CASE("comparison with the log-normal fit") {
  const double p = default_p_loss();
  const auto fit = LogNormalFit::for_loss(p, 2.0);
  const auto dist = stationary(build_chain({p, 2.0}));
  const auto cmp = compare_to_lognormal(dist, fit);
  CHECK(cmp.central_gap < 0.05);
  CHECK(cmp.full_gap >= cmp.central_gap);
  CHECK(cmp.band_low < dist.median());
  CHECK(cmp.band_high > dist.median());
  CHECK(dist.cdf(cmp.band_low) >= 0.1);
  CHECK(dist.cdf(cmp.band_low - 1) < 0.1);
  // The tails are where chain and fit part ways.
  CHECK(cmp.tail_ratio > 10);
  WARN(cmp.full_gap > cmp.central_gap);

  const auto self = discretize_lognormal(fit, dist.size());
  double sum = 0;
  for (double v : self.probabilities) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  const auto same = compare_to_lognormal(self, fit);
  CHECK(same.central_gap < 1e-6);
  CHECK(same.full_gap < 1e-6);
}

TEST_CASE("monte carlo oracle") {
  const ChainParams params{1e-3, 2.0};
  const auto exact = stationary(build_chain(params));
  const auto mc = monte_carlo_oracle(params, 12000, 0.1, 2'000'000, 11);
  CHECK(mc.steps == 2'000'000u);
  CHECK(total_variation(mc.probabilities, exact.probabilities) < 0.05);

  const auto again = monte_carlo_oracle(params, 12000, 0.1, 200'000, 5);
  const auto twice = monte_carlo_oracle(params, 12000, 0.1, 200'000, 5);
  const auto other = monte_carlo_oracle(params, 12000, 0.1, 200'000, 6);
  CHECK(again.counts == twice.counts);
  CHECK(again.counts != other.counts);

  const auto lossy = monte_carlo_oracle({0.999, 2.0, 16}, 12000, 0.1, 100'000, 1);
  CHECK(lossy.probabilities[0] > 0.99);
}

TEST_CASE("total variation") {
  CHECK(total_variation({0.5, 0.5}, {0.5, 0.5}) == 0.0);
  CHECK(total_variation({1.0}, {0.0, 1.0}) == doctest::Approx(1.0));
  CHECK(total_variation({0.25, 0.75}, {0.5, 0.5}) == doctest::Approx(0.25));
}

TEST_CASE("power iteration reports non-convergence") {
  const auto m = build_chain({1e-4, 2.0});
  PowerOptions opts;
  opts.max_iterations = 10;
  CHECK_THROWS_AS(stationary_power(m, opts), SolverError);
}

}  // TEST_SUITE
