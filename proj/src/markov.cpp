#include "tcpshare/markov.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tcpshare/config.hpp"

namespace tcpshare::markov {

double equilibrium_cwnd(double p_loss, double ack_ratio) {
  return std::sqrt(3.0 / (2.0 * ack_ratio)) / std::sqrt(p_loss);
}

int default_cwnd_max(double p_loss, double ack_ratio) {
  const double top = std::ceil(12.0 * equilibrium_cwnd(p_loss, ack_ratio));
  return std::max(16, static_cast<int>(std::min(top, 1e8)));
}

void ChainParams::validate() const {
  if (!(p_loss > 0 && p_loss < 1)) throw ConfigError("p_loss", "must lie in (0, 1)");
  if (!(ack_ratio >= 1)) throw ConfigError("ack_ratio", "must be >= 1");
  if (cwnd_max != 0 && cwnd_max < 4) throw ConfigError("cwnd_max", "must be >= 4");
}

TransitionMatrix build_chain(const ChainParams& params) {
  params.validate();
  const int n = params.states();
  const double up = 1.0 / params.ack_ratio;

  TransitionMatrix m;
  m.uniform_rate = up + n * params.p_loss;
  m.a = Eigen::MatrixXd::Zero(n, n);
  for (int s = 1; s <= n; ++s) {
    const int from = s - 1;
    const double down = s > 1 ? s * params.p_loss : 0.0;
    const int next = s < n ? s : from;  // top state reflects onto itself
    m.a(next, from) += up / m.uniform_rate;
    if (s > 1) m.a(s / 2 - 1, from) += down / m.uniform_rate;
    m.a(from, from) += 1.0 - (up + down) / m.uniform_rate;
  }
  return m;
}

double StationaryDistribution::cdf(int state) const {
  const int k = std::clamp(state, 0, size());
  return std::accumulate(probabilities.begin(), probabilities.begin() + k, 0.0);
}

int StationaryDistribution::quantile(double q) const {
  double acc = 0.0;
  for (int k = 0; k < size(); ++k) {
    acc += probabilities[k];
    if (acc >= q) return k + 1;
  }
  return size();
}

int StationaryDistribution::median() const { return quantile(0.5); }

double StationaryDistribution::mean_cwnd() const {
  double m = 0.0;
  for (int k = 0; k < size(); ++k) m += (k + 1) * probabilities[k];
  return m;
}

double StationaryDistribution::mass_above(int state) const { return 1.0 - cdf(state); }

namespace {

StationaryDistribution normalized(const Eigen::VectorXd& x) {
  StationaryDistribution d;
  d.probabilities.resize(x.size());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    d.probabilities[i] = std::max(0.0, x(i));
    sum += d.probabilities[i];
  }
  for (double& p : d.probabilities) p /= sum;
  return d;
}

}  // namespace

StationaryDistribution stationary(const TransitionMatrix& matrix) {
  const int n = matrix.size();
  Eigen::MatrixXd m = matrix.a - Eigen::MatrixXd::Identity(n, n);
  m.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  return normalized(m.partialPivLu().solve(rhs));
}

StationaryDistribution stationary_power(const TransitionMatrix& matrix,
                                        const PowerOptions& options) {
  const int n = matrix.size();
  const Eigen::SparseMatrix<double> a = matrix.a.sparseView();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (long it = 0; it < options.max_iterations; ++it) {
    Eigen::VectorXd next = a * x;
    next /= next.sum();
    const double change = (next - x).cwiseAbs().maxCoeff();
    x.swap(next);
    if (change < options.tolerance) return normalized(x);
  }
  throw SolverError("stationary_power: no convergence after " +
                    std::to_string(options.max_iterations) + " iterations");
}

double node_balance_residual(const ChainParams& params, const StationaryDistribution& dist) {
  const double up = 1.0 / params.ack_ratio;
  const double p = params.p_loss;
  const int n = dist.size();
  auto at = [&](int s) { return s >= 1 && s <= n ? dist.probability(s) : 0.0; };
  double worst = 0.0;
  for (int i = 2; i <= n / 2 - 1; ++i) {
    const double in = up * at(i - 1) + 2.0 * i * p * at(2 * i) + (2.0 * i + 1) * p * at(2 * i + 1);
    const double out = (p * i + up) * at(i);
    worst = std::max(worst, std::abs(in - out));
  }
  return worst;
}

double BitrateDistribution::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < bitrates.size(); ++k) m += bitrates[k] * probabilities[k];
  return m;
}

double BitrateDistribution::total_mass() const {
  return std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
}

double BitrateDistribution::mass_between(double lo, double hi) const {
  double m = 0.0;
  for (std::size_t k = 0; k < bitrates.size(); ++k)
    if (bitrates[k] > lo && bitrates[k] < hi) m += probabilities[k];
  return m;
}

BitrateDistribution bitrate_distribution(const StationaryDistribution& dist, double mss,
                                         double rtt) {
  if (!(rtt > 0) || !(mss > 0))
    throw std::invalid_argument("bitrate_distribution: mss and rtt must be > 0");
  BitrateDistribution b;
  b.probabilities = dist.probabilities;
  b.bitrates.resize(dist.probabilities.size());
  for (std::size_t k = 0; k < b.bitrates.size(); ++k) b.bitrates[k] = (k + 1) * mss / rtt;
  return b;
}

LogNormalFit LogNormalFit::for_loss(double p_loss, double ack_ratio, double sigma) {
  return {std::log(equilibrium_cwnd(p_loss, ack_ratio)), sigma};
}

double lognormal_cdf(const LogNormalFit& fit, double cwnd) {
  if (!(fit.sigma > 0)) throw std::invalid_argument("lognormal_cdf: sigma must be > 0");
  if (cwnd <= 0) return 0.0;
  return 0.5 * (1.0 + std::erf((std::log(cwnd) - fit.mu) / (fit.sigma * std::sqrt(2.0))));
}

StationaryDistribution discretize_lognormal(const LogNormalFit& fit, int cwnd_max) {
  Eigen::VectorXd x(cwnd_max);
  double below = 0.0;
  for (int s = 1; s <= cwnd_max; ++s) {
    const double upper = s == cwnd_max ? 1.0 : lognormal_cdf(fit, s + 0.5);
    x(s - 1) = upper - below;
    below = upper;
  }
  return normalized(x);
}

LogNormalComparison compare_to_lognormal(const StationaryDistribution& dist,
                                         const LogNormalFit& fit) {
  LogNormalComparison c;
  c.band_low = dist.quantile(0.1);
  c.band_high = dist.quantile(0.9);
  double acc = 0.0;
  for (int s = 1; s <= dist.size(); ++s) {
    acc += dist.probability(s);
    const double ln = lognormal_cdf(fit, s + 0.5);
    const double gap = std::abs(acc - ln);
    c.full_gap = std::max(c.full_gap, gap);
    if (s >= c.band_low && s <= c.band_high) c.central_gap = std::max(c.central_gap, gap);
    // Tail comparison on whichever side of the band the state lies.
    double x = 0.0, y = 0.0;
    if (s < c.band_low) {
      x = acc;
      y = ln;
    } else if (s > c.band_high) {
      x = 1.0 - acc;
      y = 1.0 - ln;
    }
    if (x > 1e-6 && y > 1e-6) c.tail_ratio = std::max(c.tail_ratio, std::max(x / y, y / x));
  }
  return c;
}

EmpiricalDistribution monte_carlo_oracle(const ChainParams& params, double mss, double rtt,
                                         std::uint64_t steps, std::uint64_t seed) {
  params.validate();
  const int n = params.states();
  const double up = 1.0 / params.ack_ratio;
  const double keep = std::log1p(-params.p_loss);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  EmpiricalDistribution e;
  e.counts.assign(n, 0);
  double c = std::min<double>(n, equilibrium_cwnd(params.p_loss, params.ack_ratio));
  const std::uint64_t burn_in = 500;
  for (std::uint64_t t = 0; t < steps + burn_in; ++t) {
    c = std::min<double>(c + up, n);
    const double state = std::floor(c);
    if (u(rng) < -std::expm1(state * keep)) c = std::max(1.0, c / 2.0);
    if (t >= burn_in) ++e.counts[static_cast<int>(std::floor(c)) - 1];
  }
  e.steps = steps;
  e.probabilities.resize(n);
  e.bitrates.resize(n);
  for (int k = 0; k < n; ++k) {
    e.probabilities[k] = static_cast<double>(e.counts[k]) / static_cast<double>(steps);
    e.bitrates[k] = (k + 1) * mss / rtt;
  }
  return e;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double a = k < p.size() ? p[k] : 0.0;
    const double b = k < q.size() ? q[k] : 0.0;
    s += std::abs(a - b);
  }
  return 0.5 * s;
}

}  // namespace tcpshare::markov
