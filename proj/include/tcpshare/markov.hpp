#pragma once

// Markov chain over the congestion window of one flow under independent
// per-packet losses. Per round trip a window in state i grows by 1/a
// segment or, with rate i * p_loss, halves to floor(i / 2). The chain is
// uniformized into a column-stochastic matrix A with P = A P at the fixed
// point, which is exactly the balance
//
//   (1/a) p[i-1] + 2i p_loss p[2i] + (2i+1) p_loss p[2i+1] = (i p_loss + 1/a) p[i].
//
// State 1 cannot halve. The increment out of the top state is redirected to
// itself, so cwnd_max must sit well beyond the bulk of the distribution.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace tcpshare::markov {

/// Raised when an iterative solve fails to converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Equilibrium window sqrt(3 / (2a)) / sqrt(p_loss), segments.
double equilibrium_cwnd(double p_loss, double ack_ratio);

/// max(16, ceil(12 * equilibrium_cwnd)). Leaves about 1e-12 of the mass
/// above cwnd_max / 2.
int default_cwnd_max(double p_loss, double ack_ratio);

struct ChainParams {
  double p_loss = 1e-3;
  double ack_ratio = 2.0;
  int cwnd_max = 0;  ///< 0 selects default_cwnd_max

  double shortcut_p() const { return ack_ratio * p_loss; }
  int states() const { return cwnd_max > 0 ? cwnd_max : default_cwnd_max(p_loss, ack_ratio); }

  /// Throws tcpshare::ConfigError naming the offending field.
  void validate() const;
};

struct TransitionMatrix {
  Eigen::MatrixXd a;       ///< a(to, from), zero-based: index k is state k + 1
  double uniform_rate = 0;  ///< events per RTT used for uniformization

  int size() const { return static_cast<int>(a.rows()); }
  /// Probability of moving from state `from` to state `to`, 1-based.
  double at(int to, int from) const { return a(to - 1, from - 1); }
};

/// Throws ConfigError for cwnd_max < 4 or p_loss outside (0, 1).
TransitionMatrix build_chain(const ChainParams& params);

struct StationaryDistribution {
  std::vector<double> probabilities;  ///< index k holds state k + 1

  int size() const { return static_cast<int>(probabilities.size()); }
  double probability(int state) const { return probabilities.at(state - 1); }
  double cdf(int state) const;
  int median() const;
  /// Smallest state whose CDF reaches q.
  int quantile(double q) const;
  double mean_cwnd() const;
  double mass_above(int state) const;
};

/// Direct solve of (A - I) p = 0 with one equation replaced by sum(p) = 1.
StationaryDistribution stationary(const TransitionMatrix& matrix);

struct PowerOptions {
  long max_iterations = 2'000'000;
  double tolerance = 1e-15;  ///< on the L-infinity change per iteration
};

/// Power iteration on the sparse nonzero structure of A. Throws SolverError
/// if the iteration cap is reached.
StationaryDistribution stationary_power(const TransitionMatrix& matrix,
                                        const PowerOptions& options = {});

/// Largest absolute residual of the node balance over states
/// 2 .. cwnd_max / 2 - 1.
double node_balance_residual(const ChainParams& params, const StationaryDistribution& dist);

struct BitrateDistribution {
  std::vector<double> bitrates;  ///< bit/s
  std::vector<double> probabilities;

  double mean() const;
  double total_mass() const;
  /// Mass strictly inside (lo, hi).
  double mass_between(double lo, double hi) const;
};

/// Same probabilities over cwnd * mss / rtt.
BitrateDistribution bitrate_distribution(const StationaryDistribution& dist, double mss,
                                         double rtt);

struct LogNormalFit {
  double mu = 0.0;     ///< ln of the median window
  double sigma = 0.41;

  /// mu = ln(equilibrium_cwnd(p_loss, a)).
  static LogNormalFit for_loss(double p_loss, double ack_ratio, double sigma = 0.41);
};

/// 0.5 * (1 + erf((ln cwnd - mu) / (sigma sqrt 2))). Returns 0 for cwnd <= 0.
double lognormal_cdf(const LogNormalFit& fit, double cwnd);

/// Log-normal mass assigned to integer states 1..cwnd_max using the same
/// half-integer cell edges as compare_to_lognormal. Renormalized.
StationaryDistribution discretize_lognormal(const LogNormalFit& fit, int cwnd_max);

struct LogNormalComparison {
  double central_gap = 0.0;  ///< max |CDF difference| inside the 10%-90% quantile band
  double full_gap = 0.0;     ///< same over all states
  int band_low = 0;          ///< states bounding the band
  int band_high = 0;
  /// Largest ratio between chain and log-normal tail probabilities
  /// (lower CDF below the band, survival above it) where both exceed
  /// 1e-6, >= 1.
  double tail_ratio = 1.0;
};

/// State i is compared against the log-normal CDF at i + 0.5.
LogNormalComparison compare_to_lognormal(const StationaryDistribution& dist,
                                         const LogNormalFit& fit);

struct EmpiricalDistribution {
  std::vector<std::uint64_t> counts;  ///< index k holds state k + 1
  std::vector<double> probabilities;
  std::vector<double> bitrates;
  std::uint64_t steps = 0;
};

/// Single-flow simulation, one step per RTT. The window is a real number
/// growing by 1/a per step, capped at cwnd_max; its state is the integer
/// part. With probability 1 - (1 - p_loss)^state at least one packet of
/// the round is lost and the window halves (not below 1).
EmpiricalDistribution monte_carlo_oracle(const ChainParams& params, double mss, double rtt,
                                         std::uint64_t steps, std::uint64_t seed);

/// Half the L1 distance. Missing entries of the shorter vector count as 0.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace tcpshare::markov
