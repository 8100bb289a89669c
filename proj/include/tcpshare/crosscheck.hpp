#pragma once

// Comparisons of simulated traces against the closed-form queue, RTT and
// rate trajectories. Each check extracts the stretches of a trace where the
// corresponding formula's premises hold and reports the worst relative error.

#include <vector>

#include "tcpshare/simulator.hpp"

namespace tcpshare::sim {

/// Stretch of a trace with a nonempty, unsaturated queue and no losses or
/// window reductions, beginning `settle` round trips after the last one.
struct QuietInterval {
  double start = 0.0;
  double end = 0.0;
};

std::vector<QuietInterval> quiet_intervals(const RateTrace& trace, double settle_rtts = 3.0);

struct RttGrowthCheck {
  int intervals = 0;
  double max_rel_error = 0.0;
};

/// Simulated RTT against the square-root growth law, anchored at the RTT
/// observed at the start of each quiet interval.
RttGrowthCheck check_rtt_growth(const RateTrace& trace, double settle_rtts = 3.0);

struct ConvergenceCheck {
  int events = 0;      ///< congestion events after the warm-up
  int measured = 0;    ///< events followed by a usable quiet window
  int passed = 0;
  double worst_error = 0.0;
  std::vector<double> errors;  ///< per measured event, worst over flows and time
};

/// Every flow's rate after each congestion event against the fair-share
/// convergence trajectory over up to `window` seconds.
ConvergenceCheck check_convergence(const RateTrace& trace, double window = 2.0,
                                   double tolerance = 0.05);

struct StepCheck {
  int candidates = 0;  ///< single-flow reductions after the warm-up
  int measured = 0;    ///< of those, with quiet queue on both sides
  int passed = 0;
  double worst_hit_error = 0.0;
  double worst_other_error = 0.0;
};

/// Rate steps of the hit flow and of every other flow at isolated window
/// reductions. Post-step rates are extrapolated back to the hit instant
/// with a quadratic fit over the settled trajectory.
StepCheck check_step_sizes(const RateTrace& trace, double tolerance = 0.05);

}  // namespace tcpshare::sim
