#pragma once

// Error-probability estimation with Hoeffding confidence intervals, the
// acceptance threshold, and the per-parameter minimal-requirement finder
// (coarse sweep + bisection-style refinement + linear interpolation).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rvq/common.hpp"
#include "rvq/devices.hpp"
#include "rvq/protocol.hpp"

namespace rvq::analysis {

// 95% Hoeffding half-width sqrt(ln(2/0.05) / (2t)).
double hoeffding_half_width(std::int64_t t);

struct ErrorEstimate {
  std::int64_t w = 0;  // failed rounds
  std::int64_t t = 0;  // total rounds
  double rate() const { return t == 0 ? 0.0 : double(w) / double(t); }
  double ci_half_width() const { return hoeffding_half_width(t); }
  double upper() const { return rate() + ci_half_width(); }
  double lower() const { return rate() - ci_half_width(); }
};

// Acceptance threshold (1/k) * (2p - 1) / (2p - 2) on the failed fraction;
// 1/(2k) when the inherent error probability p is zero.
struct ThresholdConfig {
  int k = 2;       // principal colouring number
  double p = 0.0;  // inherent protocol error probability
};
double threshold(const ThresholdConfig& cfg);  // throws when p >= 0.5 or k < 2

// Full simulation configuration for a batch of test rounds.
struct SimConfig {
  devices::FixedParams fixed;
  devices::TunableParams tunable;
  protocol::GraphSpec graph = protocol::GraphSpec::line5();
  protocol::ProtocolOptions options;
  std::uint64_t seed = 0;
  int workers = 1;
};

// Run `trials` independent rounds (round i on its own derived stream, so the
// result is identical for any worker count). When `transcripts` is non-null
// it receives one serialized line per round, in round order.
ErrorEstimate estimate_error(const SimConfig& cfg, std::int64_t trials,
                             std::vector<std::string>* transcripts = nullptr);

// The five tunable hardware parameters, as sweepable axes.
enum class ParamKind {
  efficiency,
  sq_fidelity,
  entangling_fidelity,
  emission_fidelity,
  coherence,
};
const char* param_name(ParamKind kind);
ParamKind parse_param(const std::string& name);  // throws on unknown name

// Config for probing one parameter in isolation: the named parameter set to
// `value`, every other tunable perfect (coherence: dephasing removed), the
// client optics error-free, and only the fibre loss retained.
SimConfig single_param_config(ParamKind kind, double value,
                              const SimConfig& base);

// Default coarse-sweep grid for a parameter: 10 points, worst to best,
// geometric in the parameter's natural scale.
std::vector<double> default_sweep_grid(ParamKind kind);

struct RequirementBudget {
  int coarse_points = 10;
  std::int64_t coarse_trials = 2000;
  std::int64_t refine_trials = 70000;
  int max_refinements = 12;
};

struct ProbePoint {
  double value = 0.0;
  ErrorEstimate estimate;
};

struct RequirementResult {
  bool found = false;
  double min_value = 0.0;
  double uncertainty = 0.0;
  std::int64_t trials_used = 0;
  std::vector<ProbePoint> probes;  // every evaluation, in probe order
};

// rate estimate for a parameter value at a trial budget.
using RateEvaluator =
    std::function<ErrorEstimate(double value, std::int64_t trials)>;

// Locate where the error rate crosses the threshold along `grid` (ascending
// parameter values): coarse sweep at low trials brackets the crossing,
// bisection at the refinement budget narrows it until a probe's confidence
// interval straddles the threshold (or the refinement cap is hit), and the
// final value comes from linear interpolation between the closest bracketing
// points, with the uncertainty from interpolating the CI edges. `found` is
// false when the rate never crosses the threshold over the grid.
RequirementResult find_min_requirement(const RateEvaluator& evaluate,
                                       const std::vector<double>& grid,
                                       const ThresholdConfig& cfg,
                                       const RequirementBudget& budget);

// Convenience: the real-simulator evaluator for one parameter (others
// perfect except fibre loss), derived from `base`.
RateEvaluator make_param_evaluator(ParamKind kind, const SimConfig& base);

// x* = x1 + (y* - y1)(x2 - x1)/(y2 - y1); throws on y1 == y2.
double interpolate_crossing(double x1, double y1, double x2, double y2,
                            double y_star);

}  // namespace rvq::analysis
