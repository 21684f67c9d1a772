#pragma once

// Hardware cost model (no-imperfection probabilities, improvement factors,
// H_c), the weighted total objective, the genetic algorithm over the five
// tunable parameters, and the local-search refinement.

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "rvq/analysis.hpp"
#include "rvq/common.hpp"
#include "rvq/devices.hpp"

namespace rvq::optimizer {

using analysis::ErrorEstimate;
using analysis::ParamKind;
using analysis::ThresholdConfig;
using devices::TunableParams;

constexpr std::array<ParamKind, 5> kParamOrder = {
    ParamKind::efficiency, ParamKind::coherence, ParamKind::sq_fidelity,
    ParamKind::entangling_fidelity, ParamKind::emission_fidelity};

double get_param(const TunableParams& x, ParamKind kind);
void set_param(TunableParams& x, ParamKind kind, double value);

// Probability of no imperfection (each parameter rescaled to [0,1]):
// efficiency eta -> eta; fidelity F -> (4F-1)/3; coherence T (ms) ->
// exp(-t^2/T^2) at the fixed internal timescale t = 1 ms (the choice of t
// cancels out of every improvement factor).
double p_no_imperfection(ParamKind kind, double value);
// Inverse map from p_NI back to the parameter value. Coherence values are
// clamped to `coherence_cap_ms`.
double value_from_p_ni(ParamKind kind, double p, double coherence_cap_ms);

// k = ln p_NI(baseline) / ln p_NI(candidate), >= 1; coherence uses the
// closed form (T_x/T_b)^2. A perfect candidate (p_NI = 1) returns +infinity
// (the candidate is rejected by the cost); a candidate worse than baseline
// throws.
double improvement_factor(ParamKind kind, double baseline, double candidate);

// H_c = sum of the five improvement factors (>= 5, = 5 at the baseline).
double hardware_cost(const TunableParams& x, const TunableParams& baseline);

struct CostWeights {
  double w1 = 1e6;
  double w2 = 1.0;
  void validate() const;  // requires w1/w2 >= 1e4
};

struct CostReport {
  std::array<double, 5> factors{};  // in kParamOrder order
  double h_c = 0.0;
  double constraint_term = 0.0;
  double total = 0.0;
};

// C = w1 (1 + (rate - thr)^2) Theta(rate - thr) + w2 H_c, with Theta(0) = 0
// (a rate exactly on the threshold satisfies the constraint).
CostReport total_cost(double rate, const TunableParams& x,
                      const TunableParams& baseline, const ThresholdConfig& cfg,
                      const CostWeights& weights);

struct GAConfig {
  // Per-parameter draw counts, in kParamOrder order: efficiency, coherence,
  // single-qubit F, entangling F, emission F.
  std::array<int, 5> grid = {3, 4, 2, 3, 2};
  int parents = 8;
  double mutation_prob = 0.2;
  int generations = 20;
  std::int64_t rounds_per_eval = 20000;
  std::int64_t local_search_rounds = 70000;
  double coherence_cap_ms = 1000.0;
  double local_step = 0.02;  // fraction of the p_NI log-gap per step
  int population() const {
    int n = 1;
    for (int g : grid) n *= g;
    return n;
  }
};

// Candidate-rate evaluator; eval_index makes every evaluation's random
// stream distinct and reproducible regardless of dispatch order.
using CandidateEvaluator = std::function<ErrorEstimate(
    const TunableParams& x, std::int64_t trials, std::uint64_t eval_index)>;

// The real-simulator evaluator: runs estimate_error on `base` with the
// candidate tunables and a per-evaluation derived seed.
CandidateEvaluator make_sim_evaluator(const analysis::SimConfig& base);

// Cartesian product of per-parameter draws (grid[i] values each, sampled
// uniformly in p_NI space between baseline and perfect; coherence capped).
std::vector<TunableParams> init_population(const TunableParams& baseline,
                                           const GAConfig& cfg, RngStream& rng);

struct Member {
  TunableParams params;
  ErrorEstimate estimate;
  CostReport cost;
};

struct EvolveResult {
  TunableParams best;
  ErrorEstimate best_estimate;
  CostReport best_cost;
  std::vector<double> best_cost_trace;      // per generation, nonincreasing
  std::vector<std::vector<Member>> generations;
};

// Generational GA: evaluate all, pick the `parents` lowest-cost members,
// breed by uniform per-parameter crossover of two distinct random parents,
// mutate each gene with `mutation_prob` by resampling in p_NI space;
// elitism carries the best member (and its evaluated cost) forward.
EvolveResult evolve(const std::vector<TunableParams>& initial,
                    const TunableParams& baseline, const GAConfig& cfg,
                    const CandidateEvaluator& evaluate,
                    const ThresholdConfig& thr_cfg, const CostWeights& weights,
                    RngStream& rng);

struct LocalSearchResult {
  TunableParams params;
  ErrorEstimate estimate;
  CostReport cost;
  int accepted_steps = 0;
};

// Cyclic coordinate descent toward the baseline: each round, every parameter
// tries one multiplicative step of `local_step` of its remaining p_NI
// log-gap; a step whose re-evaluated rate breaks the threshold is reverted
// and the parameter stops. Terminates when no parameter can step. The input
// must satisfy the constraint at `local_search_rounds` (else throws).
LocalSearchResult local_search(const TunableParams& start,
                               const TunableParams& baseline,
                               const GAConfig& cfg,
                               const CandidateEvaluator& evaluate,
                               const ThresholdConfig& thr_cfg,
                               const CostWeights& weights);

}  // namespace rvq::optimizer
