#include "rvq/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rvq::optimizer {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double get_param(const TunableParams& x, ParamKind kind) {
  switch (kind) {
    case ParamKind::efficiency: return x.server_efficiency;
    case ParamKind::sq_fidelity: return x.sq_gate_fidelity;
    case ParamKind::entangling_fidelity: return x.entangling_gate_fidelity;
    case ParamKind::emission_fidelity: return x.emission_fidelity;
    case ParamKind::coherence: return x.coherence_time;
  }
  throw std::logic_error("get_param: bad kind");
}

void set_param(TunableParams& x, ParamKind kind, double value) {
  switch (kind) {
    case ParamKind::efficiency: x.server_efficiency = value; return;
    case ParamKind::sq_fidelity: x.sq_gate_fidelity = value; return;
    case ParamKind::entangling_fidelity:
      x.entangling_gate_fidelity = value;
      return;
    case ParamKind::emission_fidelity: x.emission_fidelity = value; return;
    case ParamKind::coherence: x.coherence_time = value; return;
  }
  throw std::logic_error("set_param: bad kind");
}

double p_no_imperfection(ParamKind kind, double value) {
  switch (kind) {
    case ParamKind::efficiency:
      if (!(value > 0.0 && value <= 1.0))
        throw std::invalid_argument("p_NI: efficiency outside (0,1]");
      return value;
    case ParamKind::sq_fidelity:
    case ParamKind::entangling_fidelity:
    case ParamKind::emission_fidelity:
      if (!(value > 0.25 && value <= 1.0))
        throw std::invalid_argument("p_NI: fidelity outside (0.25,1]");
      return (4.0 * value - 1.0) / 3.0;
    case ParamKind::coherence:
      // exp(-t^2/T^2) at t = 1 ms, T in ms.
      if (!(value > 0.0))
        throw std::invalid_argument("p_NI: coherence time must be positive");
      return std::exp(-1.0 / (value * value));
  }
  throw std::logic_error("p_NI: bad kind");
}

double value_from_p_ni(ParamKind kind, double p, double coherence_cap_ms) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("value_from_p_ni: p outside (0,1]");
  switch (kind) {
    case ParamKind::efficiency:
      return p;
    case ParamKind::sq_fidelity:
    case ParamKind::entangling_fidelity:
    case ParamKind::emission_fidelity:
      return (3.0 * p + 1.0) / 4.0;
    case ParamKind::coherence: {
      if (p == 1.0) return coherence_cap_ms;
      const double t = 1.0 / std::sqrt(-std::log(p));
      return std::min(t, coherence_cap_ms);
    }
  }
  throw std::logic_error("value_from_p_ni: bad kind");
}

double improvement_factor(ParamKind kind, double baseline, double candidate) {
  if (kind == ParamKind::coherence) {
    if (candidate < baseline)
      throw std::invalid_argument("improvement_factor: candidate below baseline");
    if (std::isinf(candidate)) return kInf;
    // ln p_NI ratio with p_NI = exp(-t^2/T^2): the timescale cancels.
    const double r = candidate / baseline;
    return r * r;
  }
  const double pb = p_no_imperfection(kind, baseline);
  const double px = p_no_imperfection(kind, candidate);
  if (px < pb)
    throw std::invalid_argument("improvement_factor: candidate below baseline");
  if (px == 1.0) return kInf;
  return std::log(pb) / std::log(px);
}

double hardware_cost(const TunableParams& x, const TunableParams& baseline) {
  double sum = 0.0;
  for (ParamKind kind : kParamOrder)
    sum += improvement_factor(kind, get_param(baseline, kind),
                              get_param(x, kind));
  return sum;
}

void CostWeights::validate() const {
  if (!(w1 > 0.0 && w2 > 0.0 && w1 / w2 >= 1e4))
    throw std::invalid_argument("cost weights: require w1, w2 > 0 and w1/w2 >= 1e4");
}

CostReport total_cost(double rate, const TunableParams& x,
                      const TunableParams& baseline, const ThresholdConfig& cfg,
                      const CostWeights& weights) {
  weights.validate();
  CostReport report;
  for (size_t i = 0; i < kParamOrder.size(); ++i)
    report.factors[i] = improvement_factor(
        kParamOrder[i], get_param(baseline, kParamOrder[i]),
        get_param(x, kParamOrder[i]));
  report.h_c = 0.0;
  for (double k : report.factors) report.h_c += k;
  const double excess = rate - analysis::threshold(cfg);
  // Heaviside with Theta(0) = 0: the boundary satisfies the constraint.
  report.constraint_term =
      excess > 0.0 ? weights.w1 * (1.0 + excess * excess) : 0.0;
  report.total = report.constraint_term + weights.w2 * report.h_c;
  return report;
}

CandidateEvaluator make_sim_evaluator(const analysis::SimConfig& base) {
  return [base](const TunableParams& x, std::int64_t trials,
                std::uint64_t eval_index) {
    analysis::SimConfig cfg = base;
    cfg.tunable = x;
    cfg.seed = derive_seed(base.seed,
                           static_cast<std::uint64_t>(seed_domain::optimizer),
                           eval_index);
    return analysis::estimate_error(cfg, trials);
  };
}

namespace {

// Uniform draw in p_NI space over [p_NI(baseline), 1), mapped back to the
// parameter's natural scale.
double draw_param(ParamKind kind, const TunableParams& baseline,
                  double coherence_cap_ms, RngStream& rng) {
  const double pb = p_no_imperfection(kind, get_param(baseline, kind));
  const double p = pb + (1.0 - pb) * rng.uniform();
  return value_from_p_ni(kind, p, coherence_cap_ms);
}

}  // namespace

std::vector<TunableParams> init_population(const TunableParams& baseline,
                                           const GAConfig& cfg,
                                           RngStream& rng) {
  baseline.validate();
  // Per-parameter draw lists, then their Cartesian product.
  std::array<std::vector<double>, 5> draws;
  for (size_t i = 0; i < kParamOrder.size(); ++i)
    for (int j = 0; j < cfg.grid[i]; ++j)
      draws[i].push_back(
          draw_param(kParamOrder[i], baseline, cfg.coherence_cap_ms, rng));

  std::vector<TunableParams> population;
  population.reserve(size_t(cfg.population()));
  std::array<size_t, 5> idx{};
  while (true) {
    TunableParams member = baseline;
    for (size_t i = 0; i < kParamOrder.size(); ++i)
      set_param(member, kParamOrder[i], draws[i][idx[i]]);
    population.push_back(member);
    // Odometer increment, last parameter fastest.
    size_t pos = kParamOrder.size();
    while (pos > 0) {
      --pos;
      if (++idx[pos] < draws[pos].size()) break;
      idx[pos] = 0;
      if (pos == 0) return population;
    }
  }
}

namespace {

Member evaluate_member(const TunableParams& params,
                       const CandidateEvaluator& evaluate,
                       const GAConfig& cfg, const TunableParams& baseline,
                       const ThresholdConfig& thr_cfg,
                       const CostWeights& weights, std::uint64_t eval_index) {
  Member m;
  m.params = params;
  m.estimate = evaluate(params, cfg.rounds_per_eval, eval_index);
  m.cost = total_cost(m.estimate.rate(), params, baseline, thr_cfg, weights);
  return m;
}

bool cheaper(const Member& a, const Member& b) {
  return a.cost.total < b.cost.total;
}

}  // namespace

EvolveResult evolve(const std::vector<TunableParams>& initial,
                    const TunableParams& baseline, const GAConfig& cfg,
                    const CandidateEvaluator& evaluate,
                    const ThresholdConfig& thr_cfg, const CostWeights& weights,
                    RngStream& rng) {
  if (initial.empty()) throw std::invalid_argument("evolve: empty population");
  weights.validate();
  std::uint64_t eval_index = 0;

  EvolveResult result;
  std::vector<Member> members;
  for (const auto& params : initial)
    members.push_back(evaluate_member(params, evaluate, cfg, baseline, thr_cfg,
                                      weights, eval_index++));
  std::stable_sort(members.begin(), members.end(), cheaper);
  result.generations.push_back(members);
  result.best_cost_trace.push_back(members.front().cost.total);

  const int parent_count = std::min<int>(cfg.parents, int(members.size()));
  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Member> next;
    next.push_back(members.front());  // elitism: carry the best, cost cached
    while (next.size() < members.size()) {
      // Two distinct random parents from the lowest-cost block.
      const int a = int(rng.below(std::uint64_t(parent_count)));
      int b = a;
      while (parent_count > 1 && b == a)
        b = int(rng.below(std::uint64_t(parent_count)));
      TunableParams child = baseline;
      for (size_t i = 0; i < kParamOrder.size(); ++i) {
        const Member& src = rng.below(2) == 0 ? members[size_t(a)]
                                              : members[size_t(b)];
        set_param(child, kParamOrder[i], get_param(src.params, kParamOrder[i]));
      }
      for (size_t i = 0; i < kParamOrder.size(); ++i)
        if (rng.uniform() < cfg.mutation_prob)
          set_param(child, kParamOrder[i],
                    draw_param(kParamOrder[i], baseline, cfg.coherence_cap_ms,
                               rng));
      next.push_back(evaluate_member(child, evaluate, cfg, baseline, thr_cfg,
                                     weights, eval_index++));
    }
    members = std::move(next);
    std::stable_sort(members.begin(), members.end(), cheaper);
    result.generations.push_back(members);
    result.best_cost_trace.push_back(members.front().cost.total);
  }

  result.best = members.front().params;
  result.best_estimate = members.front().estimate;
  result.best_cost = members.front().cost;
  return result;
}

LocalSearchResult local_search(const TunableParams& start,
                               const TunableParams& baseline,
                               const GAConfig& cfg,
                               const CandidateEvaluator& evaluate,
                               const ThresholdConfig& thr_cfg,
                               const CostWeights& weights) {
  weights.validate();
  const double thr = analysis::threshold(thr_cfg);
  // Seed space disjoint from evolve's evaluation indices.
  std::uint64_t eval_index = std::uint64_t(1) << 32;

  LocalSearchResult res;
  res.params = start;
  res.estimate = evaluate(start, cfg.local_search_rounds, eval_index++);
  if (res.estimate.rate() > thr)
    throw std::invalid_argument("local_search: start violates the constraint");

  std::array<bool, 5> exhausted{};
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (size_t i = 0; i < kParamOrder.size(); ++i) {
      if (exhausted[i]) continue;
      const ParamKind kind = kParamOrder[i];
      const double pb = p_no_imperfection(kind, get_param(baseline, kind));
      const double px = p_no_imperfection(kind, get_param(res.params, kind));
      // Step toward the baseline by `local_step` of the remaining log-gap.
      const double gap = std::log(pb) - std::log(px);
      if (!(gap < -1e-9)) {  // already at (or numerically at) the baseline
        exhausted[i] = true;
        continue;
      }
      const double p_new = px * std::exp(cfg.local_step * gap);
      TunableParams candidate = res.params;
      set_param(candidate, kind,
                value_from_p_ni(kind, p_new, cfg.coherence_cap_ms));
      auto est = evaluate(candidate, cfg.local_search_rounds, eval_index++);
      if (est.rate() <= thr) {
        res.params = candidate;
        res.estimate = est;
        ++res.accepted_steps;
        progressed = true;
      } else {
        exhausted[i] = true;  // revert; this parameter is done
      }
    }
  }
  res.cost = total_cost(res.estimate.rate(), res.params, baseline, thr_cfg,
                        weights);
  return res;
}

}  // namespace rvq::optimizer
