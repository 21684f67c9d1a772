#include "rvq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace rvq::analysis {

double hoeffding_half_width(std::int64_t t) {
  if (t <= 0) throw std::invalid_argument("hoeffding: t must be positive");
  return std::sqrt(std::log(2.0 / 0.05) / (2.0 * double(t)));
}

double threshold(const ThresholdConfig& cfg) {
  if (cfg.k < 2) throw std::invalid_argument("threshold: k must be >= 2");
  if (!(cfg.p >= 0.0 && cfg.p < 0.5))
    throw std::invalid_argument("threshold: p must be in [0, 0.5)");
  return (1.0 / double(cfg.k)) * (2.0 * cfg.p - 1.0) / (2.0 * cfg.p - 2.0);
}

ErrorEstimate estimate_error(const SimConfig& cfg, std::int64_t trials,
                             std::vector<std::string>* transcripts) {
  if (trials < 1) throw std::invalid_argument("estimate_error: trials >= 1");
  cfg.graph.validate();
  cfg.fixed.validate();
  cfg.tunable.validate();
  const int workers = std::max(1, cfg.workers);
  if (transcripts) transcripts->assign(size_t(trials), {});

  // Round i always runs on stream (seed, round, i), so the partition into
  // workers cannot affect any result.
  std::vector<std::int64_t> fails(size_t(workers), 0);
  auto run_block = [&](int worker, std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      RngStream rng(cfg.seed, seed_domain::round, std::uint64_t(i));
      auto rec = protocol::run_test_round(cfg.fixed, cfg.tunable, cfg.graph,
                                          cfg.options, rng);
      if (!rec.passed) ++fails[size_t(worker)];
      if (transcripts)
        (*transcripts)[size_t(i)] = protocol::serialize_round(std::uint64_t(i), rec);
    }
  };

  if (workers == 1) {
    run_block(0, 0, trials);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (trials + workers - 1) / workers;
    for (int wkr = 0; wkr < workers; ++wkr) {
      const std::int64_t begin = std::min<std::int64_t>(wkr * chunk, trials);
      const std::int64_t end = std::min<std::int64_t>(begin + chunk, trials);
      pool.emplace_back(run_block, wkr, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  ErrorEstimate est;
  est.t = trials;
  for (std::int64_t f : fails) est.w += f;
  return est;
}

const char* param_name(ParamKind kind) {
  switch (kind) {
    case ParamKind::efficiency: return "efficiency";
    case ParamKind::sq_fidelity: return "sq_fidelity";
    case ParamKind::entangling_fidelity: return "entangling_fidelity";
    case ParamKind::emission_fidelity: return "emission_fidelity";
    case ParamKind::coherence: return "coherence";
  }
  throw std::logic_error("param_name: bad kind");
}

ParamKind parse_param(const std::string& name) {
  for (ParamKind kind :
       {ParamKind::efficiency, ParamKind::sq_fidelity,
        ParamKind::entangling_fidelity, ParamKind::emission_fidelity,
        ParamKind::coherence})
    if (name == param_name(kind)) return kind;
  throw std::invalid_argument("unknown parameter name: " + name);
}

SimConfig single_param_config(ParamKind kind, double value,
                              const SimConfig& base) {
  SimConfig cfg = base;
  // Error-free optics; the lossy fibre stays.
  cfg.fixed.waveplate_error_prob = 0.0;
  cfg.fixed.dark_count_prob = 0.0;
  cfg.fixed.pbs_crosstalk = 0.0;
  // All tunables perfect, then dial the probed one back.
  cfg.tunable.server_efficiency = 1.0;
  cfg.tunable.sq_gate_fidelity = 1.0;
  cfg.tunable.entangling_gate_fidelity = 1.0;
  cfg.tunable.emission_fidelity = 1.0;
  cfg.tunable.coherence_time = std::numeric_limits<double>::infinity();
  switch (kind) {
    case ParamKind::efficiency: cfg.tunable.server_efficiency = value; break;
    case ParamKind::sq_fidelity: cfg.tunable.sq_gate_fidelity = value; break;
    case ParamKind::entangling_fidelity:
      cfg.tunable.entangling_gate_fidelity = value;
      break;
    case ParamKind::emission_fidelity:
      cfg.tunable.emission_fidelity = value;
      break;
    case ParamKind::coherence: cfg.tunable.coherence_time = value; break;
  }
  cfg.tunable.validate();
  return cfg;
}

std::vector<double> default_sweep_grid(ParamKind kind) {
  auto geometric = [](double lo, double hi, int n) {
    std::vector<double> out;
    const double ratio = std::pow(hi / lo, 1.0 / (n - 1));
    double x = lo;
    for (int i = 0; i < n; ++i, x *= ratio) out.push_back(std::min(x, hi));
    out.back() = hi;
    return out;
  };
  switch (kind) {
    case ParamKind::efficiency:
      return geometric(0.005, 1.0, 10);
    case ParamKind::sq_fidelity:
    case ParamKind::entangling_fidelity:
    case ParamKind::emission_fidelity: {
      // Geometric in the no-imperfection probability (4F-1)/3, mapped back.
      auto p = geometric(0.05, 1.0, 10);
      std::vector<double> f;
      for (double q : p) f.push_back((3.0 * q + 1.0) / 4.0);
      return f;
    }
    case ParamKind::coherence:
      // ms; the floor keeps the cutoff window above the attempt cycle.
      return geometric(4.0, 2048.0, 10);
  }
  throw std::logic_error("default_sweep_grid: bad kind");
}

double interpolate_crossing(double x1, double y1, double x2, double y2,
                            double y_star) {
  if (y1 == y2) throw std::invalid_argument("interpolate_crossing: degenerate");
  return x1 + (y_star - y1) * (x2 - x1) / (y2 - y1);
}

RequirementResult find_min_requirement(const RateEvaluator& evaluate,
                                       const std::vector<double>& grid,
                                       const ThresholdConfig& cfg,
                                       const RequirementBudget& budget) {
  if (grid.size() < 2)
    throw std::invalid_argument("find_min_requirement: need >= 2 grid points");
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("find_min_requirement: grid must be ascending");
  const double thr = threshold(cfg);

  RequirementResult res;
  auto probe = [&](double x, std::int64_t trials) {
    auto est = evaluate(x, trials);
    res.trials_used += est.t;
    res.probes.push_back({x, est});
    return est;
  };

  // Coarse sweep: find an adjacent pair where (rate - threshold) changes
  // sign. "Above" means strictly above: a rate exactly on the threshold
  // counts as satisfying it.
  std::vector<ErrorEstimate> coarse;
  for (double x : grid) coarse.push_back(probe(x, budget.coarse_trials));
  auto above = [&](const ErrorEstimate& e) { return e.rate() > thr; };
  int bracket = -1;
  for (size_t i = 0; i + 1 < grid.size(); ++i)
    if (above(coarse[i]) != above(coarse[i + 1])) {
      bracket = int(i);
      break;
    }
  if (bracket < 0) return res;  // no crossing anywhere on the grid

  ProbePoint lo{grid[size_t(bracket)], coarse[size_t(bracket)]};
  ProbePoint hi{grid[size_t(bracket) + 1], coarse[size_t(bracket) + 1]};

  // Refinement: bisect toward the bracket midpoint at the full trial budget
  // until a probe's confidence interval straddles the threshold.
  for (int step = 0; step < budget.max_refinements; ++step) {
    const double mid = 0.5 * (lo.value + hi.value);
    ProbePoint probe_mid{mid, probe(mid, budget.refine_trials)};
    if (above(probe_mid.estimate) == above(lo.estimate))
      lo = probe_mid;
    else
      hi = probe_mid;
    if (probe_mid.estimate.lower() <= thr && thr <= probe_mid.estimate.upper())
      break;
  }

  // Final value by linear interpolation between the closest bracketing
  // points; uncertainty from interpolating the CI edges.
  const double y1 = lo.estimate.rate(), y2 = hi.estimate.rate();
  res.found = true;
  res.min_value = interpolate_crossing(lo.value, y1, hi.value, y2, thr);
  const double c1 = lo.estimate.ci_half_width(), c2 = hi.estimate.ci_half_width();
  double edge_a = res.min_value, edge_b = res.min_value;
  if (y1 + c1 != y2 + c2)
    edge_a = interpolate_crossing(lo.value, y1 + c1, hi.value, y2 + c2, thr);
  if (y1 - c1 != y2 - c2)
    edge_b = interpolate_crossing(lo.value, y1 - c1, hi.value, y2 - c2, thr);
  res.uncertainty = 0.5 * std::abs(edge_a - edge_b);
  return res;
}

RateEvaluator make_param_evaluator(ParamKind kind, const SimConfig& base) {
  return [kind, base](double value, std::int64_t trials) {
    return estimate_error(single_param_config(kind, value, base), trials);
  };
}

}  // namespace rvq::analysis
