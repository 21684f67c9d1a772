#include "rvq/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace rvq::cli {

using json = nlohmann::json;
using analysis::ErrorEstimate;
using analysis::ParamKind;
using optimizer::kParamOrder;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) fail(path, msg);
}

// Reads one JSON object's known keys (absent keys keep the caller's
// defaults) and rejects everything else with a full key path.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "config" : path_, "expected a JSON object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string key_path(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read_string(const char* key, std::string& target) {
    if (!has(key)) return;
    if (!at(key).is_string()) fail(key_path(key), "expected a string");
    target = at(key).get<std::string>();
  }
  void read_bool(const char* key, bool& target) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) fail(key_path(key), "expected a boolean");
    target = at(key).get<bool>();
  }
  void read_double(const char* key, double& target) {
    if (!has(key)) return;
    if (!at(key).is_number()) fail(key_path(key), "expected a number");
    target = at(key).get<double>();
  }
  void read_int64(const char* key, std::int64_t& target) {
    if (!has(key)) return;
    if (!at(key).is_number_integer()) fail(key_path(key), "expected an integer");
    target = at(key).get<std::int64_t>();
  }
  void read_int(const char* key, int& target) {
    std::int64_t v = target;
    read_int64(key, v);
    target = int(v);
  }
  void read_u64(const char* key, std::uint64_t& target) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(key_path(key), "expected a non-negative integer");
    target = v.get<std::uint64_t>();
  }

  // Unknown keys are configuration errors, not silent no-ops.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key()))
        fail(path_.empty() ? it.key() : path_ + "." + it.key(), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

// Range validation with field-naming diagnostics; used after parsing and
// again after command-line overrides.
void validate_config(const RunConfig& cfg) {
  require(cfg.rounds >= 1, "rounds", "must be a positive integer");
  require(cfg.workers >= 0, "workers", "must be >= 0 (0 = all cores)");
  require(!cfg.out.empty(), "out", "must be a non-empty path prefix");
  require(cfg.graph.is_line5(), "graph", "only \"line5\" is supported");

  const auto& f = cfg.fixed;
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  auto prob = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  require(nonneg(f.channel_length), "fixed.channel_length", "must be >= 0 km");
  require(nonneg(f.fiber_loss), "fixed.fiber_loss", "must be >= 0 dB/km");
  require(prob(f.waveplate_error_prob), "fixed.waveplate_error_prob", "must be a probability in [0, 1]");
  require(prob(f.dark_count_prob), "fixed.dark_count_prob", "must be a probability in [0, 1]");
  require(prob(f.pbs_crosstalk), "fixed.pbs_crosstalk", "must be a probability in [0, 1]");
  require(nonneg(f.rotation_duration), "fixed.rotation_duration", "must be >= 0 us");
  require(nonneg(f.entangling_duration), "fixed.entangling_duration", "must be >= 0 us");
  require(nonneg(f.init_duration), "fixed.init_duration", "must be >= 0 ns");
  require(nonneg(f.emission_duration), "fixed.emission_duration", "must be >= 0 ns");
  require(nonneg(f.readout_duration), "fixed.readout_duration", "must be >= 0 us");

  const auto& t = cfg.tunable;
  require(t.server_efficiency > 0.0 && t.server_efficiency <= 1.0,
          "tunable.server_efficiency", "must be in (0, 1]");
  require(t.sq_gate_fidelity > 0.25 && t.sq_gate_fidelity <= 1.0,
          "tunable.sq_gate_fidelity", "must be a fidelity in (0.25, 1]");
  require(t.entangling_gate_fidelity > 0.25 && t.entangling_gate_fidelity <= 1.0,
          "tunable.entangling_gate_fidelity", "must be a fidelity in (0.25, 1]");
  require(t.emission_fidelity > 0.25 && t.emission_fidelity <= 1.0,
          "tunable.emission_fidelity", "must be a fidelity in (0.25, 1]");
  require(t.coherence_time > 0.0, "tunable.coherence_time",
          "must be positive (ms; \"inf\" disables dephasing)");

  require(cfg.sweep_oracle == "simulator" || cfg.sweep_oracle == "linear",
          "sweep.oracle", "must be \"simulator\" or \"linear\"");
  const auto& b = cfg.budget;
  require(b.coarse_points >= 2, "sweep.coarse_points", "must be >= 2");
  require(b.coarse_trials >= 1, "sweep.coarse_trials", "must be >= 1");
  require(b.refine_trials >= 1, "sweep.refine_trials", "must be >= 1");
  require(b.max_refinements >= 0, "sweep.max_refinements", "must be >= 0");

  const auto& g = cfg.ga;
  for (int n : g.grid)
    require(n >= 1, "optimize.grid", "entries must be >= 1");
  require(g.parents >= 1, "optimize.parents", "must be >= 1");
  require(g.mutation_prob >= 0.0 && g.mutation_prob <= 1.0,
          "optimize.mutation_prob", "must be a probability in [0, 1]");
  require(g.generations >= 0, "optimize.generations", "must be >= 0");
  require(g.rounds_per_eval >= 1, "optimize.rounds_per_eval", "must be >= 1");
  require(g.local_search_rounds >= 1, "optimize.local_search_rounds", "must be >= 1");
  require(std::isfinite(g.coherence_cap_ms) && g.coherence_cap_ms > 0.0,
          "optimize.coherence_cap_ms", "must be a positive time in ms");
  require(g.local_step > 0.0 && g.local_step < 1.0, "optimize.local_step",
          "must be in (0, 1)");
}

// JSON cannot express IEEE infinities; coherence times (and anything else
// that may legitimately be infinite) round-trip through the string "inf".
json json_number(double v) {
  return std::isinf(v) ? json("inf") : json(v);
}

json config_json(const RunConfig& cfg) {
  const auto& f = cfg.fixed;
  const auto& t = cfg.tunable;
  const auto& b = cfg.budget;
  const auto& g = cfg.ga;
  return json{
      {"mode", mode_name(cfg.mode)},
      {"seed", cfg.seed},
      {"rounds", cfg.rounds},
      {"workers", cfg.workers},
      {"out", cfg.out},
      {"param", analysis::param_name(cfg.sweep_param)},
      {"graph", "line5"},
      {"fixed",
       {{"channel_length", f.channel_length},
        {"fiber_loss", f.fiber_loss},
        {"waveplate_error_prob", f.waveplate_error_prob},
        {"dark_count_prob", f.dark_count_prob},
        {"pbs_crosstalk", f.pbs_crosstalk},
        {"rotation_duration", f.rotation_duration},
        {"entangling_duration", f.entangling_duration},
        {"init_duration", f.init_duration},
        {"emission_duration", f.emission_duration},
        {"readout_duration", f.readout_duration}}},
      {"tunable",
       {{"server_efficiency", t.server_efficiency},
        {"sq_gate_fidelity", t.sq_gate_fidelity},
        {"entangling_gate_fidelity", t.entangling_gate_fidelity},
        {"emission_fidelity", t.emission_fidelity},
        {"coherence_time", json_number(t.coherence_time)}}},
      {"options",
       {{"strict_main_text_check", cfg.options.strict_main_text_check},
        {"shared_dephasing_rate", cfg.options.shared_dephasing_rate}}},
      {"sweep",
       {{"oracle", cfg.sweep_oracle},
        {"coarse_points", b.coarse_points},
        {"coarse_trials", b.coarse_trials},
        {"refine_trials", b.refine_trials},
        {"max_refinements", b.max_refinements}}},
      {"optimize",
       {{"grid", g.grid},
        {"parents", g.parents},
        {"mutation_prob", g.mutation_prob},
        {"generations", g.generations},
        {"rounds_per_eval", g.rounds_per_eval},
        {"local_search_rounds", g.local_search_rounds},
        {"coherence_cap_ms", g.coherence_cap_ms},
        {"local_step", g.local_step}}},
  };
}

// Provenance block embedded in every output file. The worker count is
// deliberately omitted: results are worker-invariant, so files produced
// with different --workers must stay byte-identical.
json provenance_json(const RunConfig& cfg) {
  json j = config_json(cfg);
  j.erase("workers");
  return j;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

void finish_write(std::ofstream& f, const std::string& path) {
  f.flush();
  if (!f.good()) throw IoError("write failed: " + path);
}

void write_text(const std::string& path, const std::string& text) {
  auto f = open_out(path);
  f << text;
  finish_write(f, path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing / emission
// ---------------------------------------------------------------------------

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::run: return "run";
    case Mode::sweep: return "sweep";
    case Mode::optimize: return "optimize";
  }
  throw std::logic_error("mode_name: bad mode");
}

Mode parse_mode(const std::string& name) {
  if (name == "run") return Mode::run;
  if (name == "sweep") return Mode::sweep;
  if (name == "optimize") return Mode::optimize;
  fail("mode", "must be \"run\", \"sweep\", or \"optimize\" (got \"" + name + "\")");
}

RunConfig parse_config_text(const std::string& text) {
  // An empty (or whitespace-only) file keeps every default.
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return RunConfig{};

  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  RunConfig cfg;
  ObjectReader top(j, "");

  std::string mode = mode_name(cfg.mode);
  top.read_string("mode", mode);
  cfg.mode = parse_mode(mode);

  top.read_u64("seed", cfg.seed);
  top.read_int64("rounds", cfg.rounds);
  top.read_int("workers", cfg.workers);
  top.read_string("out", cfg.out);

  std::string param = analysis::param_name(cfg.sweep_param);
  top.read_string("param", param);
  try {
    cfg.sweep_param = analysis::parse_param(param);
  } catch (const std::invalid_argument& e) {
    fail("param", e.what());
  }

  std::string graph = "line5";
  top.read_string("graph", graph);
  require(graph == "line5", "graph", "only \"line5\" is supported");
  cfg.graph = protocol::GraphSpec::line5();

  if (top.has("fixed")) {
    ObjectReader r(top.at("fixed"), "fixed");
    auto& f = cfg.fixed;
    r.read_double("channel_length", f.channel_length);
    r.read_double("fiber_loss", f.fiber_loss);
    r.read_double("waveplate_error_prob", f.waveplate_error_prob);
    r.read_double("dark_count_prob", f.dark_count_prob);
    r.read_double("pbs_crosstalk", f.pbs_crosstalk);
    r.read_double("rotation_duration", f.rotation_duration);
    r.read_double("entangling_duration", f.entangling_duration);
    r.read_double("init_duration", f.init_duration);
    r.read_double("emission_duration", f.emission_duration);
    r.read_double("readout_duration", f.readout_duration);
    r.finish();
  }

  if (top.has("tunable")) {
    ObjectReader r(top.at("tunable"), "tunable");
    auto& t = cfg.tunable;
    r.read_double("server_efficiency", t.server_efficiency);
    r.read_double("sq_gate_fidelity", t.sq_gate_fidelity);
    r.read_double("entangling_gate_fidelity", t.entangling_gate_fidelity);
    r.read_double("emission_fidelity", t.emission_fidelity);
    if (r.has("coherence_time")) {
      const json& v = r.at("coherence_time");
      if (v.is_string()) {
        require(v.get<std::string>() == "inf", "tunable.coherence_time",
                "the only string form is \"inf\"");
        t.coherence_time = std::numeric_limits<double>::infinity();
      } else if (v.is_number()) {
        t.coherence_time = v.get<double>();
      } else {
        fail("tunable.coherence_time", "expected a number or \"inf\"");
      }
    }
    r.finish();
  }

  if (top.has("options")) {
    ObjectReader r(top.at("options"), "options");
    r.read_bool("strict_main_text_check", cfg.options.strict_main_text_check);
    r.read_bool("shared_dephasing_rate", cfg.options.shared_dephasing_rate);
    r.finish();
  }

  if (top.has("sweep")) {
    ObjectReader r(top.at("sweep"), "sweep");
    r.read_string("oracle", cfg.sweep_oracle);
    r.read_int("coarse_points", cfg.budget.coarse_points);
    r.read_int64("coarse_trials", cfg.budget.coarse_trials);
    r.read_int64("refine_trials", cfg.budget.refine_trials);
    r.read_int("max_refinements", cfg.budget.max_refinements);
    r.finish();
  }

  if (top.has("optimize")) {
    ObjectReader r(top.at("optimize"), "optimize");
    auto& g = cfg.ga;
    if (r.has("grid")) {
      const json& v = r.at("grid");
      if (!v.is_array() || v.size() != kParamOrder.size())
        fail("optimize.grid", "expected an array of 5 integers (one per parameter)");
      for (size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer())
          fail("optimize.grid", "entries must be integers");
        g.grid[i] = v[i].get<int>();
      }
    }
    r.read_int("parents", g.parents);
    r.read_double("mutation_prob", g.mutation_prob);
    r.read_int("generations", g.generations);
    r.read_int64("rounds_per_eval", g.rounds_per_eval);
    r.read_int64("local_search_rounds", g.local_search_rounds);
    r.read_double("coherence_cap_ms", g.coherence_cap_ms);
    r.read_double("local_step", g.local_step);
    r.finish();
  }

  top.finish();
  validate_config(cfg);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config file not readable: " + path);
  std::ostringstream text;
  text << f.rdbuf();
  return parse_config_text(text.str());
}

std::string emit_config(const RunConfig& cfg) {
  return config_json(cfg).dump(2) + "\n";
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  const auto& fa = a.fixed;
  const auto& fb = b.fixed;
  const auto& ta = a.tunable;
  const auto& tb = b.tunable;
  return a.mode == b.mode && a.rounds == b.rounds && a.seed == b.seed &&
         a.workers == b.workers && a.out == b.out &&
         a.sweep_param == b.sweep_param && a.sweep_oracle == b.sweep_oracle &&
         fa.channel_length == fb.channel_length &&
         fa.fiber_loss == fb.fiber_loss &&
         fa.waveplate_error_prob == fb.waveplate_error_prob &&
         fa.dark_count_prob == fb.dark_count_prob &&
         fa.pbs_crosstalk == fb.pbs_crosstalk &&
         fa.rotation_duration == fb.rotation_duration &&
         fa.entangling_duration == fb.entangling_duration &&
         fa.init_duration == fb.init_duration &&
         fa.emission_duration == fb.emission_duration &&
         fa.readout_duration == fb.readout_duration &&
         ta.server_efficiency == tb.server_efficiency &&
         ta.sq_gate_fidelity == tb.sq_gate_fidelity &&
         ta.entangling_gate_fidelity == tb.entangling_gate_fidelity &&
         ta.emission_fidelity == tb.emission_fidelity &&
         ta.coherence_time == tb.coherence_time &&
         a.graph.nodes == b.graph.nodes && a.graph.edges == b.graph.edges &&
         a.graph.coloring == b.graph.coloring &&
         a.options.strict_main_text_check == b.options.strict_main_text_check &&
         a.options.shared_dephasing_rate == b.options.shared_dephasing_rate &&
         a.budget.coarse_points == b.budget.coarse_points &&
         a.budget.coarse_trials == b.budget.coarse_trials &&
         a.budget.refine_trials == b.budget.refine_trials &&
         a.budget.max_refinements == b.budget.max_refinements &&
         a.ga.grid == b.ga.grid && a.ga.parents == b.ga.parents &&
         a.ga.mutation_prob == b.ga.mutation_prob &&
         a.ga.generations == b.ga.generations &&
         a.ga.rounds_per_eval == b.ga.rounds_per_eval &&
         a.ga.local_search_rounds == b.ga.local_search_rounds &&
         a.ga.coherence_cap_ms == b.ga.coherence_cap_ms &&
         a.ga.local_step == b.ga.local_step;
}

int effective_workers(const RunConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  return int(std::max(1u, std::thread::hardware_concurrency()));
}

analysis::SimConfig to_sim_config(const RunConfig& cfg) {
  analysis::SimConfig sim;
  sim.fixed = cfg.fixed;
  sim.tunable = cfg.tunable;
  sim.graph = cfg.graph;
  sim.options = cfg.options;
  sim.seed = cfg.seed;
  sim.workers = effective_workers(cfg);
  return sim;
}

// ---------------------------------------------------------------------------
// run: estimate the error rate, persist transcript + report
// ---------------------------------------------------------------------------

int cmd_run(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> transcripts;
  const ErrorEstimate est =
      analysis::estimate_error(to_sim_config(cfg), cfg.rounds, &transcripts);
  const double thr = analysis::threshold(analysis::ThresholdConfig{});

  const json prov = provenance_json(cfg);
  const std::string transcript_path = cfg.out + ".transcripts.txt";
  {
    auto f = open_out(transcript_path);
    f << "# config: " << prov.dump() << "\n";
    f << "# seed: " << cfg.seed << "\n";
    for (const auto& line : transcripts) f << line << "\n";
    finish_write(f, transcript_path);
  }

  // The failure fraction depends on modelling choices the parameter tables
  // alone do not determine; every run report names them next to the number.
  const json decisions = json::array({
      "CZ gates compiled as 6 single-qubit rotations + 1 Rxx per edge; every "
      "executed native gate is followed by a depolarizing channel at its "
      "configured fidelity",
      "waveplate imperfections drawn per photon as Gaussian retardation and "
      "axis deviations, calibrated so the mean wrong-outcome probability over "
      "the 8 preparation angles equals the configured error probability",
      "detector resolution: double or missing clicks discard the attempt; a "
      "dark count can fake the arrival of a lost photon, with an outcome "
      "uncorrelated with the ion",
  });
  const json report{
      {"command", "run"},
      {"config", prov},
      {"model_decisions", decisions},
      {"rounds", est.t},
      {"failures", est.w},
      {"rate", est.rate()},
      {"ci_half_width", est.ci_half_width()},
      {"rate_upper", est.upper()},
      {"rate_lower", est.lower()},
      {"threshold", thr},
  };
  write_text(cfg.out + ".report.json", report.dump(2) + "\n");

  out << std::fixed << std::setprecision(6) << "run: rate " << est.rate()
      << " +/- " << est.ci_half_width() << " (" << est.w << "/" << est.t
      << " rounds failed, threshold " << thr << ")\n";
  out.unsetf(std::ios::floatfield);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep: minimal requirement for one parameter
// ---------------------------------------------------------------------------

int cmd_sweep(const RunConfig& cfg, std::ostream& out,
              const analysis::RateEvaluator& evaluate_in) {
  const ParamKind kind = cfg.sweep_param;
  analysis::RateEvaluator evaluate = evaluate_in;
  if (!evaluate) {
    if (cfg.sweep_oracle == "linear") {
      // Self-test oracle: the rate IS the parameter value, so the finder
      // must recover the threshold itself.
      evaluate = [](double value, std::int64_t trials) {
        const double rate = std::clamp(value, 0.0, 1.0);
        return ErrorEstimate{std::int64_t(std::llround(rate * double(trials))),
                             trials};
      };
    } else {
      evaluate = analysis::make_param_evaluator(kind, to_sim_config(cfg));
    }
  }

  const std::vector<double> grid = analysis::default_sweep_grid(kind);
  const analysis::ThresholdConfig thr_cfg;
  const double thr = analysis::threshold(thr_cfg);
  const analysis::RequirementResult res =
      analysis::find_min_requirement(evaluate, grid, thr_cfg, cfg.budget);

  const json prov = provenance_json(cfg);
  const std::string csv_path = cfg.out + ".sweep.csv";
  {
    auto f = open_out(csv_path);
    f << "# config: " << prov.dump() << "\n";
    f << "# seed: " << cfg.seed << "\n";
    f << "# param: " << analysis::param_name(kind) << "\n";
    f << "value,rounds,failures,rate,ci_half_width,upper,lower\n";
    f << std::setprecision(12);
    for (const auto& p : res.probes)
      f << p.value << "," << p.estimate.t << "," << p.estimate.w << ","
        << p.estimate.rate() << "," << p.estimate.ci_half_width() << ","
        << p.estimate.upper() << "," << p.estimate.lower() << "\n";
    if (res.found)
      f << "# minimal requirement: " << res.min_value << " +/- "
        << res.uncertainty << "\n";
    else
      f << "# no crossing: rate never crosses threshold " << thr
        << " on this grid\n";
    finish_write(f, csv_path);
  }

  json report{
      {"command", "sweep"},
      {"config", prov},
      {"param", analysis::param_name(kind)},
      {"threshold", thr},
      {"grid_lo", grid.front()},
      {"grid_hi", grid.back()},
      {"found", res.found},
      {"trials_used", res.trials_used},
      {"probes", res.probes.size()},
  };
  if (res.found) {
    report["min_value"] = res.min_value;
    report["uncertainty"] = res.uncertainty;
  }
  write_text(cfg.out + ".report.json", report.dump(2) + "\n");

  if (res.found)
    out << "sweep: minimal " << analysis::param_name(kind) << " = "
        << res.min_value << " +/- " << res.uncertainty << " ("
        << res.trials_used << " rounds)\n";
  else
    out << "sweep: no crossing for " << analysis::param_name(kind)
        << " on [" << grid.front() << ", " << grid.back() << "] ("
        << res.trials_used << " rounds)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// optimize: GA + local search for the cheapest feasible improvement
// ---------------------------------------------------------------------------

int cmd_optimize(const RunConfig& cfg, std::ostream& out,
                 const optimizer::CandidateEvaluator& evaluate_in) {
  using optimizer::CostReport;
  using optimizer::get_param;
  using optimizer::TunableParams;

  const analysis::ThresholdConfig thr_cfg;
  const double thr = analysis::threshold(thr_cfg);
  const optimizer::CostWeights weights;
  optimizer::CandidateEvaluator evaluate =
      evaluate_in ? evaluate_in : optimizer::make_sim_evaluator(to_sim_config(cfg));

  RngStream rng(cfg.seed, seed_domain::optimizer, 0);
  const auto initial = optimizer::init_population(cfg.tunable, cfg.ga, rng);
  const auto res = optimizer::evolve(initial, cfg.tunable, cfg.ga, evaluate,
                                     thr_cfg, weights, rng);

  const json prov = provenance_json(cfg);
  const std::string trace_path = cfg.out + ".trace.csv";
  {
    auto f = open_out(trace_path);
    f << "# config: " << prov.dump() << "\n";
    f << "# seed: " << cfg.seed << "\n";
    f << "generation,total_cost,hardware_cost,constraint_term,rate,ci_half_width";
    for (ParamKind kind : kParamOrder) f << "," << analysis::param_name(kind);
    f << "\n" << std::setprecision(12);
    for (size_t g = 0; g < res.generations.size(); ++g) {
      const optimizer::Member& best = res.generations[g].front();
      f << g << "," << best.cost.total << "," << best.cost.h_c << ","
        << best.cost.constraint_term << "," << best.estimate.rate() << ","
        << best.estimate.ci_half_width();
      for (ParamKind kind : kParamOrder) f << "," << get_param(best.params, kind);
      f << "\n";
    }
    finish_write(f, trace_path);
  }

  // Re-check the GA winner at the refinement budget before refining it.
  // Evaluation index 2^33 cannot collide with the GA's indices (counted
  // from 0) or the local search's (counted from 2^32).
  const ErrorEstimate refined =
      evaluate(res.best, cfg.ga.local_search_rounds, std::uint64_t(1) << 33);
  TunableParams final_params = res.best;
  ErrorEstimate final_est = refined;
  CostReport final_cost =
      optimizer::total_cost(refined.rate(), res.best, cfg.tunable, thr_cfg, weights);
  int accepted_steps = 0;
  bool ls_ran = false;
  if (refined.rate() <= thr) {
    try {
      const auto ls = optimizer::local_search(res.best, cfg.tunable, cfg.ga,
                                              evaluate, thr_cfg, weights);
      final_params = ls.params;
      final_est = ls.estimate;
      final_cost = ls.cost;
      accepted_steps = ls.accepted_steps;
      ls_ran = true;
    } catch (const std::invalid_argument&) {
      // Borderline: the search's own start evaluation (a different random
      // stream) landed above the threshold. Keep the re-checked GA winner.
    }
  }
  const bool feasible = final_est.rate() <= thr;
  const double violation = std::max(0.0, final_est.rate() - thr);

  const std::string radar_path = cfg.out + ".radar.csv";
  {
    auto f = open_out(radar_path);
    f << "# config: " << prov.dump() << "\n";
    f << "# seed: " << cfg.seed << "\n";
    f << "param,baseline,improved,improvement_factor\n" << std::setprecision(12);
    for (size_t i = 0; i < kParamOrder.size(); ++i)
      f << analysis::param_name(kParamOrder[i]) << ","
        << get_param(cfg.tunable, kParamOrder[i]) << ","
        << get_param(final_params, kParamOrder[i]) << ","
        << final_cost.factors[i] << "\n";
    finish_write(f, radar_path);
  }

  json params_json;
  for (size_t i = 0; i < kParamOrder.size(); ++i) {
    const ParamKind kind = kParamOrder[i];
    params_json[analysis::param_name(kind)] = json{
        {"baseline", json_number(get_param(cfg.tunable, kind))},
        {"improved", json_number(get_param(final_params, kind))},
        {"improvement_factor", json_number(final_cost.factors[i])},
    };
  }
  const json report{
      {"command", "optimize"},
      {"config", prov},
      {"threshold", thr},
      {"feasible", feasible},
      {"violation", violation},
      {"local_search_ran", ls_ran},
      {"accepted_local_steps", accepted_steps},
      {"rounds", final_est.t},
      {"failures", final_est.w},
      {"rate", final_est.rate()},
      {"ci_half_width", final_est.ci_half_width()},
      {"rate_upper", final_est.upper()},
      {"hardware_cost", json_number(final_cost.h_c)},
      {"total_cost", json_number(final_cost.total)},
      {"generations", int(res.generations.size()) - 1},
      {"population", initial.size()},
      {"parameters", params_json},
  };
  write_text(cfg.out + ".report.json", report.dump(2) + "\n");

  out << std::setprecision(6) << "optimize: "
      << (feasible ? "feasible" : "INFEASIBLE") << " set, rate "
      << final_est.rate() << " +/- " << final_est.ci_half_width()
      << " (threshold " << thr << "), hardware cost " << final_cost.h_c
      << ", local steps " << accepted_steps << "\n";
  for (size_t i = 0; i < kParamOrder.size(); ++i)
    out << "  " << analysis::param_name(kParamOrder[i]) << ": "
        << get_param(cfg.tunable, kParamOrder[i]) << " -> "
        << get_param(final_params, kParamOrder[i]) << " (factor "
        << final_cost.factors[i] << ")\n";
  if (!feasible)
    out << "  constraint violated by " << violation << " above the threshold\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

struct FlagSet {
  CLI::Option* config = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* rounds = nullptr;
  CLI::Option* workers = nullptr;
  CLI::Option* out = nullptr;
  CLI::Option* param = nullptr;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"test-round simulator and hardware-requirements toolchain"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::int64_t rounds = 0;
  int workers = 0;
  std::string out_prefix;
  std::string param;

  auto add_common = [&](CLI::App* sub) {
    FlagSet flags;
    flags.config = sub->add_option("--config", config_path, "JSON config file");
    flags.seed = sub->add_option("--seed", seed, "master seed override");
    flags.rounds = sub->add_option("--rounds", rounds, "round count override");
    flags.workers = sub->add_option("--workers", workers,
                                    "worker count override (0 = all cores)")
                        ->envname("RVQ_WORKERS");
    flags.out = sub->add_option("--out", out_prefix, "output path prefix");
    return flags;
  };

  CLI::App* c_run = app.add_subcommand("run", "estimate the test-round error rate");
  FlagSet f_run = add_common(c_run);
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "find one parameter's minimal requirement");
  FlagSet f_sweep = add_common(c_sweep);
  f_sweep.param = c_sweep->add_option(
      "--param", param,
      "swept parameter: efficiency | sq_fidelity | entangling_fidelity | "
      "emission_fidelity | coherence");
  CLI::App* c_optimize = app.add_subcommand(
      "optimize", "search for a minimal-cost feasible improvement");
  FlagSet f_optimize = add_common(c_optimize);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  Mode mode = Mode::run;
  const FlagSet* flags = &f_run;
  if (app.got_subcommand(c_sweep)) {
    mode = Mode::sweep;
    flags = &f_sweep;
  } else if (app.got_subcommand(c_optimize)) {
    mode = Mode::optimize;
    flags = &f_optimize;
  }

  RunConfig cfg;
  try {
    if (flags->config->count() > 0) cfg = parse_config(config_path);
    cfg.mode = mode;
    if (flags->seed->count() > 0) cfg.seed = seed;
    if (flags->rounds->count() > 0) cfg.rounds = rounds;
    if (flags->workers->count() > 0) cfg.workers = workers;
    if (flags->out->count() > 0) cfg.out = out_prefix;
    if (flags->param && flags->param->count() > 0)
      cfg.sweep_param = analysis::parse_param(param);
    validate_config(cfg);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    switch (cfg.mode) {
      case Mode::run: return cmd_run(cfg, out);
      case Mode::sweep: return cmd_sweep(cfg, out);
      case Mode::optimize: return cmd_optimize(cfg, out);
    }
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "simulation error: " << e.what() << "\n";
    return kExitSim;
  }
}

}  // namespace rvq::cli
