#pragma once

// Configuration ingestion (JSON), orchestration of the three subcommands
// (run / sweep / optimize), and result persistence: JSON reports, CSV
// sweep/trace tables, and line-delimited round transcripts. Every output
// file embeds the resolved config and seed; the worker count is excluded
// from that provenance because results are worker-invariant by design.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "rvq/analysis.hpp"
#include "rvq/devices.hpp"
#include "rvq/optimizer.hpp"
#include "rvq/protocol.hpp"

namespace rvq::cli {

// Process exit codes. Config, simulation, and I/O failures are distinct so
// scripted callers can tell a bad input from a bad run.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSim = 3;
inline constexpr int kExitIo = 4;

// Malformed or out-of-domain configuration (file, flag, or field).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Output file could not be created or written.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mode { run, sweep, optimize };
const char* mode_name(Mode mode);
Mode parse_mode(const std::string& name);  // throws ConfigError

struct RunConfig {
  Mode mode = Mode::run;
  devices::FixedParams fixed;
  devices::TunableParams tunable;
  protocol::GraphSpec graph = protocol::GraphSpec::line5();
  protocol::ProtocolOptions options;
  std::int64_t rounds = 20000;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = all available cores
  std::string out = "rvq_out";  // output path prefix

  // sweep mode
  analysis::ParamKind sweep_param = analysis::ParamKind::entangling_fidelity;
  std::string sweep_oracle = "simulator";  // "simulator" | "linear" self-test
  analysis::RequirementBudget budget;

  // optimize mode
  optimizer::GAConfig ga;
};

bool operator==(const RunConfig& a, const RunConfig& b);
inline bool operator!=(const RunConfig& a, const RunConfig& b) {
  return !(a == b);
}

// Parse a JSON config file. Missing keys take the defaults above (an empty
// file yields RunConfig{} exactly); unknown keys and out-of-domain values
// are ConfigErrors that name the offending key path.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);  // same, from memory

// Canonical JSON for a config; parse_config_text(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

// Resolved worker count: cfg.workers, or hardware concurrency when 0.
int effective_workers(const RunConfig& cfg);

// The simulation slice of the config, with workers resolved.
analysis::SimConfig to_sim_config(const RunConfig& cfg);

// Subcommands. Each returns kExitOk, writes its files under `cfg.out`, and
// prints a short human summary to `out`; I/O problems throw IoError and
// simulation-side failures propagate whatever the library threw. The
// `evaluate` overrides exist for tests that substitute an analytic oracle
// for the round simulator.
int cmd_run(const RunConfig& cfg, std::ostream& out);
int cmd_sweep(const RunConfig& cfg, std::ostream& out,
              const analysis::RateEvaluator& evaluate = {});
int cmd_optimize(const RunConfig& cfg, std::ostream& out,
                 const optimizer::CandidateEvaluator& evaluate = {});

// Full command line: subcommand + flags (--config --seed --rounds --param
// --workers --out; RVQ_WORKERS overrides workers when the flag is absent).
// Returns a process exit code; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace rvq::cli
