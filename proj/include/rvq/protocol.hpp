#pragma once

// The test-round state machine: trap/dummy colouring, remote state
// preparation with cutoff handling, graph formation, the sequential
// measurement exchange, and trap verification — plus the classical
// computation-round helper formulas.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rvq/common.hpp"
#include "rvq/devices.hpp"
#include "rvq/simkernel.hpp"

namespace rvq::protocol {

struct GraphSpec {
  std::vector<int> nodes;
  std::vector<std::pair<int, int>> edges;
  int coloring = 2;  // number of colours in the principal colouring

  // The five-node line: nodes {0..4}, edges (0,1),(1,2),(2,3),(3,4), k=2.
  static GraphSpec line5();
  void validate() const;
  bool is_line5() const;
  std::vector<int> neighbors(int node) const;
};

// The two trap layouts of the line's 2-colouring: traps at {1,3} or at
// {0,2,4}; every trap is surrounded by dummies in both.
enum class TrapSet { odd, even };
bool is_trap(TrapSet set, int node);

struct RoundQubitRecord {
  bool trap = false;
  int theta_k = -1;  // trap: theta_v = theta_k * pi/4, 0..7
  int m = 0;         // client RSP outcome
  int r = -1;        // trap: hidden bit for delta_v
  int delta_k = 0;   // delta_v = delta_k * pi/4, 0..7
  int b = 0;         // server measurement outcome
  int d = -1;        // trap: XOR of neighbour dummy outcomes
};

struct RoundRecord {
  std::array<RoundQubitRecord, 5> qubits;
  TrapSet trap_set = TrapSet::odd;
  bool passed = false;
  std::int64_t rsp_attempts = 0;
  std::int64_t cutoff_discards = 0;
  micros wall_time = 0.0;
};

struct ProtocolOptions {
  // Main-text trap check b_v = r_v instead of the appendix form
  // b_v = r_v xor d_v; comparison mode only.
  bool strict_main_text_check = false;
  // One shared dephasing rate per preparation epoch instead of a fresh rate
  // per ion initialization.
  bool shared_dephasing_rate = false;
};

// Classical computation-round bookkeeping for a measurement pattern with
// flow: per-node angles and the X/Z dependency sets.
struct FlowSpec {
  std::vector<double> phi;
  std::vector<int> flow;                  // f(v), or -1 past the output
  std::vector<std::vector<int>> s_x;      // S_X,v node sets
  std::vector<std::vector<int>> s_z;      // S_Z,v node sets
  static FlowSpec line5(std::vector<double> angles);
};

// Uniformly pick one of the two trap layouts. Only the 5-node line is
// supported.
TrapSet choose_coloring(const GraphSpec& graph, RngStream& rng);

// delta_v for the server: traps get (theta + m*pi + r*pi) mod 2pi, dummies a
// uniform draw from {k*pi/4}. Grid-aligned inputs produce grid-exact output.
double compute_delta(bool trap, double theta, int m, int r, RngStream& rng);

// Appendix trap check: pass iff b = r xor (xor of neighbour dummy outcomes).
bool verify_trap(int b, int r, const std::vector<int>& dummy_neighbor_outcomes);

// phi_v' = (-1)^{s_x} * phi + s_z * pi.
double compute_phi_prime(double phi, int s_x, int s_z);

// Strict-majority vote over output bitstrings; empty optional when no value
// reaches multiplicity > n/2.
std::optional<std::vector<int>> majority_output(
    const std::vector<std::vector<int>>& outputs);

// Remote-preparation result for one node.
struct PrepResult {
  int m = 0;
  std::optional<double> theta;  // traps only
  std::int64_t attempts = 0;
};

// Prepare a single node end to end (init -> emit -> channel -> client
// measurement -> classical reply, looping on loss). `cutoff` matches the
// round-level discard window; a lone preparation cannot outlive it.
PrepResult rsp_prepare(int node, bool trap, devices::Server& server,
                       const devices::Client& client,
                       simkernel::EventQueue& kernel, micros cutoff,
                       RngStream& rng);

// Apply the CZ gate sequence along every edge, in listed order.
void form_graph(devices::Server& server, const GraphSpec& graph);

// One full test round: colouring, five preparations with cutoff discards,
// graph formation, sequential measurement exchange, verification.
RoundRecord run_test_round(const devices::FixedParams& fixed,
                           const devices::TunableParams& tunable,
                           const GraphSpec& graph,
                           const ProtocolOptions& options, RngStream& rng);

// Recompute the pass flag from the recorded bits alone (audit/replay).
bool reverify(const RoundRecord& record, const GraphSpec& graph,
              const ProtocolOptions& options);

// One-line transcript of a round, stable across platforms and worker counts.
std::string serialize_round(std::uint64_t round_index, const RoundRecord& record);

}  // namespace rvq::protocol
