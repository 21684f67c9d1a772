#pragma once

// Device models: the trapped-ion server (memory slots, wall-clock timing,
// per-ion dephasing clocks, native gates) and the measurement-only photonic
// client (waveplate chain, polarising beam splitter, two single-photon
// detectors with dark counts and crosstalk).

#include <array>
#include <optional>
#include <vector>

#include "rvq/common.hpp"
#include "rvq/noise.hpp"
#include "rvq/qcore.hpp"

namespace rvq::devices {

// Hardware parameters that stay fixed across every experiment.
// Durations carry their unit in the comment; *_ns fields are nanoseconds.
struct FixedParams {
  double channel_length = 50.0;        // km
  double fiber_loss = 0.2;             // dB/km
  double waveplate_error_prob = 0.001;
  double dark_count_prob = 0.0002;     // per detector per window
  double pbs_crosstalk = 0.0001;
  double rotation_duration = 12.0;     // µs, single-qubit gate
  double entangling_duration = 107.0;  // µs, Rxx gate
  double init_duration = 300.0;        // ns
  double emission_duration = 300.0;    // ns
  double readout_duration = 100.0;     // µs

  void validate() const;  // throws std::invalid_argument on violation
};

// Hardware parameters the requirement/optimization tooling varies.
// Defaults are the long-distance trapped-ion baseline.
struct TunableParams {
  double server_efficiency = 0.1325;
  double sq_gate_fidelity = 0.99;
  double entangling_gate_fidelity = 0.95;
  double emission_fidelity = 0.974;
  double coherence_time = 62.0;  // ms

  void validate() const;
  micros coherence_time_us() const { return coherence_time * 1000.0; }
};

// One ion memory slot and its dephasing bookkeeping.
struct IonSlot {
  noise::DephasingRate r;
  micros initialized_at = 0.0;
  micros last_advanced = 0.0;
  micros total_dephased = 0.0;  // sum of applied dephasing windows (audit)
  bool live = false;
};

// A physical waveplate: retardation delta (pi/2 quarter, pi half), fast-axis
// angle xi, plus the per-photon Gaussian placement errors.
struct WaveplateSpec {
  double delta = 0.0;
  double xi = 0.0;
  double delta_error = 0.0;
  double xi_error = 0.0;
};

enum class PhotonOutcome { bit0, bit1, lost, invalid };

// Result of a client-side photon measurement: the classical outcome plus the
// post-measurement state of the remaining qubits (photon traced out).
struct PhotonResult {
  PhotonOutcome outcome = PhotonOutcome::lost;
  qcore::DensityMatrix post;
};

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------
//
// The server owns the joint quantum state of its live ions and the in-flight
// photon. Internally the state is kept factorized into independent registers
// (subsystems that have never interacted); operations on disjoint registers
// commute, so this is exact and keeps the common RSP-attempt path on 4x4
// matrices. Dephasing is applied lazily per slot: advancing the clock only
// records time, and the accumulated Z rotation (fixed rate r per
// initialization, so windows compose additively) is flushed immediately
// before any operation that does not commute with it.
class Server {
 public:
  static constexpr int kNumSlots = 5;

  Server(const FixedParams& fixed, const TunableParams& tunable,
         bool shared_dephasing_rate = false);

  // Reset `slot` to |0> at time `now` (+ init duration), sampling a fresh
  // dephasing rate. In shared-rate mode the first initialization after a
  // full release samples the rate and subsequent inits reuse it.
  void init_ion(int slot, micros now, RngStream& rng);

  // Entangle `slot` (freshly initialized) with a new photon via the Werner
  // emission state. Returns a handle for the in-flight photon.
  int emit_photon(int slot, RngStream& rng);

  // Move the wall clock forward. Dephasing for the elapsed window is
  // recorded lazily per live slot.
  void advance_to(micros now);

  // Apply a native gate to slot indices `g.targets`: the clock advances by
  // the gate duration, pending dephasing is flushed on the targets, the
  // ideal unitary acts, then a depolarizing channel at the corresponding
  // gate fidelity.
  void apply_gate(const qcore::GateSpec& g);

  // Equatorial measurement of `slot` at angle delta after the readout
  // window. Frees the slot. Returns the outcome bit (0 = "+").
  int measure_ion(int slot, double delta, RngStream& rng);

  // --- photon hand-off to the client ---------------------------------------
  // Joint state of the register containing the in-flight photon, plus the
  // photon's qubit position within it.
  std::pair<qcore::DensityMatrix, int> joint_with_photon(int handle) const;
  // Install the client's post-measurement state (photon already traced out).
  void finish_photon(int handle, qcore::DensityMatrix post);
  // The photon was lost in the channel: trace it out.
  void discard_photon(int handle);

  // --- introspection --------------------------------------------------------
  micros now() const { return clock_; }
  const FixedParams& fixed() const { return fixed_; }
  const TunableParams& tunable() const { return tunable_; }
  const IonSlot& slot(int index) const { return slots_.at(index); }
  // Reduced single-qubit state of a live slot (other qubits traced out),
  // with pending dephasing flushed up to the current clock.
  qcore::DensityMatrix reduced_state(int slot);
  // Full joint state across every live qubit (test/debug aid; kron of the
  // internal registers, slots in ascending order, photon last).
  qcore::DensityMatrix full_state() const;
  void release_all();  // free every slot and drop the photon
  // Discard one stored ion (cutoff path): its qubit is traced out and the
  // slot freed. Does not touch the in-flight photon.
  void release_slot(int slot);

 private:
  struct Register {
    qcore::DensityMatrix state;
    std::vector<int> members;  // slot index, or kPhotonMember for the photon
  };
  static constexpr int kPhotonMember = -1;

  Register& register_of(int member);
  const Register& register_of(int member) const;
  int position_in(const Register& reg, int member) const;
  void remove_member(int member);
  void flush_dephasing(int slot);
  int merge_registers(int member_a, int member_b);  // returns register index

  FixedParams fixed_;
  TunableParams tunable_;
  bool shared_rate_;
  std::optional<noise::DephasingRate> shared_r_;  // shared-rate mode only
  micros clock_ = 0.0;
  std::array<IonSlot, kNumSlots> slots_;
  std::vector<Register> registers_;
  bool photon_live_ = false;
  int photon_handle_ = 0;
};

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------
class Client {
 public:
  explicit Client(const FixedParams& fixed);

  // Published waveplate-dial tuple (xi1, xi2, xi3) for an equatorial
  // measurement at angle theta.
  static std::array<double, 3> rotation_settings(double theta);

  // Physical plate chain in light order realizing the requested basis, with
  // per-photon Gaussian placement errors already drawn (two per plate, in
  // light order: delta error then axis error). For the equatorial basis the
  // dial tuple above maps onto quarter/half/quarter plates at axes
  // (xi1, xi3, xi2 - pi/4); see README for the calibration note. The
  // standard basis parks all three plates at axis 0.
  std::array<WaveplateSpec, 3> measurement_settings(const qcore::Basis& basis,
                                                    RngStream& rng) const;

  // Jones matrix U(delta', xi') with delta' = delta + delta_error and
  // xi' = xi + xi_error. Unitary for all arguments.
  static qcore::Matrix waveplate_unitary(const WaveplateSpec& w);

  // Measure the photon at `photon_qubit` of `joint`: plate chain, PBS with
  // crosstalk, two detectors with dark counts. The returned state has the
  // photon traced out of the Born-collapsed joint state.
  PhotonResult measure_photon(const qcore::DensityMatrix& joint,
                              int photon_qubit, const qcore::Basis& basis,
                              RngStream& rng) const;

  // Detection window with no photon present: dark counts alone can fake an
  // arrival. Returns the outcome bit if exactly one detector clicked.
  std::optional<int> dark_window(RngStream& rng) const;

  // Standard deviation of the per-photon plate errors, calibrated so the
  // mean wrong-outcome probability over theta in {k*pi/4} equals the
  // configured waveplate_error_prob.
  double sigma() const { return sigma_; }
  const FixedParams& fixed() const { return fixed_; }

  // Calibration helpers (used by the standalone tool and the tests).
  static double mean_wrong_outcome(double sigma);
  static double calibrate_sigma(double target_prob);

 private:
  FixedParams fixed_;
  double sigma_ = 0.0;
};

}  // namespace rvq::devices
