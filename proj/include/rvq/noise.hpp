#pragma once

// Noise channels for the simulator: collective Gaussian dephasing with a
// per-initialization random rate, fidelity-parameterized depolarizing on one
// or two qubits, and Werner-state photon emission.

#include <vector>

#include "rvq/common.hpp"
#include "rvq/qcore.hpp"

namespace rvq::noise {

// A dephasing rate sampled when an ion is (re)initialized. The rate is a
// standard-normal draw; all phase accumulated by that ion until its next
// initialization uses this value.
struct DephasingRate {
  double r = 0.0;
  micros sampled_at = 0.0;
};

// Draw a fresh rate from the stream at simulation time `now`.
DephasingRate sample_rate(RngStream& rng, micros now);

// Apply exp(-i * r * (elapsed/coherence_time) * sigma_z) to `target`.
// The collective dephasing operator factorizes across qubits, so per-qubit
// application with the qubit's own rate is exact.
qcore::DensityMatrix dephase(const qcore::DensityMatrix& state, int target,
                             const DephasingRate& rate, micros elapsed,
                             micros coherence_time);

// rho -> q*rho + (1-q)*(I_d/d (x) rest) on the targeted subsystem, with
// q = (4F-1)/3 for both one- and two-qubit targets (the same mapping the
// hardware-cost model uses as its no-imperfection weight). Requires
// fidelity >= 1/d with d = 2^|targets| so q stays non-negative.
qcore::DensityMatrix depolarize(const qcore::DensityMatrix& state,
                                const std::vector<int>& targets,
                                double fidelity);

// Mixing weight used by depolarize and werner_emission.
double depolarizing_weight(double fidelity);

// Two-qubit ion (+) photon-polarization state emitted by the server:
// p*|psi><psi| + (1-p)*I/4 with |psi> = (|0H> + |1V>)/sqrt(2), H = 0, V = 1,
// and p = (4F-1)/3 so the fidelity to |psi> equals the argument.
// Qubit 0 is the ion, qubit 1 the photon.
qcore::DensityMatrix werner_emission(double fidelity);

}  // namespace rvq::noise
