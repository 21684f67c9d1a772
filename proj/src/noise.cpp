#include "rvq/noise.hpp"

#include <cmath>
#include <stdexcept>

namespace rvq::noise {

using qcore::DensityMatrix;
using qcore::Matrix;

DephasingRate sample_rate(RngStream& rng, micros now) {
  return DephasingRate{rng.gaussian(), now};
}

DensityMatrix dephase(const DensityMatrix& state, int target,
                      const DephasingRate& rate, micros elapsed,
                      micros coherence_time) {
  if (elapsed < 0) throw std::invalid_argument("dephase: negative elapsed");
  if (!(coherence_time > 0))
    throw std::invalid_argument("dephase: coherence_time must be positive");
  if (elapsed == 0 || rate.r == 0.0) return state;
  // exp(-i r (t/tau) sigma_z) is Rz with angle 2 r t / tau.
  const double angle = 2.0 * rate.r * (elapsed / coherence_time);
  return qcore::apply_unitary(
      state, qcore::gate_matrix({qcore::GateKind::Rz, angle, {0}}), {target});
}

double depolarizing_weight(double fidelity) { return (4.0 * fidelity - 1.0) / 3.0; }

DensityMatrix depolarize(const DensityMatrix& state,
                         const std::vector<int>& targets, double fidelity) {
  const int n = state.num_qubits();
  if (targets.empty() || targets.size() > 2)
    throw std::invalid_argument("depolarize: expected 1 or 2 targets");
  const int dt = 1 << targets.size();
  if (fidelity < 1.0 / dt - 1e-12 || fidelity > 1.0 + 1e-12)
    throw std::invalid_argument("depolarize: fidelity out of range");
  const double q = depolarizing_weight(fidelity);
  if (q >= 1.0) return state;

  int mask = 0;
  std::vector<int> bits;
  for (int t : targets) {
    if (t < 0 || t >= n) throw std::out_of_range("depolarize: bad target");
    const int bit = n - 1 - t;
    if (mask & (1 << bit))
      throw std::invalid_argument("depolarize: duplicate target");
    mask |= 1 << bit;
    bits.push_back(bit);
  }

  const int d = state.dim();
  // Enumerate the non-target ("rest") index space.
  std::vector<int> rest_idx;
  for (int i = 0; i < d; ++i)
    if ((i & mask) == 0) rest_idx.push_back(i);
  // Map a target-subspace label 0..dt-1 onto the full-index bits.
  auto lift = [&](int label) {
    int out = 0;
    for (size_t k = 0; k < bits.size(); ++k)
      if (label & (1 << (bits.size() - 1 - k))) out |= 1 << bits[k];
    return out;
  };

  Matrix out = q * state.entries();
  for (int ri : rest_idx)
    for (int rj : rest_idx) {
      qcore::Cx s{0, 0};
      for (int k = 0; k < dt; ++k) s += state.entries()(ri | lift(k), rj | lift(k));
      const qcore::Cx fill = (1.0 - q) / double(dt) * s;
      for (int a = 0; a < dt; ++a) out(ri | lift(a), rj | lift(a)) += fill;
    }
  return DensityMatrix(n, std::move(out));
}

DensityMatrix werner_emission(double fidelity) {
  if (fidelity < 0.25 - 1e-12 || fidelity > 1.0 + 1e-12)
    throw std::invalid_argument("werner_emission: fidelity out of range");
  const double p = depolarizing_weight(fidelity);
  qcore::Vector psi(4);
  psi << 1, 0, 0, 1;
  psi /= std::sqrt(2.0);
  Matrix m = p * (psi * psi.adjoint()).eval() +
             (1.0 - p) * 0.25 * Matrix::Identity(4, 4);
  return DensityMatrix(2, std::move(m));
}

}  // namespace rvq::noise
