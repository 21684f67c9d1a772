#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "rvq/common.hpp"

namespace rvq::qcore {

using Cx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Dense density matrix over 1..6 qubits. Qubit 0 is the leftmost tensor
// factor (most significant bit of the basis index). The class enforces its
// own invariants (Hermitian, unit trace, PSD) through check().
class DensityMatrix {
 public:
  // |0...0><0...0| on n qubits.
  explicit DensityMatrix(int num_qubits);
  // Adopt an existing matrix (must already satisfy the invariants).
  DensityMatrix(int num_qubits, Matrix m);

  int num_qubits() const { return num_qubits_; }
  int dim() const { return 1 << num_qubits_; }
  const Matrix& entries() const { return m_; }
  Matrix& entries() { return m_; }

  // Throws std::runtime_error when an invariant is violated.
  void check(double herm_tol = 1e-10, double trace_tol = 1e-9,
             double psd_tol = 1e-9) const;

 private:
  int num_qubits_;
  Matrix m_;
};

enum class GateKind { Rx, Ry, Rz, Rxx };

struct GateSpec {
  GateKind kind;
  double angle;              // radians
  std::vector<int> targets;  // 1 target (Rx/Ry/Rz) or 2 (Rxx)
};

// Measurement basis: standard {|0>,|1>} or equatorial
// |±_delta> = (|0> ± e^{i delta}|1>)/sqrt(2). Outcome bit 0 means "+".
struct Basis {
  static Basis standard() { return Basis{false, 0.0}; }
  static Basis equatorial(double delta) { return Basis{true, delta}; }
  bool is_equatorial;
  double delta;
};

DensityMatrix new_state(int num_qubits);

// rho -> U rho U^dagger with u embedded on `targets` (in target order: the
// first target is the most significant bit of u's index). Validates
// unitarity to 1e-9.
DensityMatrix apply_unitary(const DensityMatrix& state, const Matrix& u,
                            const std::vector<int>& targets);

// Native gate set: Rx(a)=exp(-iaX/2), Ry, Rz analogous,
// Rxx(a)=exp(-ia(X⊗X)/2).
Matrix gate_matrix(const GateSpec& g);

// Fixed CZ decomposition over the native set, for abstract qubits {0,1}:
// Rz(-pi/2) on both, Ry(-pi/2) on both, Rxx(pi/2), Ry(pi/2) on both.
// Composes to diag(1,1,1,-1) up to global phase.
std::vector<GateSpec> cz_sequence();
int cz_single_qubit_gate_count();  // 6, exposed for noise accounting

// Projective measurement of `target`. Returns outcome bit and the collapsed,
// renormalized state (same qubit count; use trace_out to drop the qubit).
std::pair<int, DensityMatrix> measure_basis(const DensityMatrix& state,
                                            int target, const Basis& basis,
                                            RngStream& rng);

// Born probability of outcome 0 for `basis` on `target` (no collapse).
double outcome_zero_probability(const DensityMatrix& state, int target,
                                const Basis& basis);

DensityMatrix trace_out(const DensityMatrix& state, int target);

// <psi| rho |psi>
double fidelity_with_pure(const DensityMatrix& state, const Vector& psi);

// Tensor product (a's qubits become the most significant).
DensityMatrix kron(const DensityMatrix& a, const DensityMatrix& b);

// Equality up to global phase, max-abs elementwise.
bool unitaries_equal_up_to_phase(const Matrix& a, const Matrix& b,
                                 double tol = 1e-10);

// Ket helpers used across modules and tests.
Vector ket_zero(int num_qubits);
Vector ket_plus_theta(double theta);        // (|0> + e^{i theta}|1>)/sqrt(2)
Vector ket_bit(int bit);                    // |0> or |1>

}  // namespace rvq::qcore
