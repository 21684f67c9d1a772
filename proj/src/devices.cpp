#include "rvq/devices.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace rvq::devices {

using qcore::Basis;
using qcore::Cx;
using qcore::DensityMatrix;
using qcore::GateKind;
using qcore::GateSpec;
using qcore::Matrix;
using qcore::Vector;

namespace {
constexpr double kNsToUs = 1e-3;

void require_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string(name) + " must be in [0,1]");
}
void require_nonneg(double d, const char* name) {
  if (!(d >= 0.0))
    throw std::invalid_argument(std::string(name) + " must be >= 0");
}
}  // namespace

void FixedParams::validate() const {
  require_nonneg(channel_length, "channel_length");
  require_nonneg(fiber_loss, "fiber_loss");
  require_prob(waveplate_error_prob, "waveplate_error_prob");
  require_prob(dark_count_prob, "dark_count_prob");
  require_prob(pbs_crosstalk, "pbs_crosstalk");
  require_nonneg(rotation_duration, "rotation_duration");
  require_nonneg(entangling_duration, "entangling_duration");
  require_nonneg(init_duration, "init_duration");
  require_nonneg(emission_duration, "emission_duration");
  require_nonneg(readout_duration, "readout_duration");
}

void TunableParams::validate() const {
  if (!(server_efficiency > 0.0 && server_efficiency <= 1.0))
    throw std::invalid_argument("server_efficiency must be in (0,1]");
  for (double f : {sq_gate_fidelity, entangling_gate_fidelity, emission_fidelity})
    if (!(f > 0.25 && f <= 1.0))
      throw std::invalid_argument("fidelities must be in (0.25,1]");
  if (!(coherence_time > 0.0))
    throw std::invalid_argument("coherence_time must be positive");
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

Server::Server(const FixedParams& fixed, const TunableParams& tunable,
               bool shared_dephasing_rate)
    : fixed_(fixed), tunable_(tunable), shared_rate_(shared_dephasing_rate) {
  fixed_.validate();
  tunable_.validate();
}

Server::Register& Server::register_of(int member) {
  for (auto& reg : registers_)
    if (std::find(reg.members.begin(), reg.members.end(), member) !=
        reg.members.end())
      return reg;
  throw std::logic_error("server: member has no register");
}

const Server::Register& Server::register_of(int member) const {
  return const_cast<Server*>(this)->register_of(member);
}

int Server::position_in(const Register& reg, int member) const {
  auto it = std::find(reg.members.begin(), reg.members.end(), member);
  return int(it - reg.members.begin());
}

void Server::remove_member(int member) {
  for (size_t i = 0; i < registers_.size(); ++i) {
    auto& reg = registers_[i];
    auto it = std::find(reg.members.begin(), reg.members.end(), member);
    if (it == reg.members.end()) continue;
    if (reg.members.size() == 1) {
      registers_.erase(registers_.begin() + i);
    } else {
      reg.state = trace_out(reg.state, int(it - reg.members.begin()));
      reg.members.erase(it);
    }
    return;
  }
}

void Server::init_ion(int slot, micros now, RngStream& rng) {
  if (slot < 0 || slot >= kNumSlots)
    throw std::out_of_range("init_ion: bad slot");
  if (now < clock_ - 1e-9)
    throw std::runtime_error("init_ion: clock regression");
  clock_ = now + fixed_.init_duration * kNsToUs;

  remove_member(slot);
  registers_.push_back({qcore::new_state(1), {slot}});

  auto& s = slots_[slot];
  if (shared_rate_) {
    if (!shared_r_) shared_r_ = noise::sample_rate(rng, clock_);
    s.r = *shared_r_;
  } else {
    s.r = noise::sample_rate(rng, clock_);
  }
  s.initialized_at = clock_;
  s.last_advanced = clock_;
  s.total_dephased = 0.0;
  s.live = true;
}

int Server::emit_photon(int slot, RngStream& rng) {
  (void)rng;  // the emission state is a deterministic density matrix
  if (slot < 0 || slot >= kNumSlots || !slots_[slot].live)
    throw std::runtime_error("emit_photon: slot not live");
  if (photon_live_)
    throw std::runtime_error("emit_photon: photon already in flight");
  clock_ += fixed_.emission_duration * kNsToUs;

  auto& s = slots_[slot];
  // The ion sat in |0> since initialization; dephasing is the identity on it,
  // so the window is charged to the audit without applying a unitary.
  s.total_dephased += clock_ - s.last_advanced;
  s.last_advanced = clock_;

  remove_member(slot);
  registers_.push_back(
      {noise::werner_emission(tunable_.emission_fidelity), {slot, kPhotonMember}});
  photon_live_ = true;
  return ++photon_handle_;
}

void Server::advance_to(micros now) {
  if (now < clock_ - 1e-9)
    throw std::runtime_error("advance_to: clock regression");
  clock_ = std::max(clock_, now);
}

void Server::flush_dephasing(int slot) {
  auto& s = slots_[slot];
  const micros window = clock_ - s.last_advanced;
  if (window <= 0.0) return;
  auto& reg = register_of(slot);
  reg.state = noise::dephase(reg.state, position_in(reg, slot), s.r, window,
                             tunable_.coherence_time_us());
  s.total_dephased += window;
  s.last_advanced = clock_;
}

int Server::merge_registers(int member_a, int member_b) {
  size_t ia = registers_.size(), ib = registers_.size();
  for (size_t i = 0; i < registers_.size(); ++i) {
    const auto& m = registers_[i].members;
    if (std::find(m.begin(), m.end(), member_a) != m.end()) ia = i;
    if (std::find(m.begin(), m.end(), member_b) != m.end()) ib = i;
  }
  if (ia == registers_.size() || ib == registers_.size())
    throw std::logic_error("merge_registers: member not found");
  if (ia == ib) return int(ia);
  std::vector<int> members = registers_[ia].members;
  members.insert(members.end(), registers_[ib].members.begin(),
                 registers_[ib].members.end());
  Register merged{qcore::kron(registers_[ia].state, registers_[ib].state),
                  std::move(members)};
  registers_[ia] = std::move(merged);
  registers_.erase(registers_.begin() + ib);
  return int(ia < ib ? ia : ia - 1);
}

void Server::apply_gate(const GateSpec& g) {
  if (g.targets.empty() || g.targets.size() > 2)
    throw std::invalid_argument("apply_gate: expected 1 or 2 targets");
  for (int t : g.targets)
    if (t < 0 || t >= kNumSlots || !slots_[t].live)
      throw std::runtime_error("apply_gate: slot not live");

  const bool entangling = g.kind == GateKind::Rxx;
  clock_ += entangling ? fixed_.entangling_duration : fixed_.rotation_duration;
  for (int t : g.targets) flush_dephasing(t);
  if (g.targets.size() == 2) merge_registers(g.targets[0], g.targets[1]);

  auto& reg = register_of(g.targets[0]);
  std::vector<int> positions;
  for (int t : g.targets) positions.push_back(position_in(reg, t));
  reg.state = apply_unitary(reg.state, gate_matrix(g), positions);

  const double fidelity =
      entangling ? tunable_.entangling_gate_fidelity : tunable_.sq_gate_fidelity;
  if (fidelity < 1.0) reg.state = noise::depolarize(reg.state, positions, fidelity);
}

int Server::measure_ion(int slot, double delta, RngStream& rng) {
  if (slot < 0 || slot >= kNumSlots || !slots_[slot].live)
    throw std::runtime_error("measure_ion: slot not live");
  clock_ += fixed_.readout_duration;
  flush_dephasing(slot);

  auto& reg = register_of(slot);
  const int pos = position_in(reg, slot);
  auto [bit, collapsed] =
      qcore::measure_basis(reg.state, pos, Basis::equatorial(delta), rng);
  if (reg.members.size() == 1) {
    for (size_t i = 0; i < registers_.size(); ++i)
      if (&registers_[i] == &reg) {
        registers_.erase(registers_.begin() + i);
        break;
      }
  } else {
    reg.state = trace_out(collapsed, pos);
    reg.members.erase(reg.members.begin() + pos);
  }
  slots_[slot].live = false;
  return bit;
}

std::pair<DensityMatrix, int> Server::joint_with_photon(int handle) const {
  if (!photon_live_ || handle != photon_handle_)
    throw std::runtime_error("joint_with_photon: no such photon");
  const auto& reg = register_of(kPhotonMember);
  return {reg.state, position_in(reg, kPhotonMember)};
}

void Server::finish_photon(int handle, DensityMatrix post) {
  if (!photon_live_ || handle != photon_handle_)
    throw std::runtime_error("finish_photon: no such photon");
  auto& reg = register_of(kPhotonMember);
  if (post.num_qubits() != int(reg.members.size()) - 1)
    throw std::invalid_argument("finish_photon: dimension mismatch");
  const int pos = position_in(reg, kPhotonMember);
  reg.state = std::move(post);
  reg.members.erase(reg.members.begin() + pos);
  photon_live_ = false;
}

void Server::discard_photon(int handle) {
  if (!photon_live_ || handle != photon_handle_)
    throw std::runtime_error("discard_photon: no such photon");
  remove_member(kPhotonMember);
  photon_live_ = false;
}

DensityMatrix Server::reduced_state(int slot) {
  if (slot < 0 || slot >= kNumSlots || !slots_[slot].live)
    throw std::runtime_error("reduced_state: slot not live");
  flush_dephasing(slot);
  auto reg = register_of(slot);  // copy
  int pos = position_in(reg, slot);
  while (reg.state.num_qubits() > 1) {
    const int victim = pos == 0 ? 1 : 0;
    reg.state = trace_out(reg.state, victim);
    reg.members.erase(reg.members.begin() + victim);
    pos = position_in(reg, slot);
  }
  return reg.state;
}

DensityMatrix Server::full_state() const {
  if (registers_.empty()) throw std::runtime_error("full_state: no live qubits");
  // Kron the registers together, then permute qubits into canonical order
  // (slots ascending, photon last).
  DensityMatrix joint = registers_[0].state;
  std::vector<int> members = registers_[0].members;
  for (size_t i = 1; i < registers_.size(); ++i) {
    joint = qcore::kron(joint, registers_[i].state);
    members.insert(members.end(), registers_[i].members.begin(),
                   registers_[i].members.end());
  }
  std::vector<int> order(members.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int ma = members[a] == kPhotonMember ? kNumSlots : members[a];
    const int mb = members[b] == kPhotonMember ? kNumSlots : members[b];
    return ma < mb;
  });
  const int n = joint.num_qubits();
  const int d = joint.dim();
  auto remap = [&](int idx) {
    int out = 0;
    for (int q = 0; q < n; ++q) {
      const int bit = (idx >> (n - 1 - order[q])) & 1;
      out |= bit << (n - 1 - q);
    }
    return out;
  };
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(remap(i), remap(j)) = joint.entries()(i, j);
  return DensityMatrix(n, std::move(m));
}

void Server::release_slot(int slot) {
  if (slot < 0 || slot >= kNumSlots || !slots_[slot].live)
    throw std::runtime_error("release_slot: slot not live");
  remove_member(slot);
  slots_[slot].live = false;
}

void Server::release_all() {
  registers_.clear();
  for (auto& s : slots_) s.live = false;
  photon_live_ = false;
  shared_r_.reset();
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

namespace {

// Plate chain (light order) that realizes an equatorial measurement at theta
// from the published dial tuple: quarter at xi1, half at xi3, quarter at
// xi2 - pi/4. Verified to send |+_theta> to the H port for every theta.
std::array<WaveplateSpec, 3> ideal_chain(const Basis& basis) {
  if (!basis.is_equatorial)
    return {WaveplateSpec{kPi / 2, 0.0}, WaveplateSpec{kPi, 0.0},
            WaveplateSpec{kPi / 2, 0.0}};
  const auto xi = Client::rotation_settings(basis.delta);
  return {WaveplateSpec{kPi / 2, xi[0]}, WaveplateSpec{kPi, xi[2]},
          WaveplateSpec{kPi / 2, xi[1] - kPi / 4}};
}

Matrix chain_unitary(const std::array<WaveplateSpec, 3>& plates) {
  return Client::waveplate_unitary(plates[2]) *
         Client::waveplate_unitary(plates[1]) *
         Client::waveplate_unitary(plates[0]);
}

double wrong_port_probability(double theta,
                              const std::array<WaveplateSpec, 3>& plates) {
  Vector in = qcore::ket_plus_theta(theta);
  Vector out = chain_unitary(plates) * in;
  return std::norm(out(1));
}

std::mutex g_sigma_mutex;
std::map<double, double>& sigma_cache() {
  static std::map<double, double> cache;
  return cache;
}

}  // namespace

Client::Client(const FixedParams& fixed) : fixed_(fixed) {
  fixed_.validate();
  if (fixed_.waveplate_error_prob > 0.0) {
    std::lock_guard<std::mutex> lock(g_sigma_mutex);
    auto& cache = sigma_cache();
    auto it = cache.find(fixed_.waveplate_error_prob);
    if (it == cache.end())
      it = cache.emplace(fixed_.waveplate_error_prob,
                         calibrate_sigma(fixed_.waveplate_error_prob)).first;
    sigma_ = it->second;
  }
}

std::array<double, 3> Client::rotation_settings(double theta) {
  return {0.0, theta / 2.0, theta / 4.0 - 3.0 * kPi / 4.0};
}

std::array<WaveplateSpec, 3> Client::measurement_settings(const Basis& basis,
                                                          RngStream& rng) const {
  auto plates = ideal_chain(basis);
  if (sigma_ > 0.0)
    for (auto& p : plates) {
      p.delta_error = sigma_ * rng.gaussian();
      p.xi_error = sigma_ * rng.gaussian();
    }
  return plates;
}

Matrix Client::waveplate_unitary(const WaveplateSpec& w) {
  const double delta = w.delta + w.delta_error;
  const double xi = w.xi + w.xi_error;
  const Cx phase = std::exp(Cx{0.0, -delta / 2.0});
  const Cx e = std::exp(Cx{0.0, delta});
  const double c = std::cos(xi), s = std::sin(xi);
  Matrix u(2, 2);
  u(0, 0) = phase * (c * c + e * s * s);
  u(0, 1) = phase * ((1.0 - e) * c * s);
  u(1, 0) = phase * ((1.0 - e) * c * s);
  u(1, 1) = phase * (s * s + e * c * c);
  return u;
}

PhotonResult Client::measure_photon(const DensityMatrix& joint, int photon_qubit,
                                    const Basis& basis, RngStream& rng) const {
  const auto plates = measurement_settings(basis, rng);
  auto rotated = apply_unitary(joint, chain_unitary(plates), {photon_qubit});
  auto [port, collapsed] =
      qcore::measure_basis(rotated, photon_qubit, Basis::standard(), rng);

  // Crosstalk misroutes the photon classically; the collapse above already
  // happened in the true basis.
  int routed = port;
  if (fixed_.pbs_crosstalk > 0.0 && rng.bernoulli(fixed_.pbs_crosstalk))
    routed ^= 1;
  // The routed detector clicks. A dark count on the other detector within
  // the same window makes the click pattern ambiguous.
  const bool other_dark =
      fixed_.dark_count_prob > 0.0 && rng.bernoulli(fixed_.dark_count_prob);

  return PhotonResult{other_dark    ? PhotonOutcome::invalid
                      : routed == 0 ? PhotonOutcome::bit0
                                    : PhotonOutcome::bit1,
                      trace_out(collapsed, photon_qubit)};
}

std::optional<int> Client::dark_window(RngStream& rng) const {
  const bool d0 = fixed_.dark_count_prob > 0.0 && rng.bernoulli(fixed_.dark_count_prob);
  const bool d1 = fixed_.dark_count_prob > 0.0 && rng.bernoulli(fixed_.dark_count_prob);
  if (d0 == d1) return std::nullopt;  // no click or double click
  return d0 ? 0 : 1;
}

double Client::mean_wrong_outcome(double sigma) {
  if (sigma <= 0.0) return 0.0;
  // Five-node Gauss-Hermite quadrature per error dimension (six iid normal
  // errors: retardation + axis for each of three plates), averaged over the
  // eight protocol angles.
  static const double nodes[5] = {-2.0201828704560856, -0.9585724646138185, 0.0,
                                  0.9585724646138185, 2.0201828704560856};
  static const double weights[5] = {0.019953242059045913, 0.3936193231522412,
                                    0.9453087204829419, 0.3936193231522412,
                                    0.019953242059045913};
  const double sqrt_pi = std::sqrt(kPi);

  double theta_mean = 0.0;
  for (int k = 0; k < 8; ++k) {
    const double theta = k * kPi / 4.0;
    const auto base = ideal_chain(Basis::equatorial(theta));
    double acc = 0.0;
    int idx[6] = {0, 0, 0, 0, 0, 0};
    while (true) {
      auto plates = base;
      double weight = 1.0;
      for (int j = 0; j < 6; ++j) {
        const double err = std::sqrt(2.0) * sigma * nodes[idx[j]];
        weight *= weights[idx[j]] / sqrt_pi;
        if (j % 2 == 0)
          plates[j / 2].delta_error = err;
        else
          plates[j / 2].xi_error = err;
      }
      acc += weight * wrong_port_probability(theta, plates);
      int j = 0;
      for (; j < 6; ++j) {
        if (++idx[j] < 5) break;
        idx[j] = 0;
      }
      if (j == 6) break;
    }
    theta_mean += acc;
  }
  return theta_mean / 8.0;
}

double Client::calibrate_sigma(double target_prob) {
  if (target_prob <= 0.0) return 0.0;
  double lo = 0.0, hi = 0.05;
  while (mean_wrong_outcome(hi) < target_prob) {
    hi *= 2.0;
    if (hi > 4.0)
      throw std::runtime_error("calibrate_sigma: target out of reach");
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_wrong_outcome(mid) < target_prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace rvq::devices
