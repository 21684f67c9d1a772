#pragma once

#include <cstdint>
#include <random>

namespace rvq {

// Simulation times are microseconds throughout.
using micros = double;

inline constexpr double kPi = 3.14159265358979323846;

// splitmix64: cheap, well-mixed 64-bit hash used to derive independent
// seeds. Streams derived from (master, domain, index) are what make results
// byte-identical for any worker count: every round owns stream
// (master, domain, round_index) no matter which thread runs it.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t domain,
                                 std::uint64_t index) {
  return splitmix64(splitmix64(master ^ splitmix64(domain)) ^ index);
}

// Seed domains, one per independent consumer of randomness.
enum class seed_domain : std::uint64_t {
  round = 1,        // one stream per protocol round
  analysis = 2,     // sweep bookkeeping
  optimizer = 3,    // GA draws
  calibration = 4,  // tooling
  test = 5,         // unit-test streams
};

class RngStream {
 public:
  RngStream(std::uint64_t master, seed_domain domain, std::uint64_t index)
      : eng_(derive_seed(master, static_cast<std::uint64_t>(domain), index)) {}
  explicit RngStream(std::uint64_t raw_seed) : eng_(raw_seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  double gaussian(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace rvq
