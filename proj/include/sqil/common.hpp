#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sqil {

// Feature vector handed to function approximators (one-hot cell + normalized coords).
using Observation = Eigen::VectorXd;

// Probability vector over the action set; entries nonnegative, sums to 1.
using ActionDistribution = Eigen::VectorXd;

// Invalid configuration supplied by the caller (bad scenario, bad hyperparameters).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// API precondition violated (empty batch, stepping from an absorbing state, ...).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Numerical failure: non-finite values, solver did not converge.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged; carries the gradient step at which it happened.
struct TrainingError : std::runtime_error {
  TrainingError(const std::string& msg, int at_step)
      : std::runtime_error(msg + " (gradient step " + std::to_string(at_step) + ")"),
        step(at_step) {}
  int step;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seeded random stream. Sampling goes through explicit bit manipulation rather
// than std::*_distribution so that fixed-seed results are identical across
// standard library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Independent child stream; same (seed, tag) always yields the same stream.
  RandomStream child(std::uint64_t tag) const {
    return RandomStream(splitmix64(seed_ ^ splitmix64(tag + 1)));
  }

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n); unbiased via rejection.
  std::int64_t index(std::int64_t n) {
    if (n <= 0) throw ContractError("RandomStream::index: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::int64_t>(x % un);
  }

  // Draw an index according to a probability vector (assumed normalized).
  int sample(const Eigen::Ref<const Eigen::VectorXd>& probs) {
    const double u = uniform01();
    double cum = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return i;
    }
    return static_cast<int>(probs.size()) - 1;  // guard against rounding at the top end
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sqil
