#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace riglab {

// SplitMix64 (Steele/Lea/Flood). The whole state is one 64-bit word and the
// output function is three xorshifts and two multiplies, so seeded ensembles
// are reproducible across languages and platforms. All randomness in this
// library flows through this generator.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller. Consumes exactly two uniforms per call,
  /// no cached spare, so the draw sequence is position-independent.
  double normal() {
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;          // [0,1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = normal();
    return x;
  }

  /// i.i.d. standard normal entries, filled row by row.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  /// Diagonal entries log-uniform in [lo, hi], lo > 0.
  Eigen::VectorXd log_uniform_diagonal(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i)
      d[i] = std::exp(uniform(std::log(lo), std::log(hi)));
    return d;
  }

 private:
  std::uint64_t state_;
};

/// Per-case seed derivation for ensembles: master seed XOR case index.
inline std::uint64_t case_seed(std::uint64_t master, std::uint64_t index) {
  return master ^ index;
}

}  // namespace riglab
