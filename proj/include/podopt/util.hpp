#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <string>

namespace podopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Formats a double with 17 significant digits (round-trip exact).
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Deterministic xoshiro256** generator; identical streams across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    // splitmix64 expansion of the seed into the state.
    std::uint64_t z = seed;
    for (auto& si : s_) {
      z += 0x9e3779b97f4a7c15ULL;
      std::uint64_t t = z;
      t = (t ^ (t >> 30)) * 0xbf58476d1ce4e5b9ULL;
      t = (t ^ (t >> 27)) * 0x94d049bb133111ebULL;
      si = t ^ (t >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [a,b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Standard normal via Box-Muller (always consumes two uniforms).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Mat normal_matrix(int rows, int cols) {
    Mat a(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) a(i, j) = normal();
    return a;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Random SPD matrix with eigenvalues in [lo, hi]; deterministic in the rng stream.
inline Mat random_spd(Rng& rng, int m, double lo = 0.5, double hi = 2.0) {
  Mat a = rng.normal_matrix(m, m);
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  Vec d(m);
  for (int i = 0; i < m; ++i) d(i) = rng.uniform(lo, hi);
  return q * d.asDiagonal() * q.transpose();
}

}  // namespace podopt
