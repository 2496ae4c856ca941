#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smlink {

using Complex = std::complex<double>;
using ComplexSeries = std::vector<Complex>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// One bit per element, each element 0 or 1, most significant bit first within a block.
using BitVector = std::vector<std::uint8_t>;

enum class Scheme { SM, SMX };

std::string toString(Scheme scheme);
Scheme schemeFromString(const std::string& text);

// Error hierarchy. Every failure the library reports derives from Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FramingError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class SyncRejected : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Random stream used by every stochastic operation. Streams are passed explicitly.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Substream for (master, a, b). The rule is mix64(mix64(mix64(master) ^ a) ^ b),
/// so substreams never depend on how work is scheduled.
inline Rng makeStream(std::uint64_t master, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(mix64(mix64(mix64(master) ^ a) ^ b));
}

/// Draws circularly-symmetric complex Gaussians, E|z|^2 = variance.
class ComplexGaussian {
 public:
  explicit ComplexGaussian(Rng& rng) : rng_(rng) {}

  Complex operator()(double variance = 1.0) {
    const double s = std::sqrt(variance / 2.0);
    const double re = normal_(rng_);
    const double im = normal_(rng_);
    return {s * re, s * im};
  }

 private:
  Rng& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline BitVector randomBits(Rng& rng, std::size_t count) {
  BitVector bits(count);
  std::uniform_int_distribution<int> coin(0, 1);
  for (auto& b : bits) b = static_cast<std::uint8_t>(coin(rng));
  return bits;
}

inline bool isPowerOfTwo(long long v) { return v > 0 && (v & (v - 1)) == 0; }

inline int log2Exact(long long v) {
  int r = 0;
  while ((1LL << r) < v) ++r;
  return r;
}

inline double dbToLinear(double db) { return std::pow(10.0, db / 10.0); }
inline double linearToDb(double lin) { return 10.0 * std::log10(lin); }

}  // namespace smlink
