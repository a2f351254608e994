// SPDX-License-Identifier: Apache-2.0
//
// Shared scalar/matrix aliases, unit conversions, and the deterministic
// RNG stream used across the library. Eigen is the only math dependency.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace eesim {

using Real = double;
using Complex = std::complex<Real>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Mat = Matrix<Real>;
using Vec = Vector<Real>;
using CMat = Matrix<Complex>;
using CVec = Vector<Complex>;
using CRowVec = RowVector<Complex>;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<Real, 6, 1>;
using MatInt = Eigen::MatrixXi;

inline constexpr Real kPi = std::numbers::pi_v<Real>;
inline constexpr Real kSpeedOfLight = 299792458.0;

inline Real db_to_linear(Real db) { return std::pow(10.0, db / 10.0); }
inline Real linear_to_db(Real x) { return 10.0 * std::log10(x); }
inline Real dbm_to_watt(Real dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline Real watt_to_dbm(Real w) { return 10.0 * std::log10(w) + 30.0; }

/// splitmix64 step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic seed for a named substream of `base`. Streams derived with
/// distinct (a, b) tags are statistically independent.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(a)) ^ splitmix64(~b));
}

/// Explicit-state RNG stream. All sampling helpers are stateless beyond the
/// mt19937_64 engine so a stream serializes to the engine state alone.
class RngStream {
 public:
  RngStream() : engine_(0x5eed) {}
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  Real uniform() { return static_cast<Real>(engine_() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  /// Integer uniform in {0, ..., n-1}.
  int uniform_int(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }

  /// Standard normal via Box-Muller; no cached spare, so the stream state is
  /// exactly the engine state.
  Real normal() {
    const Real u1 = 1.0 - uniform();  // (0, 1]
    const Real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Circularly-symmetric complex normal with unit variance.
  Complex cnormal() {
    const Real re = normal();
    const Real im = normal();
    return Complex(re * std::numbers::sqrt2_v<Real> / 2.0, im * std::numbers::sqrt2_v<Real> / 2.0);
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  bool operator==(const RngStream& o) const { return engine_ == o.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace eesim
