#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bragg {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduced Planck constant (CODATA 2018, exact), J s.
inline constexpr double kHbar = 1.054571817e-34;
/// Mass of 87Rb, kg.
inline constexpr double kRb87Mass = 1.443160648e-25;
/// 87Rb D2 line vacuum wavelength, m.
inline constexpr double kRbD2Wavelength = 780.241209686e-9;
/// Standard gravity, used only to express accelerations in units of g.
inline constexpr double kStandardGravity = 9.80665;

// Error hierarchy. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class NumericalError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Independent 64-bit seed for sub-stream `stream` of a master seed
/// (splitmix64 finalizer over both words).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Atomic mass and laser wavenumber. The recoil frequency is always derived.
class AtomSpecies {
 public:
  AtomSpecies(double mass, double wavenumber, double hbar = kHbar);

  static AtomSpecies rubidium87();

  double mass() const { return mass_; }
  double wavenumber() const { return wavenumber_; }
  double hbar() const { return hbar_; }

  /// Rate of change of the dimensionless momentum detuning under a constant
  /// acceleration a: d(delta_p)/dt = M a / (hbar k).
  double momentum_rate(double acceleration) const {
    return mass_ * acceleration / (hbar_ * wavenumber_);
  }

 private:
  double mass_;
  double wavenumber_;
  double hbar_;
};

/// omega_R = hbar k^2 / (2 M), rad/s.
double recoil_frequency(const AtomSpecies& species);

/// delta_m = omega_R (2m + delta_p + delta / (4 omega_R))^2, rad/s.
double generalized_detuning(int m, double delta_p, double delta, const AtomSpecies& species);

/// Two-photon detuning that makes the arm states m = 0 and m = n degenerate:
/// delta_res = -4 omega_R (n + delta_p). Physical chirp directions map onto
/// this convention through a single global sign.
double resonant_detuning(int order, double delta_p, const AtomSpecies& species);

/// Truncated ladder of momentum states |p + 2 m hbar k>, m in [m_min, m_max].
class BlochBasis {
 public:
  BlochBasis(int order, int m_min, int m_max);

  /// Default truncation for an order-n transition: m in [-n, 2n].
  static BlochBasis for_order(int order);

  int order() const { return order_; }
  int m_min() const { return m_min_; }
  int m_max() const { return m_max_; }
  int dim() const { return m_max_ - m_min_ + 1; }
  bool contains(int m) const { return m >= m_min_ && m <= m_max_; }
  /// Matrix row/column of momentum index m.
  int index(int m) const;
  int momentum(int index) const { return m_min_ + index; }
  /// At least one buffer state beyond each arm.
  bool has_buffer() const { return dim() >= order_ + 3 && m_min_ < 0 && m_max_ > order_; }
  BlochBasis enlarged(int extra_per_side) const;

  bool operator==(const BlochBasis&) const = default;

 private:
  int order_;
  int m_min_;
  int m_max_;
};

}  // namespace bragg
