#pragma once

// Uniform planar array (UPA) gain model: parabolic single-element pattern
// combined with a conjugate-steered array factor.
//
// Geometry: elements lie on the local y-z plane, boresight along +x.
// theta is the zenith angle (90 deg = horizon), phi the azimuth measured
// from boresight. Angles are degrees at the API boundary.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "emuopt/common.hpp"
#include "emuopt/error.hpp"

namespace emuopt {

inline constexpr int kDefaultTotalElements = 64;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Element pattern constants (3GPP single-element defaults).
struct ElementPattern {
  static constexpr double max_gain_dbi = 8.0;
  static constexpr double theta_3db_deg = 65.0;
  static constexpr double phi_3db_deg = 65.0;
  static constexpr double front_back_db = 30.0;   // A_m
  static constexpr double side_lobe_v_db = 30.0;  // SLA_v
};

/// Antenna array geometry. n_y * n_z must equal n_total; spacings are in
/// wavelengths.
struct ArrayConfig {
  int n_y = 8;
  int n_z = 8;
  double d_y = 0.5;
  double d_z = 0.5;
  int n_total = kDefaultTotalElements;
  double wavelength = kSpeedOfLight / 28e9;

  ArrayConfig() = default;
  ArrayConfig(int ny, double dy, double dz, int total = kDefaultTotalElements,
              double lambda = kSpeedOfLight / 28e9)
      : n_y(ny), n_z(ny > 0 ? total / ny : 0), d_y(dy), d_z(dz), n_total(total), wavelength(lambda) {
    validate();
  }

  /// Explicit-n_z form, used when the caller wants the product checked.
  static ArrayConfig with_shape(int ny, int nz, double dy, double dz,
                                double lambda = kSpeedOfLight / 28e9) {
    ArrayConfig c;
    c.n_y = ny;
    c.n_z = nz;
    c.d_y = dy;
    c.d_z = dz;
    c.n_total = ny * nz;
    c.wavelength = lambda;
    c.validate();
    return c;
  }

  int elements() const { return n_y * n_z; }

  void validate() const {
    if (n_total < 1) throw ValidationError("n_total must be >= 1");
    if (n_y < 1 || n_total % n_y != 0)
      throw ValidationError("n_y = " + std::to_string(n_y) + " is not a divisor of n_total = " +
                            std::to_string(n_total));
    if (n_z < 1 || n_y * n_z != n_total)
      throw ValidationError("n_y * n_z = " + std::to_string(n_y * n_z) + " != n_total = " +
                            std::to_string(n_total));
    if (!(d_y > 0.0) || !(d_z > 0.0) || !std::isfinite(d_y) || !std::isfinite(d_z))
      throw ValidationError("element spacings must be positive and finite");
    if (!(wavelength > 0.0)) throw ValidationError("wavelength must be positive");
  }

  bool operator==(const ArrayConfig&) const = default;
};

/// Positive divisors of n in increasing order.
inline std::vector<int> divisors(int n) {
  std::vector<int> out;
  for (int d = 1; d <= n; ++d)
    if (n % d == 0) out.push_back(d);
  return out;
}

/// Pointing direction in degrees. Construction normalizes phi into
/// [-180, 180] and clamps theta into [0, 180].
struct Direction {
  double theta = 90.0;
  double phi = 0.0;

  Direction() = default;
  Direction(double theta_deg, double phi_deg) : theta(theta_deg), phi(phi_deg) { normalize(); }

  void normalize() {
    if (!std::isfinite(theta) || !std::isfinite(phi)) throw ValidationError("non-finite direction");
    phi = std::remainder(phi, 360.0);
    if (phi == -180.0) phi = 180.0;
    theta = std::clamp(theta, 0.0, 180.0);
  }
};

/// Parabolic element pattern in dBi; range [G_max - A_m, G_max].
inline double element_gain_db(const Direction& dir) {
  using P = ElementPattern;
  const double v = 12.0 * std::pow((dir.theta - 90.0) / P::theta_3db_deg, 2);
  const double h = 12.0 * std::pow(dir.phi / P::phi_3db_deg, 2);
  const double a_v = -std::min(v, P::side_lobe_v_db);
  const double a_h = -std::min(h, P::front_back_db);
  return P::max_gain_dbi - std::min(-(a_v + a_h), P::front_back_db);
}

namespace detail {

// |sum_{k<n} exp(j*k*x)|^2 via the Dirichlet kernel sin^2(n x/2) / sin^2(x/2).
inline double linear_array_power(int n, double x) {
  x = std::remainder(x, 2.0 * std::numbers::pi);  // 2*pi periodic; keeps grating lobes well-conditioned
  const double s = std::sin(0.5 * x);
  if (s == 0.0) return static_cast<double>(n) * n;
  const double r = std::sin(0.5 * n * x) / s;
  return r * r;
}

}  // namespace detail

/// Un-normalized |AF|^2 for conjugate steering toward `steer`, observed
/// toward `obs`. Peak value is (n_y * n_z)^2 at obs == steer.
inline double array_factor_power(const ArrayConfig& config, const Direction& steer,
                                 const Direction& obs) {
  const double to = deg_to_rad(obs.theta), po = deg_to_rad(obs.phi);
  const double ts = deg_to_rad(steer.theta), ps = deg_to_rad(steer.phi);
  const double psi_z = std::cos(to) - std::cos(ts);
  const double psi_y = std::sin(to) * std::sin(po) - std::sin(ts) * std::sin(ps);
  const double two_pi = 2.0 * std::numbers::pi;
  // The double sum over (p, q) factors into a vertical and a horizontal ULA.
  return detail::linear_array_power(config.n_z, two_pi * config.d_z * psi_z) *
         detail::linear_array_power(config.n_y, two_pi * config.d_y * psi_y);
}

/// Element gain plus per-element-normalized array gain, in dB.
inline double total_gain_db(const ArrayConfig& config, const Direction& steer, const Direction& obs) {
  const double af = array_factor_power(config, steer, obs) / config.elements();
  return element_gain_db(obs) + 10.0 * std::log10(af);
}

}  // namespace emuopt
