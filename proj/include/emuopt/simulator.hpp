#pragma once

// Monte Carlo downlink SINR simulator for a UMi street-canyon deployment.
//
// One serving tri-sector site sits at the origin and serves UEs dropped
// uniformly over its 120-degree sector of radius cell_radius. n_interferers
// sites sit on a ring of radius 2 * cell_radius; each points its sector
// panel in a random azimuth and steers its beam toward a UE of its own.
// Every site uses the same ArrayConfig, which is the quantity under design.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emuopt/antenna.hpp"
#include "emuopt/common.hpp"
#include "emuopt/error.hpp"

namespace emuopt {

inline constexpr const char* kSimulatorVersion = "umi-upa-1";

struct SimParams {
  double carrier_frequency = 28e9;  // Hz
  double bandwidth = 400e6;         // Hz
  double tx_power_dbm = 40.0;
  double noise_figure_db = 9.0;
  int n_drops = 500;
  int n_ues_per_drop = 32;
  double cell_radius = 100.0;  // m
  int n_interferers = 6;
  std::uint64_t seed = 1;

  // Fixed geometry.
  double bs_height = 10.0;  // m
  double ut_height = 1.5;   // m
  double min_distance_2d = 10.0;
  double sector_width_deg = 120.0;

  // Toggles used by tests and sanity runs.
  bool shadowing = true;
  bool thermal_noise = true;

  double wavelength() const { return kSpeedOfLight / carrier_frequency; }

  void validate() const {
    if (!(carrier_frequency > 0) || !(bandwidth > 0) || !(cell_radius > 0))
      throw ValidationError("carrier_frequency, bandwidth and cell_radius must be positive");
    if (n_drops < 1 || n_ues_per_drop < 1)
      throw ValidationError("n_drops and n_ues_per_drop must be >= 1");
    if (n_interferers < 0) throw ValidationError("n_interferers must be >= 0");
    if (!(min_distance_2d > 0) || min_distance_2d >= cell_radius)
      throw ValidationError("min_distance_2d must lie in (0, cell_radius)");
    if (!(bs_height > 0) || !(ut_height > 0)) throw ValidationError("antenna heights must be positive");
    if (!(sector_width_deg > 0) || sector_width_deg > 360)
      throw ValidationError("sector_width_deg must lie in (0, 360]");
  }

  bool operator==(const SimParams&) const = default;
};

/// Network-level SINR statistics, all in dB. The mean is taken over linear
/// SINR values before conversion.
struct MetricVector {
  double sinr_mean = 0.0;
  double sinr_p5 = 0.0;
  double sinr_p50 = 0.0;
  double sinr_p95 = 0.0;

  static constexpr std::size_t size() { return 4; }

  double operator[](std::size_t i) const {
    switch (i) {
      case 0: return sinr_mean;
      case 1: return sinr_p5;
      case 2: return sinr_p50;
      case 3: return sinr_p95;
    }
    throw ValidationError("metric index out of range");
  }
  double& operator[](std::size_t i) {
    switch (i) {
      case 0: return sinr_mean;
      case 1: return sinr_p5;
      case 2: return sinr_p50;
      case 3: return sinr_p95;
    }
    throw ValidationError("metric index out of range");
  }

  bool operator==(const MetricVector&) const = default;
};

enum class Metric { Mean = 0, P5 = 1, P50 = 2, P95 = 3 };

inline constexpr std::array<Metric, 4> kAllMetrics{Metric::Mean, Metric::P5, Metric::P50, Metric::P95};

inline std::string metric_name(Metric m) {
  switch (m) {
    case Metric::Mean: return "sinr_mean";
    case Metric::P5: return "sinr_p5";
    case Metric::P50: return "sinr_p50";
    case Metric::P95: return "sinr_p95";
  }
  return "?";
}

inline Metric parse_metric(const std::string& name) {
  for (Metric m : kAllMetrics)
    if (metric_name(m) == name || metric_name(m) + "_db" == name) return m;
  throw ValidationError("unknown metric '" + name + "'");
}

struct Position {
  double x = 0, y = 0, z = 0;
  bool operator==(const Position&) const = default;
};

struct SiteSector {
  Position position;
  double boresight_deg = 0.0;  // azimuth of the panel normal
  bool operator==(const SiteSector&) const = default;
};

struct InterfererSite {
  SiteSector sector;
  Position served_ue;  // the interfering beam is steered here
  bool operator==(const InterfererSite&) const = default;
};

/// One Monte Carlo drop. Link index 0 is the serving link; link 1 + i is
/// interferer i. los[u][l] and shadow_z[u][l] hold the per-link LOS state
/// and standard-normal shadowing draw.
struct Scenario {
  SiteSector serving;
  std::vector<Position> ues;
  std::vector<InterfererSite> interferers;
  std::vector<std::vector<bool>> los;
  std::vector<std::vector<double>> shadow_z;

  bool operator==(const Scenario&) const = default;
};

inline double distance_2d(const Position& a, const Position& b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline double distance_3d(const Position& a, const Position& b) {
  return std::sqrt(std::pow(a.x - b.x, 2) + std::pow(a.y - b.y, 2) + std::pow(a.z - b.z, 2));
}

/// UMi LOS probability as a function of 2-D distance.
inline double los_probability(double d2d) {
  const double e = std::exp(-d2d / 36.0);
  return std::min(18.0 / d2d, 1.0) * (1.0 - e) + e;
}

inline constexpr double kShadowSigmaLos = 4.0;
inline constexpr double kShadowSigmaNlos = 7.82;

/// UMi street-canyon pathloss in dB. `shadow_z` is a standard-normal draw
/// scaled by the LOS/NLOS sigma when params.shadowing is set.
inline double pathloss_db(double d2d, double d3d, const SimParams& params, bool los, double shadow_z = 0.0) {
  if (!(d2d > 0.0) || !(d3d > 0.0)) throw ValidationError("pathloss distances must be positive");
  if (d3d < d2d) throw ValidationError("distance_3d must be >= distance_2d");
  const double f_ghz = params.carrier_frequency / 1e9;
  const double pl_los = 32.4 + 21.0 * std::log10(d3d) + 20.0 * std::log10(f_ghz);
  double pl = pl_los;
  if (!los) {
    const double pl_nlos = 35.3 * std::log10(d3d) + 22.4 + 21.3 * std::log10(f_ghz) - 0.3 * (params.ut_height - 1.5);
    pl = std::max(pl_los, pl_nlos);
  }
  if (params.shadowing) pl += (los ? kShadowSigmaLos : kShadowSigmaNlos) * shadow_z;
  return pl;
}

/// Direction of `target` in the local frame of `site`.
inline Direction local_direction(const SiteSector& site, const Position& target) {
  const double dx = target.x - site.position.x, dy = target.y - site.position.y, dz = target.z - site.position.z;
  const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double theta = r > 0 ? rad_to_deg(std::acos(std::clamp(dz / r, -1.0, 1.0))) : 90.0;
  const double phi = rad_to_deg(std::atan2(dy, dx)) - site.boresight_deg;
  return Direction(theta, phi);
}

inline double thermal_noise_dbm(const SimParams& params) {
  return -174.0 + 10.0 * std::log10(params.bandwidth) + params.noise_figure_db;
}

namespace detail {

inline Position drop_in_sector(std::mt19937_64& rng, const SiteSector& site, const SimParams& p) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double r2_min = p.min_distance_2d * p.min_distance_2d;
  const double r2_max = p.cell_radius * p.cell_radius;
  const double r = std::sqrt(r2_min + unit(rng) * (r2_max - r2_min));
  const double az = deg_to_rad(site.boresight_deg + (unit(rng) - 0.5) * p.sector_width_deg);
  return {site.position.x + r * std::cos(az), site.position.y + r * std::sin(az), p.ut_height};
}

}  // namespace detail

/// Deterministic in (params.seed, drop_index).
inline Scenario drop_scenario(const SimParams& params, std::uint64_t drop_index) {
  params.validate();
  std::mt19937_64 rng(derive_seed(params.seed, drop_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Scenario s;
  s.serving = SiteSector{{0.0, 0.0, params.bs_height}, 0.0};
  s.ues.reserve(params.n_ues_per_drop);
  for (int u = 0; u < params.n_ues_per_drop; ++u) s.ues.push_back(detail::drop_in_sector(rng, s.serving, params));

  const double ring = 2.0 * params.cell_radius;
  for (int i = 0; i < params.n_interferers; ++i) {
    const double a = 2.0 * std::numbers::pi * i / params.n_interferers;
    InterfererSite site;
    site.sector.position = {ring * std::cos(a), ring * std::sin(a), params.bs_height};
    site.sector.boresight_deg = -180.0 + 360.0 * unit(rng);
    site.served_ue = detail::drop_in_sector(rng, site.sector, params);
    s.interferers.push_back(site);
  }

  const std::size_t links = 1 + s.interferers.size();
  s.los.assign(s.ues.size(), std::vector<bool>(links));
  s.shadow_z.assign(s.ues.size(), std::vector<double>(links));
  for (std::size_t u = 0; u < s.ues.size(); ++u) {
    for (std::size_t l = 0; l < links; ++l) {
      const Position& from = l == 0 ? s.serving.position : s.interferers[l - 1].sector.position;
      s.los[u][l] = unit(rng) < los_probability(distance_2d(from, s.ues[u]));
      s.shadow_z[u][l] = normal(rng);
    }
  }
  return s;
}

namespace detail {

// Received power in mW from `site` steering toward `steer_at`, observed at `ue`.
inline double received_mw(const SiteSector& site, const Position& steer_at, const Position& ue,
                          const ArrayConfig& config, const SimParams& params, bool los, double shadow_z) {
  const double d2 = std::max(distance_2d(site.position, ue), 1e-3);
  const double d3 = std::max(distance_3d(site.position, ue), d2);
  const double pl = pathloss_db(d2, d3, params, los, shadow_z);
  const Direction steer = local_direction(site, steer_at);
  const Direction obs = local_direction(site, ue);
  const double gain_lin =
      db_to_linear(element_gain_db(obs)) * array_factor_power(config, steer, obs) / config.elements();
  return db_to_linear(params.tx_power_dbm - pl) * gain_lin;
}

}  // namespace detail

/// Per-UE SINR in dB for one drop.
inline std::vector<double> compute_link_sinr(const Scenario& scenario, const ArrayConfig& config,
                                             const SimParams& params) {
  config.validate();
  const double noise_mw = params.thermal_noise ? db_to_linear(thermal_noise_dbm(params)) : 0.0;
  std::vector<double> out;
  out.reserve(scenario.ues.size());
  for (std::size_t u = 0; u < scenario.ues.size(); ++u) {
    const Position& ue = scenario.ues[u];
    const double signal = detail::received_mw(scenario.serving, ue, ue, config, params, scenario.los[u][0],
                                              scenario.shadow_z[u][0]);
    double interference = 0.0;
    for (std::size_t i = 0; i < scenario.interferers.size(); ++i) {
      const auto& site = scenario.interferers[i];
      interference += detail::received_mw(site.sector, site.served_ue, ue, config, params, scenario.los[u][1 + i],
                                          scenario.shadow_z[u][1 + i]);
    }
    out.push_back(linear_to_db(signal / (interference + noise_mw)));
  }
  return out;
}

/// Type-7 percentile (linear interpolation between order statistics).
/// `sorted` must be ascending and non-empty; q in [0, 1].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ValidationError("percentile of empty sample");
  const double h = (sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

inline MetricVector summarize_sinr(std::vector<double> sinr_db) {
  if (sinr_db.empty()) throw ValidationError("no SINR samples");
  std::sort(sinr_db.begin(), sinr_db.end());
  double sum = 0.0;
  for (double v : sinr_db) sum += db_to_linear(v);
  MetricVector m;
  m.sinr_mean = linear_to_db(sum / sinr_db.size());
  m.sinr_p5 = percentile_sorted(sinr_db, 0.05);
  m.sinr_p50 = percentile_sorted(sinr_db, 0.50);
  m.sinr_p95 = percentile_sorted(sinr_db, 0.95);
  return m;
}

/// Aggregates all drops. Drops may run in parallel; each uses its own
/// substream, so the result does not depend on `jobs`.
inline MetricVector simulate(const ArrayConfig& config, const SimParams& params, unsigned jobs = 1) {
  params.validate();
  config.validate();
  std::vector<std::vector<double>> per_drop(params.n_drops);
  parallel_for(
      per_drop.size(),
      [&](std::size_t d) { per_drop[d] = compute_link_sinr(drop_scenario(params, d), config, params); }, jobs);
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(params.n_drops) * params.n_ues_per_drop);
  for (const auto& v : per_drop) all.insert(all.end(), v.begin(), v.end());
  return summarize_sinr(std::move(all));
}

}  // namespace emuopt
