#pragma once

// JSON encodings of the value types shared across artifacts.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include <json.hpp>

#include "emuopt/antenna.hpp"
#include "emuopt/error.hpp"
#include "emuopt/simulator.hpp"

namespace emuopt {

using json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("cannot format number");
  return std::string(buf, end);
}

/// Strict parse: the whole field must be a finite number.
inline bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(out);
}

inline void to_json(json& j, const ArrayConfig& c) {
  j = json{{"n_y", c.n_y}, {"n_z", c.n_z}, {"d_y", c.d_y}, {"d_z", c.d_z}, {"n_total", c.n_total},
           {"wavelength", c.wavelength}};
}

inline void from_json(const json& j, ArrayConfig& c) {
  c.n_y = j.at("n_y").get<int>();
  c.n_z = j.at("n_z").get<int>();
  c.d_y = j.at("d_y").get<double>();
  c.d_z = j.at("d_z").get<double>();
  c.n_total = j.value("n_total", c.n_y * c.n_z);
  c.wavelength = j.value("wavelength", kSpeedOfLight / 28e9);
  c.validate();
}

inline void to_json(json& j, const MetricVector& m) {
  j = json{{"sinr_mean_db", m.sinr_mean}, {"sinr_p5_db", m.sinr_p5}, {"sinr_p50_db", m.sinr_p50},
           {"sinr_p95_db", m.sinr_p95}};
}

inline void from_json(const json& j, MetricVector& m) {
  m.sinr_mean = j.at("sinr_mean_db").get<double>();
  m.sinr_p5 = j.at("sinr_p5_db").get<double>();
  m.sinr_p50 = j.at("sinr_p50_db").get<double>();
  m.sinr_p95 = j.at("sinr_p95_db").get<double>();
}

inline void to_json(json& j, const SimParams& p) {
  j = json{{"carrier_frequency", p.carrier_frequency},
           {"bandwidth", p.bandwidth},
           {"tx_power_dbm", p.tx_power_dbm},
           {"noise_figure_db", p.noise_figure_db},
           {"n_drops", p.n_drops},
           {"n_ues_per_drop", p.n_ues_per_drop},
           {"cell_radius", p.cell_radius},
           {"n_interferers", p.n_interferers},
           {"seed", p.seed},
           {"bs_height", p.bs_height},
           {"ut_height", p.ut_height},
           {"min_distance_2d", p.min_distance_2d},
           {"sector_width_deg", p.sector_width_deg},
           {"shadowing", p.shadowing},
           {"thermal_noise", p.thermal_noise}};
}

/// Missing keys keep their defaults, so config files may be partial.
inline void from_json(const json& j, SimParams& p) {
  p.carrier_frequency = j.value("carrier_frequency", p.carrier_frequency);
  p.bandwidth = j.value("bandwidth", p.bandwidth);
  p.tx_power_dbm = j.value("tx_power_dbm", p.tx_power_dbm);
  p.noise_figure_db = j.value("noise_figure_db", p.noise_figure_db);
  p.n_drops = j.value("n_drops", p.n_drops);
  p.n_ues_per_drop = j.value("n_ues_per_drop", p.n_ues_per_drop);
  p.cell_radius = j.value("cell_radius", p.cell_radius);
  p.n_interferers = j.value("n_interferers", p.n_interferers);
  p.seed = j.value("seed", p.seed);
  p.bs_height = j.value("bs_height", p.bs_height);
  p.ut_height = j.value("ut_height", p.ut_height);
  p.min_distance_2d = j.value("min_distance_2d", p.min_distance_2d);
  p.sector_width_deg = j.value("sector_width_deg", p.sector_width_deg);
  p.shadowing = j.value("shadowing", p.shadowing);
  p.thermal_noise = j.value("thermal_noise", p.thermal_noise);
  p.validate();
}

}  // namespace emuopt
