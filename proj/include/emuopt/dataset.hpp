#pragma once

// Training database: sampled antenna configurations paired with simulated
// metrics, CSV persistence, train/test partitioning and input scaling.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emuopt/antenna.hpp"
#include "emuopt/common.hpp"
#include "emuopt/error.hpp"
#include "emuopt/io.hpp"
#include "emuopt/simulator.hpp"

namespace emuopt {

inline constexpr std::size_t kFeatureCount = 4;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames{"n_y", "n_z", "d_y_wavelengths",
                                                                       "d_z_wavelengths"};
inline constexpr std::array<const char*, 4> kTargetNames{"sinr_mean_db", "sinr_p5_db", "sinr_p50_db",
                                                          "sinr_p95_db"};

struct SpacingBounds {
  double low = 0.2;
  double high = 1.0;

  void validate() const {
    if (!(low > 0.0) || !(high > low)) throw ValidationError("spacing bounds must satisfy 0 < low < high");
  }
  bool contains(double v) const { return v >= low && v <= high; }
  bool operator==(const SpacingBounds&) const = default;
};

struct DatasetRow {
  std::uint64_t row_id = 0;
  ArrayConfig config;
  MetricVector metrics;
  bool operator==(const DatasetRow&) const = default;
};

struct DatasetMeta {
  SimParams params;
  std::uint64_t sampling_seed = 0;
  SpacingBounds bounds;
  std::string simulator_version = kSimulatorVersion;
  bool operator==(const DatasetMeta&) const = default;
};

/// Simulator seed used for a given dataset row.
inline std::uint64_t row_seed(std::uint64_t base_seed, std::uint64_t row_id) { return derive_seed(base_seed, row_id); }

class Dataset {
public:
  std::vector<DatasetRow> rows;
  DatasetMeta meta;
  // Wall-clock seconds per simulator call. Not persisted with the CSV and
  // not part of equality: it is the only nondeterministic field.
  std::vector<double> call_seconds;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  /// Feature matrix (n_y, n_z, d_y, d_z), one row per sample.
  Eigen::MatrixXd features() const {
    Eigen::MatrixXd x(rows.size(), kFeatureCount);
    for (std::size_t i = 0; i < rows.size(); ++i) x.row(i) = feature_vector(rows[i].config).transpose();
    return x;
  }

  /// Targets in dB; column order follows Metric.
  Eigen::MatrixXd targets() const {
    Eigen::MatrixXd y(rows.size(), 4);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t m = 0; m < 4; ++m) y(i, m) = rows[i].metrics[m];
    return y;
  }

  Eigen::VectorXd target(Metric m) const { return targets().col(static_cast<int>(m)); }

  std::vector<std::uint64_t> row_ids() const {
    std::vector<std::uint64_t> ids;
    ids.reserve(rows.size());
    for (const auto& r : rows) ids.push_back(r.row_id);
    return ids;
  }

  /// Running total of simulator wall-clock time, one entry per row.
  std::vector<double> cumulative_seconds() const {
    std::vector<double> out(call_seconds.size());
    std::partial_sum(call_seconds.begin(), call_seconds.end(), out.begin());
    return out;
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset d;
    d.meta = meta;
    d.rows.reserve(indices.size());
    for (std::size_t i : indices) {
      if (i >= rows.size()) throw ValidationError("subset index out of range");
      d.rows.push_back(rows[i]);
      if (call_seconds.size() == rows.size()) d.call_seconds.push_back(call_seconds[i]);
    }
    return d;
  }

  void validate() const {
    std::set<std::uint64_t> seen;
    for (const auto& r : rows) {
      r.config.validate();
      if (!seen.insert(r.row_id).second)
        throw ValidationError("duplicated row id " + std::to_string(r.row_id));
    }
  }

  static Eigen::Vector4d feature_vector(const ArrayConfig& c) { return {double(c.n_y), double(c.n_z), c.d_y, c.d_z}; }

  bool operator==(const Dataset& o) const { return rows == o.rows && meta == o.meta; }
};

/// Draws n configurations: n_y uniform over the divisors of n_total (or
/// cycled through them when `stratified`), spacings uniform in `bounds`.
inline std::vector<ArrayConfig> sample_configs(std::size_t n, const SpacingBounds& bounds, std::uint64_t seed,
                                               bool stratified = false, int n_total = kDefaultTotalElements,
                                               double wavelength = kSpeedOfLight / 28e9) {
  if (n < 1) throw ValidationError("sample count must be >= 1");
  bounds.validate();
  const std::vector<int> divs = divisors(n_total);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, divs.size() - 1);
  std::uniform_real_distribution<double> spacing(bounds.low, bounds.high);
  std::vector<ArrayConfig> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int ny = stratified ? divs[i % divs.size()] : divs[pick(rng)];
    const double dy = spacing(rng);
    const double dz = spacing(rng);
    out.emplace_back(ny, dy, dz, n_total, wavelength);
  }
  if (stratified) std::shuffle(out.begin(), out.end(), rng);
  return out;
}

/// Runs the simulator once per configuration. Row i is simulated with seed
/// row_seed(params.seed, i); rows keep the input order.
inline Dataset build_dataset(const std::vector<ArrayConfig>& configs, const SimParams& params,
                             std::uint64_t sampling_seed = 0, const SpacingBounds& bounds = {},
                             unsigned jobs = effective_jobs()) {
  if (configs.empty()) throw ValidationError("build_dataset needs at least one configuration");
  params.validate();
  Dataset ds;
  ds.meta.params = params;
  ds.meta.sampling_seed = sampling_seed;
  ds.meta.bounds = bounds;
  ds.rows.resize(configs.size());
  ds.call_seconds.resize(configs.size());
  parallel_for(
      configs.size(),
      [&](std::size_t i) {
        SimParams p = params;
        p.seed = row_seed(params.seed, i);
        const auto t0 = std::chrono::steady_clock::now();
        try {
          ds.rows[i] = DatasetRow{i, configs[i], simulate(configs[i], p)};
        } catch (const std::exception& e) {
          const auto& c = configs[i];
          throw Error("simulation failed for row " + std::to_string(i) + " (n_y=" + std::to_string(c.n_y) +
                      ", n_z=" + std::to_string(c.n_z) + ", d_y=" + format_double(c.d_y) +
                      ", d_z=" + format_double(c.d_z) + "): " + e.what());
        }
        ds.call_seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      },
      jobs);
  return ds;
}

// ---------------------------------------------------------------- CSV ----

inline std::string csv_header() {
  std::string h;
  for (auto n : kFeatureNames) h += std::string(n) + ",";
  for (std::size_t i = 0; i < kTargetNames.size(); ++i) h += std::string(kTargetNames[i]) + (i + 1 < 4 ? "," : "");
  return h;
}

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta.json");
}

inline void to_json(json& j, const DatasetMeta& m) {
  j = json{{"params", m.params},
           {"sampling_seed", m.sampling_seed},
           {"spacing_bounds", {m.bounds.low, m.bounds.high}},
           {"simulator_version", m.simulator_version}};
}

inline void from_json(const json& j, DatasetMeta& m) {
  m.params = j.at("params").get<SimParams>();
  m.sampling_seed = j.at("sampling_seed").get<std::uint64_t>();
  const auto b = j.at("spacing_bounds");
  m.bounds = SpacingBounds{b.at(0).get<double>(), b.at(1).get<double>()};
  m.simulator_version = j.at("simulator_version").get<std::string>();
}

/// Writes the CSV and a `<path>.meta.json` sidecar holding the simulator
/// settings and row ids.
inline void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << csv_header() << "\n";
  for (const auto& r : ds.rows) {
    out << r.config.n_y << "," << r.config.n_z << "," << format_double(r.config.d_y) << ","
        << format_double(r.config.d_z);
    for (std::size_t m = 0; m < 4; ++m) out << "," << format_double(r.metrics[m]);
    out << "\n";
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");

  json meta = ds.meta;
  meta["format"] = "emuopt-dataset";
  meta["row_count"] = ds.rows.size();
  meta["n_total"] = ds.rows.empty() ? kDefaultTotalElements : ds.rows.front().config.n_total;
  meta["row_ids"] = ds.row_ids();
  std::ofstream mo(meta_path(path), std::ios::binary);
  if (!mo) throw Error("cannot open '" + meta_path(path).string() + "' for writing");
  mo << meta.dump(2) << "\n";
}

/// Loads a CSV written by save_csv. The sidecar is optional; without it,
/// default metadata and sequential row ids are used.
inline Dataset load_csv(const std::filesystem::path& path, int n_total = kDefaultTotalElements) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset '" + path.string() + "'");

  Dataset ds;
  std::vector<std::uint64_t> ids;
  if (std::filesystem::exists(meta_path(path))) {
    std::ifstream mi(meta_path(path));
    json meta;
    try {
      mi >> meta;
    } catch (const json::exception& e) {
      throw ParseError(std::string("metadata sidecar: ") + e.what(), 1);
    }
    ds.meta = meta.get<DatasetMeta>();
    n_total = meta.value("n_total", n_total);
    ids = meta.value("row_ids", std::vector<std::uint64_t>{});
  }
  const double lambda = ds.meta.params.wavelength();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header()) throw ParseError("unexpected header '" + line + "'", line_no);

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 8)
      throw ParseError("expected 8 fields, found " + std::to_string(fields.size()), line_no);
    std::array<double, 8> v{};
    for (std::size_t k = 0; k < 8; ++k) {
      if (!parse_double(fields[k], v[k])) {
        const std::string col = k < 4 ? kFeatureNames[k] : kTargetNames[k - 4];
        throw ParseError("non-numeric value '" + std::string(fields[k]) + "' in column " + col, line_no);
      }
    }
    if (v[0] != std::floor(v[0]) || v[1] != std::floor(v[1]))
      throw ParseError("n_y and n_z must be integers", line_no);
    const std::size_t index = ds.rows.size();
    const int ny = static_cast<int>(v[0]), nz = static_cast<int>(v[1]);
    if (ny * nz != n_total)
      throw ValidationError("row " + std::to_string(index) + " (line " + std::to_string(line_no) +
                            "): n_y * n_z = " + std::to_string(ny * nz) + " != " + std::to_string(n_total));
    DatasetRow row;
    row.row_id = index < ids.size() ? ids[index] : index;
    try {
      row.config = ArrayConfig::with_shape(ny, nz, v[2], v[3], lambda);
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(index) + " (line " + std::to_string(line_no) + "): " + e.what());
    }
    row.metrics = MetricVector{v[4], v[5], v[6], v[7]};
    ds.rows.push_back(row);
  }
  if (!ids.empty() && ids.size() != ds.rows.size())
    throw ParseError("sidecar lists " + std::to_string(ids.size()) + " row ids but CSV has " +
                         std::to_string(ds.rows.size()) + " rows",
                     line_no);
  ds.validate();
  return ds;
}

// -------------------------------------------------------------- split ----

struct SplitSpec {
  std::size_t test_size = 300;
  std::uint64_t split_seed = 0;
};

/// Random disjoint partition; both halves keep the original row order.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  if (spec.test_size == 0 || spec.test_size >= ds.size())
    throw ValidationError("test_size must lie in (0, " + std::to_string(ds.size()) + ")");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.split_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> test(order.begin(), order.begin() + spec.test_size);
  std::vector<std::size_t> train(order.begin() + spec.test_size, order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {ds.subset(train), ds.subset(test)};
}

// -------------------------------------------------------- standardizer --

/// Per-feature affine scaling learned from training rows. n_z is a function
/// of n_y, so the two scaled columns are correlated; downstream fits must
/// tolerate that.
class Standardizer {
public:
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw ValidationError("cannot fit a standardizer on zero rows");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double var = (x.col(c).array() - s.mean(c)).square().mean();
      if (!(var > 0.0)) throw ValidationError("feature column " + std::to_string(c) + " has zero variance");
      s.scale(c) = std::sqrt(var);
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    check(x);
    return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }

  Eigen::MatrixXd inverse(const Eigen::MatrixXd& z) const {
    check(z);
    return (z.array().rowwise() * scale.transpose().array()).rowwise() + mean.transpose().array();
  }

  bool operator==(const Standardizer& o) const { return mean == o.mean && scale == o.scale; }

private:
  void check(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size())
      throw ValidationError("feature dimension " + std::to_string(x.cols()) + " != " + std::to_string(mean.size()));
  }
};

inline Standardizer fit_standardizer(const Dataset& train) { return Standardizer::fit(train.features()); }

}  // namespace emuopt
