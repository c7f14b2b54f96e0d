#pragma once

// Emulator evaluation: learning curves over training-set size with
// Student-t confidence intervals, one-parameter slice profiles, and a
// long-format input/output export for scatter-matrix plots.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "emuopt/dataset.hpp"
#include "emuopt/emulator.hpp"
#include "emuopt/error.hpp"

namespace emuopt {

struct Interval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +/- t_{n-1, (1+level)/2} * s / sqrt(n), with s the sample standard deviation.
inline Interval confidence_interval(const std::vector<double>& samples, double level = 0.95) {
  if (samples.size() < 2) throw ValidationError("confidence_interval needs at least 2 samples");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + 0.5 * level);
  return {mean, t * sd / std::sqrt(n)};
}

struct CurvePoint {
  std::size_t size = 0;
  std::vector<double> runs;  // nRMSE per run, in run order
  double mean = 0.0;
  double ci_half_width = 0.0;
};

struct LearningCurve {
  ModelKind kind = ModelKind::Linear;
  Metric target = Metric::Mean;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> points;
  std::vector<std::uint64_t> test_row_ids;
  std::vector<std::string> warnings;

  /// Smallest training size whose mean nRMSE is at or below `threshold`.
  std::optional<std::size_t> size_for_target(double threshold) const {
    for (const auto& p : points)
      if (p.mean <= threshold) return p.size;
    return std::nullopt;
  }

  const CurvePoint& at_size(std::size_t size) const {
    for (const auto& p : points)
      if (p.size == size) return p;
    throw ValidationError("no curve point at size " + std::to_string(size));
  }
};

inline const std::vector<std::size_t> kDefaultCurveSizes{25, 50, 100, 150, 200, 300, 500, 700};

/// Rows of the training pool used for (size, run): a prefix of a
/// permutation seeded by (seed, size, run).
inline std::vector<std::size_t> curve_subset(std::size_t pool, std::size_t size, std::size_t run, std::uint64_t seed) {
  std::vector<std::size_t> idx(pool);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, size, run));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Fits spec on random subsets of `train` and scores each fit on the fixed
/// `test` set. Cells run in parallel; results are placed by index.
inline LearningCurve learning_curve(const Dataset& train, const Dataset& test, const ModelSpec& spec,
                                    const std::vector<std::size_t>& sizes, std::size_t n_runs, std::uint64_t seed,
                                    unsigned jobs = effective_jobs()) {
  if (sizes.empty()) throw ValidationError("learning_curve: no training sizes");
  if (n_runs < 1) throw ValidationError("learning_curve: n_runs must be >= 1");
  if (test.empty()) throw ValidationError("learning_curve: empty test set");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] > train.size())
      throw ValidationError("learning_curve: size " + std::to_string(sizes[i]) + " exceeds training pool of " +
                            std::to_string(train.size()));
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ValidationError("learning_curve: sizes must be strictly increasing");
  }

  LearningCurve curve;
  curve.kind = spec.kind;
  curve.target = spec.target;
  curve.seed = seed;
  curve.test_row_ids = test.row_ids();
  curve.points.resize(sizes.size());
  std::vector<double> cells(sizes.size() * n_runs);
  parallel_for(
      cells.size(),
      [&](std::size_t c) {
        const std::size_t si = c / n_runs, run = c % n_runs;
        const Dataset sub = train.subset(curve_subset(train.size(), sizes[si], run, seed));
        ModelSpec s = spec;
        s.gpr.seed = derive_seed(spec.gpr.seed, sizes[si], run);
        s.forest.seed = derive_seed(spec.forest.seed, sizes[si], run);
        cells[c] = test_nrmse(fit_emulator(sub, s), test);
      },
      jobs);

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    CurvePoint& p = curve.points[si];
    p.size = sizes[si];
    p.runs.assign(cells.begin() + si * n_runs, cells.begin() + (si + 1) * n_runs);
    if (n_runs >= 2) {
      const Interval ci = confidence_interval(p.runs);
      p.mean = ci.mean;
      p.ci_half_width = ci.half_width;
    } else {
      p.mean = p.runs.front();
      p.ci_half_width = 0.0;
    }
  }
  if (n_runs < 2) curve.warnings.push_back("n_runs = 1: confidence interval reported as 0");
  return curve;
}

// ------------------------------------------------------------- slices ----

enum class SliceParameter { Dy, Dz };

inline SliceParameter parse_slice_parameter(const std::string& name) {
  if (name == "d_y" || name == "dy") return SliceParameter::Dy;
  if (name == "d_z" || name == "dz") return SliceParameter::Dz;
  throw ValidationError("unknown slice parameter '" + name + "' (expected d_y or d_z)");
}

inline ArrayConfig with_spacing(ArrayConfig c, SliceParameter p, double v) {
  (p == SliceParameter::Dy ? c.d_y : c.d_z) = v;
  c.validate();
  return c;
}

struct SlicePoint {
  double value = 0.0;
  double prediction_db = 0.0;
  std::optional<double> simulated_db;
};

/// Model predictions along one spacing parameter, others fixed at `base`.
inline std::vector<SlicePoint> slice_profile(const EmulatorModel& model, const ArrayConfig& base,
                                             const std::string& parameter, const std::vector<double>& grid) {
  const SliceParameter p = parse_slice_parameter(parameter);
  Eigen::MatrixXd x(grid.size(), kFeatureCount);
  for (std::size_t i = 0; i < grid.size(); ++i)
    x.row(i) = Dataset::feature_vector(with_spacing(base, p, grid[i])).transpose();
  const Eigen::VectorXd pred = model.predict(x);
  std::vector<SlicePoint> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = {grid[i], pred(i), std::nullopt};
  return out;
}

/// Attaches simulator samples at each slice point for visual comparison.
inline void attach_simulation(std::vector<SlicePoint>& slice, const ArrayConfig& base, const std::string& parameter,
                              Metric metric, const SimParams& params, unsigned jobs = effective_jobs()) {
  const SliceParameter p = parse_slice_parameter(parameter);
  parallel_for(
      slice.size(),
      [&](std::size_t i) {
        SimParams sp = params;
        sp.seed = derive_seed(params.seed, 0x511ceULL, i);
        slice[i].simulated_db = simulate(with_spacing(base, p, slice[i].value), sp)[static_cast<int>(metric)];
      },
      jobs);
}

// ----------------------------------------------------------- pairplot ----

struct PairplotRow {
  std::uint64_t row_id = 0;
  std::string input_name;
  double input_value = 0.0;
  std::string output_name;
  double output_value = 0.0;
};

/// One row per (sample, input, output) triple; names follow the dataset CSV schema.
inline std::vector<PairplotRow> pairplot_export(const Dataset& ds) {
  if (ds.empty()) throw ValidationError("pairplot_export: empty dataset");
  std::vector<PairplotRow> out;
  out.reserve(ds.size() * kFeatureCount * kTargetNames.size());
  for (const auto& r : ds.rows) {
    const Eigen::Vector4d f = Dataset::feature_vector(r.config);
    for (std::size_t i = 0; i < kFeatureCount; ++i)
      for (std::size_t o = 0; o < kTargetNames.size(); ++o)
        out.push_back({r.row_id, kFeatureNames[i], f(i), kTargetNames[o], r.metrics[o]});
  }
  return out;
}

}  // namespace emuopt
