#pragma once

// Constrained gradient-free search over an emulator.
//
// The discrete dimension (n_y, a divisor of n_total) is enumerated; for each
// divisor, differential evolution (rand/1/bin) searches the (d_y, d_z) box.
// Constraints enter as a static quadratic penalty on linear-unit outputs:
//   fitness = objective - w * sum_k max(0, violation_k)^2
// Feasibility of the returned point is checked on the unpenalized outputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "emuopt/dataset.hpp"
#include "emuopt/emulator.hpp"
#include "emuopt/error.hpp"
#include "emuopt/simulator.hpp"

namespace emuopt {

enum class Comparator { Greater, Less };

struct Constraint {
  Metric metric = Metric::P5;
  Comparator comparator = Comparator::Greater;
  double threshold_db = 6.0;

  double threshold_linear() const { return db_to_linear(threshold_db); }

  /// Positive amount (linear units) by which `value_linear` misses the threshold.
  double violation_linear(double value_linear) const {
    const double t = threshold_linear();
    return comparator == Comparator::Greater ? std::max(0.0, t - value_linear) : std::max(0.0, value_linear - t);
  }
  bool satisfied_db(double value_db) const {
    return comparator == Comparator::Greater ? value_db > threshold_db : value_db < threshold_db;
  }
  bool operator==(const Constraint&) const = default;
};

struct ObjectiveSpec {
  Metric objective = Metric::Mean;
  std::vector<Constraint> constraints{Constraint{}};
  double penalty_weight = 1e6;

  std::vector<Metric> metrics() const {
    std::vector<Metric> m{objective};
    for (const auto& c : constraints)
      if (std::find(m.begin(), m.end(), c.metric) == m.end()) m.push_back(c.metric);
    return m;
  }
  void validate() const {
    if (!(penalty_weight > 0)) throw ValidationError("penalty weight must be positive");
  }
};

struct SearchSpace {
  std::vector<int> divisors = emuopt::divisors(kDefaultTotalElements);
  SpacingBounds d_y;
  SpacingBounds d_z;
  int n_total = kDefaultTotalElements;
  double wavelength = kSpeedOfLight / 28e9;

  /// Space matching a dataset's sampling support.
  static SearchSpace from_dataset(const Dataset& ds) {
    SearchSpace s;
    s.n_total = ds.empty() ? kDefaultTotalElements : ds.rows.front().config.n_total;
    s.divisors = emuopt::divisors(s.n_total);
    s.d_y = s.d_z = ds.meta.bounds;
    s.wavelength = ds.meta.params.wavelength();
    return s;
  }

  void validate() const {
    d_y.validate();
    d_z.validate();
    if (divisors.empty()) throw ValidationError("search space has no divisors");
    for (int d : divisors)
      if (d < 1 || n_total % d != 0) throw ValidationError("n_y = " + std::to_string(d) + " does not divide n_total");
  }

  bool contains(const ArrayConfig& c) const {
    return std::find(divisors.begin(), divisors.end(), c.n_y) != divisors.end() && c.n_y * c.n_z == n_total &&
           d_y.contains(c.d_y) && d_z.contains(c.d_z);
  }

  ArrayConfig config(int ny, double dy, double dz) const { return ArrayConfig(ny, dy, dz, n_total, wavelength); }
};

/// Anything that maps raw feature rows to linear-unit predictions per metric.
template <typename S>
concept Surrogate = requires(const S& s, Metric m, const Eigen::MatrixXd& x) {
  { s.has(m) } -> std::convertible_to<bool>;
  { s.predict_linear(m, x) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Fitted emulators keyed by the metric they predict.
class EmulatorSet {
public:
  std::map<Metric, EmulatorModel> models;

  bool has(Metric m) const { return models.count(m) > 0; }
  const EmulatorModel& at(Metric m) const {
    auto it = models.find(m);
    if (it == models.end()) throw ValidationError("no emulator fitted for " + metric_name(m));
    return it->second;
  }
  Eigen::VectorXd predict_linear(Metric m, const Eigen::MatrixXd& x) const { return at(m).predict_linear(x); }
};

struct DeParams {
  int population = 30;
  int generations = 200;
  double mutation = 0.7;   // F
  double crossover = 0.9;  // CR
  void validate() const {
    if (population < 4) throw ValidationError("DE population must be >= 4");
    if (generations < 0) throw ValidationError("DE generations must be >= 0");
    if (!(mutation > 0 && mutation <= 2)) throw ValidationError("DE mutation factor must lie in (0, 2]");
    if (!(crossover >= 0 && crossover <= 1)) throw ValidationError("DE crossover rate must lie in [0, 1]");
  }
};

/// Evaluated candidate.
struct Candidate {
  ArrayConfig config;
  double fitness = -std::numeric_limits<double>::infinity();
  double objective_linear = 0.0;
  double violation_linear = 0.0;  // sum of squared violations
  bool feasible = false;
};

namespace detail {

template <Surrogate S>
class Scorer {
public:
  Scorer(const S& models, const ObjectiveSpec& spec) : models_(models), spec_(spec) {
    for (Metric m : spec.metrics())
      if (!models.has(m)) throw ValidationError("objective references " + metric_name(m) + " but no emulator is fitted");
  }

  /// Scores a batch of (d_y, d_z) points for one divisor.
  std::vector<Candidate> score(const SearchSpace& space, int ny, const std::vector<Eigen::Vector2d>& points) {
    Eigen::MatrixXd x(points.size(), kFeatureCount);
    std::vector<ArrayConfig> configs;
    configs.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      configs.push_back(space.config(ny, points[i](0), points[i](1)));
      x.row(i) = Dataset::feature_vector(configs.back()).transpose();
    }
    const Eigen::VectorXd obj = models_.predict_linear(spec_.objective, x);
    std::vector<Eigen::VectorXd> cons;
    for (const auto& c : spec_.constraints) cons.push_back(models_.predict_linear(c.metric, x));
    evaluations_ += points.size();

    std::vector<Candidate> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      Candidate& c = out[i];
      c.config = configs[i];
      c.objective_linear = obj(i);
      double pen = 0.0;
      bool feasible = true;
      for (std::size_t k = 0; k < spec_.constraints.size(); ++k) {
        const double v = spec_.constraints[k].violation_linear(cons[k](i));
        pen += v * v;
        const double value_db = cons[k](i) > 0 ? linear_to_db(cons[k](i)) : -std::numeric_limits<double>::infinity();
        feasible = feasible && spec_.constraints[k].satisfied_db(value_db);
      }
      c.violation_linear = pen;
      c.feasible = feasible;
      c.fitness = obj(i) - spec_.penalty_weight * pen;
    }
    return out;
  }

  std::size_t evaluations() const { return evaluations_; }

private:
  const S& models_;
  const ObjectiveSpec& spec_;
  std::size_t evaluations_ = 0;
};

// Candidate ordering used everywhere a "best" is picked: feasible beats
// infeasible, then higher fitness, then smaller n_y for determinism.
inline bool better(const Candidate& a, const Candidate& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  if (a.config.n_y != b.config.n_y) return a.config.n_y < b.config.n_y;
  return std::tie(a.config.d_y, a.config.d_z) < std::tie(b.config.d_y, b.config.d_z);
}

}  // namespace detail

struct DivisorSearch {
  int n_y = 0;
  Candidate best;
  std::size_t evaluations = 0;
};

struct OptimizationResult {
  ArrayConfig best;
  double fitness = 0.0;
  bool feasible = false;
  double max_violation_db = 0.0;  // largest constraint shortfall at `best`, 0 when feasible
  std::map<Metric, double> predicted_db;
  std::optional<MetricVector> validated;
  std::size_t emulator_evaluations = 0;
  std::size_t simulator_calls = 0;  // rows in the training database
  double emulator_seconds = 0.0;    // wall-clock spent in the search; not serialized
  std::vector<DivisorSearch> per_divisor;
};

namespace detail {

template <Surrogate S>
DivisorSearch differential_evolution(const S& models, const ObjectiveSpec& spec, const SearchSpace& space, int ny,
                                     const DeParams& de, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(ny)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Vector2d lo(space.d_y.low, space.d_z.low), hi(space.d_y.high, space.d_z.high);
  Scorer<S> scorer(models, spec);

  const int np = de.population;
  std::vector<Eigen::Vector2d> pop(np);
  for (auto& p : pop)
    for (int k = 0; k < 2; ++k) p(k) = lo(k) + unit(rng) * (hi(k) - lo(k));
  std::vector<Candidate> scored = scorer.score(space, ny, pop);
  Candidate best = *std::min_element(scored.begin(), scored.end(), better);

  std::uniform_int_distribution<int> pick(0, np - 1);
  std::uniform_int_distribution<int> pick_dim(0, 1);
  std::vector<Eigen::Vector2d> trial(np);
  for (int g = 0; g < de.generations; ++g) {
    for (int i = 0; i < np; ++i) {
      int r1, r2, r3;
      do r1 = pick(rng); while (r1 == i);
      do r2 = pick(rng); while (r2 == i || r2 == r1);
      do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
      const Eigen::Vector2d mutant = pop[r1] + de.mutation * (pop[r2] - pop[r3]);
      const int forced = pick_dim(rng);
      for (int k = 0; k < 2; ++k) {
        const bool take = k == forced || unit(rng) < de.crossover;
        trial[i](k) = std::clamp(take ? mutant(k) : pop[i](k), lo(k), hi(k));
      }
    }
    const std::vector<Candidate> ts = scorer.score(space, ny, trial);
    for (int i = 0; i < np; ++i) {
      if (ts[i].fitness >= scored[i].fitness) {
        pop[i] = trial[i];
        scored[i] = ts[i];
      }
      if (better(ts[i], best)) best = ts[i];
    }
  }
  return {ny, best, scorer.evaluations()};
}

template <Surrogate S>
void fill_predictions(const S& models, OptimizationResult& r) {
  const Eigen::MatrixXd x = Dataset::feature_vector(r.best).transpose();
  for (Metric m : kAllMetrics) {
    if (!models.has(m)) continue;
    const double v = models.predict_linear(m, x)(0);
    r.predicted_db[m] = v > 0 ? linear_to_db(v) : -std::numeric_limits<double>::infinity();
  }
}

inline double max_violation_db(const ObjectiveSpec& spec, const std::map<Metric, double>& predicted_db) {
  double worst = 0.0;
  for (const auto& c : spec.constraints) {
    auto it = predicted_db.find(c.metric);
    if (it == predicted_db.end()) continue;
    const double gap = c.comparator == Comparator::Greater ? c.threshold_db - it->second : it->second - c.threshold_db;
    worst = std::max(worst, gap);
  }
  return worst;
}

}  // namespace detail

/// Global search over the emulator. Divisors are searched independently
/// (optionally in parallel) with per-divisor seeds, so the result does not
/// depend on their enumeration order.
template <Surrogate S>
OptimizationResult optimize(const S& models, const ObjectiveSpec& spec, const SearchSpace& space, std::uint64_t seed,
                            const DeParams& de = {}, unsigned jobs = 1) {
  spec.validate();
  space.validate();
  de.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<DivisorSearch> searches(space.divisors.size());
  parallel_for(
      searches.size(),
      [&](std::size_t i) { searches[i] = detail::differential_evolution(models, spec, space, space.divisors[i], de, seed); },
      jobs);
  std::sort(searches.begin(), searches.end(), [](const auto& a, const auto& b) { return a.n_y < b.n_y; });

  OptimizationResult r;
  r.emulator_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Candidate* best = nullptr;
  for (const auto& s : searches) {
    r.emulator_evaluations += s.evaluations;
    if (!best || detail::better(s.best, *best)) best = &s.best;
  }
  r.best = best->config;
  r.fitness = best->fitness;
  r.feasible = best->feasible;
  r.per_divisor = std::move(searches);
  detail::fill_predictions(models, r);
  r.max_violation_db = r.feasible ? 0.0 : detail::max_violation_db(spec, r.predicted_db);
  return r;
}

struct GridResult {
  Candidate best;
  std::size_t evaluations = 0;
};

/// Exhaustive search over divisors x resolution x resolution grid points
/// (endpoints included); returns the penalized-fitness argmax.
template <Surrogate S>
GridResult brute_force_grid(const S& models, const ObjectiveSpec& spec, const SearchSpace& space, int resolution) {
  if (resolution < 2) throw ValidationError("grid resolution must be >= 2");
  spec.validate();
  space.validate();
  detail::Scorer<S> scorer(models, spec);
  GridResult out;
  auto axis = [resolution](const SpacingBounds& b, int k) {
    return k == resolution - 1 ? b.high : b.low + (b.high - b.low) * k / (resolution - 1);
  };
  for (int ny : space.divisors) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(static_cast<std::size_t>(resolution) * resolution);
    for (int a = 0; a < resolution; ++a)
      for (int b = 0; b < resolution; ++b) pts.emplace_back(axis(space.d_y, a), axis(space.d_z, b));
    for (const auto& c : scorer.score(space, ny, pts))
      if (c.fitness > out.best.fitness) out.best = c;
  }
  out.evaluations = scorer.evaluations();
  return out;
}

/// True when `value` is no worse than `reference` by more than tol_db,
/// measured as a ratio of magnitudes.
inline bool within_db(double value, double reference, double tol_db) {
  return value >= reference - std::abs(reference) * (1.0 - db_to_linear(-tol_db));
}

/// Penalized fitness of a given configuration under the emulators.
template <Surrogate S>
Candidate score_config(const S& models, const ObjectiveSpec& spec, const ArrayConfig& c) {
  SearchSpace s;
  s.n_total = c.n_total;
  s.wavelength = c.wavelength;
  detail::Scorer<S> scorer(models, spec);
  return scorer.score(s, c.n_y, {Eigen::Vector2d(c.d_y, c.d_z)}).front();
}

/// Best simulated row satisfying every constraint. Ties go to the smaller
/// d_y + d_z, then to the lexicographically smaller (n_y, d_y, d_z).
inline DatasetRow dataset_argmax(const Dataset& ds, const ObjectiveSpec& spec) {
  if (ds.empty()) throw ValidationError("dataset_argmax: empty dataset");
  const DatasetRow* best = nullptr;
  std::vector<double> max_seen(spec.constraints.size(), -std::numeric_limits<double>::infinity());
  for (const auto& r : ds.rows) {
    bool ok = true;
    for (std::size_t k = 0; k < spec.constraints.size(); ++k) {
      const double v = r.metrics[static_cast<int>(spec.constraints[k].metric)];
      max_seen[k] = std::max(max_seen[k], v);
      ok = ok && spec.constraints[k].satisfied_db(v);
    }
    if (!ok) continue;
    if (!best) {
      best = &r;
      continue;
    }
    const double a = r.metrics[static_cast<int>(spec.objective)], b = best->metrics[static_cast<int>(spec.objective)];
    const auto key = [](const DatasetRow& x) {
      return std::make_tuple(x.config.d_y + x.config.d_z, x.config.n_y, x.config.d_y, x.config.d_z);
    };
    if (a > b || (a == b && key(r) < key(*best))) best = &r;
  }
  if (!best) {
    std::string msg = "dataset_argmax: no row satisfies the constraints;";
    for (std::size_t k = 0; k < spec.constraints.size(); ++k)
      msg += " max " + metric_name(spec.constraints[k].metric) + " seen = " + format_double(max_seen[k]) + " dB";
    throw ValidationError(msg);
  }
  return *best;
}

/// Seed for validation runs; disjoint from the per-row dataset seeds.
inline std::uint64_t validation_seed(std::uint64_t base, std::uint64_t k = 0) {
  return derive_seed(mix_seed(base ^ 0x76616c6964617465ULL), k);
}

/// One fresh simulator run of `config` at a validation seed.
inline MetricVector validate_candidate(const ArrayConfig& config, const SimParams& params, std::uint64_t k = 0,
                                       unsigned jobs = 1) {
  SimParams p = params;
  p.seed = validation_seed(params.seed, k);
  return simulate(config, p, jobs);
}

struct SpeedupReport {
  std::size_t emulator_evaluations = 0;
  std::size_t simulator_calls = 0;
  double evaluation_ratio = 0.0;  // evaluations per simulator call
  double simulator_seconds_per_call = 0.0;
  double emulator_seconds_per_call = 0.0;
  double latency_ratio = 0.0;  // simulator / emulator per-call time
  std::vector<std::string> warnings;
};

/// `simulator_seconds_per_call` may be 0 when no timing is available.
inline SpeedupReport speedup_report(const OptimizationResult& r, std::size_t simulator_calls,
                                    double simulator_seconds_per_call = 0.0) {
  SpeedupReport s;
  s.emulator_evaluations = r.emulator_evaluations;
  s.simulator_calls = simulator_calls;
  if (simulator_calls == 0) s.warnings.push_back("no simulator calls recorded");
  if (r.emulator_evaluations == 0) s.warnings.push_back("no emulator evaluations recorded; speedup factor is 0");
  s.evaluation_ratio = simulator_calls > 0 ? static_cast<double>(r.emulator_evaluations) / simulator_calls : 0.0;
  s.simulator_seconds_per_call = simulator_seconds_per_call;
  s.emulator_seconds_per_call = r.emulator_evaluations > 0 ? r.emulator_seconds / r.emulator_evaluations : 0.0;
  s.latency_ratio = s.emulator_seconds_per_call > 0 ? simulator_seconds_per_call / s.emulator_seconds_per_call : 0.0;
  return s;
}

}  // namespace emuopt
