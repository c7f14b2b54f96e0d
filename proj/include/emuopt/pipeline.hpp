#pragma once

// Config-driven pipeline: dataset -> train -> curve -> optimize -> validate.
// Every stage reads its inputs from and writes its outputs to one run
// directory. Outputs are deterministic given the config; wall-clock numbers
// go only to the log stream and to the *_timing.json side files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "emuopt/dataset.hpp"
#include "emuopt/emulator.hpp"
#include "emuopt/evaluation.hpp"
#include "emuopt/io.hpp"
#include "emuopt/optimizer.hpp"

namespace emuopt {

namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

/// Bad config file or command-line values (exit code 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// An upstream stage has not produced its output yet (exit code 1).
class MissingArtifact : public Error {
public:
  explicit MissingArtifact(const fs::path& p) : Error("missing artifact: " + p.string()) {}
};

struct SamplingConfig {
  std::size_t count = 1000;
  SpacingBounds bounds;
  std::uint64_t seed = 7;
  bool stratified = false;
  int n_total = kDefaultTotalElements;
};

struct CurveConfig {
  std::vector<std::size_t> sizes = kDefaultCurveSizes;
  std::size_t n_runs = 10;
  std::uint64_t seed = 5;
  std::vector<ModelKind> kinds{kAllModelKinds.begin(), kAllModelKinds.end()};
  std::vector<Metric> metrics{Metric::Mean};
};

struct OptimizerConfig {
  std::uint64_t seed = 11;
  DeParams de;
};

struct SliceConfig {
  std::vector<std::string> parameters{"d_y", "d_z"};
  std::size_t points = 41;
  bool simulate = false;
};

struct PipelineConfig {
  int schema_version = kSchemaVersion;
  fs::path output_dir = "run";
  SimParams simulation;
  SamplingConfig sampling;
  SplitSpec split{300, 3};
  std::map<Metric, ModelSpec> models;
  CurveConfig curve;
  ObjectiveSpec objective;
  OptimizerConfig optimizer;
  ArrayConfig baseline;
  SliceConfig slices;

  PipelineConfig() {
    for (Metric m : kAllMetrics) {
      ModelSpec s;
      s.kind = ModelKind::Gpr;
      s.target = m;
      models.emplace(m, s);
    }
  }

  double wavelength() const { return simulation.wavelength(); }

  void validate() const {
    if (schema_version != kSchemaVersion)
      throw ConfigError("unsupported schema_version " + std::to_string(schema_version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    simulation.validate();
    sampling.bounds.validate();
    if (sampling.count < 1) throw ConfigError("sampling.count must be >= 1");
    if (divisors(sampling.n_total).empty()) throw ConfigError("sampling.n_total must be positive");
    if (curve.n_runs < 1) throw ConfigError("curve.n_runs must be >= 1");
    if (curve.sizes.empty()) throw ConfigError("curve.sizes must not be empty");
    for (Metric m : objective.metrics())
      if (!models.count(m)) throw ConfigError("objective uses " + metric_name(m) + " but models has no entry for it");
    objective.validate();
    optimizer.de.validate();
    baseline.validate();
    if (baseline.n_total != sampling.n_total) throw ConfigError("baseline n_y * n_z must equal sampling.n_total");
    if (slices.points < 2) throw ConfigError("slices.points must be >= 2");
    for (const auto& p : slices.parameters) parse_slice_parameter(p);
  }

  fs::path dataset_path() const { return output_dir / "dataset.csv"; }
  fs::path models_dir() const { return output_dir / "models"; }
  fs::path model_path(Metric m) const { return models_dir() / (metric_name(m) + ".json"); }
  fs::path curves_dir() const { return output_dir / "curves"; }
  fs::path report_path() const { return output_dir / "optimization_report.json"; }
};

inline std::string comparator_symbol(Comparator c) { return c == Comparator::Greater ? ">" : "<"; }

inline Comparator parse_comparator(const std::string& s) {
  if (s == ">" || s == ">=" || s == "gt") return Comparator::Greater;
  if (s == "<" || s == "<=" || s == "lt") return Comparator::Less;
  throw ConfigError("unknown comparator '" + s + "'");
}

inline void to_json(json& j, const Constraint& c) {
  j = json{{"metric", metric_name(c.metric)}, {"op", comparator_symbol(c.comparator)}, {"threshold_db", c.threshold_db}};
}

inline void from_json(const json& j, Constraint& c) {
  c.metric = parse_metric(j.at("metric").get<std::string>());
  c.comparator = parse_comparator(j.value("op", std::string(">")));
  c.threshold_db = j.at("threshold_db").get<double>();
}

inline void to_json(json& j, const ObjectiveSpec& s) {
  j = json{{"maximize", metric_name(s.objective)}, {"constraints", s.constraints}, {"penalty_weight", s.penalty_weight}};
}

inline void from_json(const json& j, ObjectiveSpec& s) {
  if (j.contains("maximize")) s.objective = parse_metric(j["maximize"].get<std::string>());
  if (j.contains("constraints")) s.constraints = j["constraints"].get<std::vector<Constraint>>();
  s.penalty_weight = j.value("penalty_weight", s.penalty_weight);
}

namespace detail {

inline SpacingBounds bounds_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("bounds must be a [low, high] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline ArrayConfig config_from_json(const json& j, int n_total, double wavelength) {
  const int ny = j.at("n_y").get<int>();
  return ArrayConfig(ny, j.at("d_y").get<double>(), j.at("d_z").get<double>(), n_total, wavelength);
}

}  // namespace detail

/// Parses a config document. Absent blocks and keys keep their defaults.
inline PipelineConfig parse_pipeline_config(const json& j) {
  PipelineConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
    c.schema_version = j["schema_version"].get<int>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("simulation")) c.simulation = j["simulation"].get<SimParams>();
    if (j.contains("sampling")) {
      const auto& s = j["sampling"];
      c.sampling.count = s.value("count", c.sampling.count);
      if (s.contains("bounds")) c.sampling.bounds = detail::bounds_from_json(s["bounds"]);
      c.sampling.seed = s.value("seed", c.sampling.seed);
      c.sampling.stratified = s.value("stratified", c.sampling.stratified);
      c.sampling.n_total = s.value("n_total", c.sampling.n_total);
    }
    if (j.contains("split")) {
      c.split.test_size = j["split"].value("test_size", c.split.test_size);
      c.split.split_seed = j["split"].value("seed", c.split.split_seed);
    }
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& [name, spec] : j["models"].items()) {
        const Metric m = parse_metric(name);
        ModelSpec s = spec.get<ModelSpec>();
        s.target = m;
        c.models[m] = s;
      }
    }
    if (j.contains("curve")) {
      const auto& s = j["curve"];
      if (s.contains("sizes")) c.curve.sizes = s["sizes"].get<std::vector<std::size_t>>();
      c.curve.n_runs = s.value("n_runs", c.curve.n_runs);
      c.curve.seed = s.value("seed", c.curve.seed);
      if (s.contains("kinds")) {
        c.curve.kinds.clear();
        for (const auto& k : s["kinds"]) c.curve.kinds.push_back(parse_kind(k.get<std::string>()));
      }
      if (s.contains("metrics")) {
        c.curve.metrics.clear();
        for (const auto& m : s["metrics"]) c.curve.metrics.push_back(parse_metric(m.get<std::string>()));
      }
    }
    if (j.contains("objective")) c.objective = j["objective"].get<ObjectiveSpec>();
    if (j.contains("optimizer")) {
      const auto& s = j["optimizer"];
      c.optimizer.seed = s.value("seed", c.optimizer.seed);
      c.optimizer.de.population = s.value("population", c.optimizer.de.population);
      c.optimizer.de.generations = s.value("generations", c.optimizer.de.generations);
      c.optimizer.de.mutation = s.value("mutation", c.optimizer.de.mutation);
      c.optimizer.de.crossover = s.value("crossover", c.optimizer.de.crossover);
    }
    c.baseline = ArrayConfig::with_shape(8, 8, 0.5, 0.5, c.wavelength());
    if (c.sampling.n_total != kDefaultTotalElements) {
      const auto divs = divisors(c.sampling.n_total);
      c.baseline = ArrayConfig(divs[divs.size() / 2], 0.5, 0.5, c.sampling.n_total, c.wavelength());
    }
    if (j.contains("baseline")) c.baseline = detail::config_from_json(j["baseline"], c.sampling.n_total, c.wavelength());
    if (j.contains("slices")) {
      const auto& s = j["slices"];
      if (s.contains("parameters")) c.slices.parameters = s["parameters"].get<std::vector<std::string>>();
      c.slices.points = s.value("points", c.slices.points);
      c.slices.simulate = s.value("simulate", c.slices.simulate);
    }
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_pipeline_config(j);
}

inline json pipeline_config_to_json(const PipelineConfig& c) {
  json models = json::object();
  for (const auto& [m, s] : c.models) models[metric_name(m)] = s;
  json kinds = json::array(), metrics = json::array();
  for (auto k : c.curve.kinds) kinds.push_back(kind_name(k));
  for (auto m : c.curve.metrics) metrics.push_back(metric_name(m));
  return json{{"schema_version", c.schema_version},
              {"output_dir", c.output_dir.string()},
              {"simulation", c.simulation},
              {"sampling",
               {{"count", c.sampling.count},
                {"bounds", {c.sampling.bounds.low, c.sampling.bounds.high}},
                {"seed", c.sampling.seed},
                {"stratified", c.sampling.stratified},
                {"n_total", c.sampling.n_total}}},
              {"split", {{"test_size", c.split.test_size}, {"seed", c.split.split_seed}}},
              {"models", models},
              {"curve", {{"sizes", c.curve.sizes}, {"n_runs", c.curve.n_runs}, {"seed", c.curve.seed}, {"kinds", kinds},
                         {"metrics", metrics}}},
              {"objective", c.objective},
              {"optimizer",
               {{"seed", c.optimizer.seed},
                {"population", c.optimizer.de.population},
                {"generations", c.optimizer.de.generations},
                {"mutation", c.optimizer.de.mutation},
                {"crossover", c.optimizer.de.crossover}}},
              {"baseline", {{"n_y", c.baseline.n_y}, {"d_y", c.baseline.d_y}, {"d_z", c.baseline.d_z}}},
              {"slices",
               {{"parameters", c.slices.parameters}, {"points", c.slices.points}, {"simulate", c.slices.simulate}}}};
}

// ------------------------------------------------------------- helpers ----

namespace detail {

inline void require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact(p);
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

inline void write_json(const fs::path& p, const json& j) { open_out(p) << j.dump(2) << '\n'; }

inline json read_json(const fs::path& p) {
  require(p);
  std::ifstream in(p);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(p.string() + ": " + e.what(), 0);
  }
}

inline std::string fmt(double v) { return format_double(v); }

inline double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline Dataset load_run_dataset(const PipelineConfig& cfg) {
  detail::require(cfg.dataset_path());
  return load_csv(cfg.dataset_path(), cfg.sampling.n_total);
}

inline EmulatorSet load_run_models(const PipelineConfig& cfg) {
  EmulatorSet set;
  for (const auto& [m, spec] : cfg.models) {
    detail::require(cfg.model_path(m));
    set.models.emplace(m, load_model(cfg.model_path(m)));
  }
  return set;
}

// ------------------------------------------------------------ simulate ----

inline MetricVector run_simulate(const PipelineConfig& cfg, const ArrayConfig& config, std::ostream& log,
                                 unsigned jobs = effective_jobs()) {
  const auto t0 = std::chrono::steady_clock::now();
  const MetricVector m = simulate(config, cfg.simulation, jobs);
  log << "simulate: " << detail::elapsed(t0) << " s\n";
  detail::write_json(cfg.output_dir / "simulation.json", json{{"config", config}, {"metrics", m}});
  return m;
}

// ------------------------------------------------------------- dataset ----

inline Dataset run_dataset(const PipelineConfig& cfg, std::ostream& log, unsigned jobs = effective_jobs()) {
  const auto configs = sample_configs(cfg.sampling.count, cfg.sampling.bounds, cfg.sampling.seed,
                                      cfg.sampling.stratified, cfg.sampling.n_total, cfg.wavelength());
  log << "dataset: simulating " << configs.size() << " configurations\n";
  const auto t0 = std::chrono::steady_clock::now();
  Dataset ds = build_dataset(configs, cfg.simulation, cfg.sampling.seed, cfg.sampling.bounds, jobs);
  const double wall = detail::elapsed(t0);
  const auto cum = ds.cumulative_seconds();
  const double per_call = cum.empty() ? 0.0 : cum.back() / static_cast<double>(cum.size());
  log << "dataset: " << wall << " s wall, " << per_call << " s per simulator call\n";

  save_csv(ds, cfg.dataset_path());
  auto out = detail::open_out(cfg.output_dir / "pairplot.csv");
  out << "row_id,input,input_value,output,output_value\n";
  for (const auto& r : pairplot_export(ds))
    out << r.row_id << ',' << r.input_name << ',' << detail::fmt(r.input_value) << ',' << r.output_name << ','
        << detail::fmt(r.output_value) << '\n';
  detail::write_json(cfg.output_dir / "dataset_timing.json",
                     json{{"rows", ds.size()}, {"wall_seconds", wall}, {"seconds_per_call", per_call}});
  return ds;
}

// --------------------------------------------------------------- train ----

struct TrainScore {
  Metric metric;
  ModelKind kind;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double nrmse = 0.0;
};

struct TrainRun {
  EmulatorSet models;
  std::vector<TrainScore> scores;
};

inline std::vector<double> slice_grid(const SpacingBounds& b, std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i)
    g[i] = i + 1 == points ? b.high : b.low + (b.high - b.low) * static_cast<double>(i) / (points - 1);
  return g;
}

inline TrainRun run_train(const PipelineConfig& cfg, std::ostream& log, unsigned jobs = effective_jobs()) {
  const Dataset ds = load_run_dataset(cfg);
  const auto [train, test] = split(ds, cfg.split);

  std::vector<std::pair<Metric, ModelSpec>> specs(cfg.models.begin(), cfg.models.end());
  std::vector<std::optional<EmulatorModel>> fitted(specs.size());
  std::vector<double> seconds(specs.size());
  parallel_for(
      specs.size(),
      [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        fitted[i] = fit_emulator(train, specs[i].second);
        seconds[i] = detail::elapsed(t0);
      },
      jobs);

  TrainRun run;
  auto table = detail::open_out(cfg.models_dir() / "test_nrmse.csv");
  table << "metric,kind,n_train,n_test,nrmse\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Metric m = specs[i].first;
    const EmulatorModel& model = *fitted[i];
    save_model(model, cfg.model_path(m));
    const TrainScore s{m, model.spec.kind, train.size(), test.size(), test_nrmse(model, test)};
    table << metric_name(m) << ',' << kind_name(s.kind) << ',' << s.n_train << ',' << s.n_test << ','
          << detail::fmt(s.nrmse) << '\n';
    log << "train: " << metric_name(m) << " (" << kind_name(s.kind) << ") nRMSE " << s.nrmse << ", fit "
        << seconds[i] << " s\n";
    run.scores.push_back(s);

    for (const auto& param : cfg.slices.parameters) {
      const SpacingBounds& b = cfg.sampling.bounds;
      auto slice = slice_profile(model, cfg.baseline, param, slice_grid(b, cfg.slices.points));
      if (cfg.slices.simulate) attach_simulation(slice, cfg.baseline, param, m, cfg.simulation, jobs);
      auto out = detail::open_out(cfg.output_dir / "slices" / (metric_name(m) + "_" + param + ".csv"));
      out << param << ",prediction_db" << (cfg.slices.simulate ? ",simulated_db" : "") << '\n';
      for (const auto& p : slice) {
        out << detail::fmt(p.value) << ',' << detail::fmt(p.prediction_db);
        if (p.simulated_db) out << ',' << detail::fmt(*p.simulated_db);
        out << '\n';
      }
    }
    run.models.models.emplace(m, model);
  }
  return run;
}

// --------------------------------------------------------------- curve ----

inline std::vector<LearningCurve> run_curve(const PipelineConfig& cfg, std::ostream& log,
                                            unsigned jobs = effective_jobs()) {
  const Dataset ds = load_run_dataset(cfg);
  const auto [train, test] = split(ds, cfg.split);
  std::vector<LearningCurve> curves;
  for (Metric m : cfg.curve.metrics) {
    for (ModelKind k : cfg.curve.kinds) {
      ModelSpec spec;
      if (auto it = cfg.models.find(m); it != cfg.models.end()) spec = it->second;
      spec.kind = k;
      spec.target = m;
      const auto t0 = std::chrono::steady_clock::now();
      curves.push_back(learning_curve(train, test, spec, cfg.curve.sizes, cfg.curve.n_runs, cfg.curve.seed, jobs));
      log << "curve: " << metric_name(m) << " " << kind_name(k) << " " << detail::elapsed(t0) << " s, nRMSE at "
          << cfg.curve.sizes.back() << " = " << curves.back().points.back().mean << '\n';
    }
  }

  auto summary = detail::open_out(cfg.curves_dir() / "learning_curves.csv");
  auto runs = detail::open_out(cfg.curves_dir() / "learning_curve_runs.csv");
  summary << "metric,kind,size,n_runs,mean_nrmse,ci95_half_width\n";
  runs << "metric,kind,size,run,nrmse\n";
  json meta{{"seed", cfg.curve.seed}, {"n_runs", cfg.curve.n_runs}, {"sizes", cfg.curve.sizes},
            {"test_row_ids", test.row_ids()}, {"warnings", json::array()}};
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      summary << metric_name(c.target) << ',' << kind_name(c.kind) << ',' << p.size << ',' << p.runs.size() << ','
              << detail::fmt(p.mean) << ',' << detail::fmt(p.ci_half_width) << '\n';
      for (std::size_t r = 0; r < p.runs.size(); ++r)
        runs << metric_name(c.target) << ',' << kind_name(c.kind) << ',' << p.size << ',' << r << ','
             << detail::fmt(p.runs[r]) << '\n';
    }
    for (const auto& w : c.warnings) meta["warnings"].push_back(kind_name(c.kind) + "/" + metric_name(c.target) + ": " + w);
  }
  detail::write_json(cfg.curves_dir() / "learning_curves.meta.json", meta);
  return curves;
}

// ------------------------------------------------------------ optimize ----

struct OptimizeRun {
  OptimizationResult result;
  SpeedupReport speedup;
  std::uint64_t validation_seed = 0;
};

inline json optimization_report_json(const PipelineConfig& cfg, const OptimizeRun& run) {
  const auto& r = run.result;
  json predicted = json::object();
  for (const auto& [m, v] : r.predicted_db) predicted[metric_name(m) + "_db"] = v;
  json per_divisor = json::array();
  for (const auto& d : r.per_divisor)
    per_divisor.push_back({{"n_y", d.n_y},
                           {"evaluations", d.evaluations},
                           {"best", d.best.config},
                           {"fitness", d.best.fitness},
                           {"feasible", d.best.feasible}});
  return json{{"format", "emuopt-optimization-report"},
              {"objective", cfg.objective},
              {"seed", cfg.optimizer.seed},
              {"best", r.best},
              {"fitness", r.fitness},
              {"feasible", r.feasible},
              {"max_violation_db", r.max_violation_db},
              {"predicted", predicted},
              {"validated", r.validated ? json(*r.validated) : json(nullptr)},
              {"validation_seed", run.validation_seed},
              {"emulator_evaluations", r.emulator_evaluations},
              {"simulator_calls", r.simulator_calls},
              {"speedup_factor", run.speedup.evaluation_ratio},
              {"warnings", run.speedup.warnings},
              {"per_divisor", per_divisor}};
}

inline std::string optimization_report_text(const PipelineConfig& cfg, const OptimizeRun& run) {
  const auto& r = run.result;
  std::ostringstream o;
  o << "objective: maximize " << metric_name(cfg.objective.objective);
  for (const auto& c : cfg.objective.constraints)
    o << ", " << metric_name(c.metric) << ' ' << comparator_symbol(c.comparator) << ' ' << detail::fmt(c.threshold_db)
      << " dB";
  o << "\nbest: n_y=" << r.best.n_y << " n_z=" << r.best.n_z << " d_y=" << detail::fmt(r.best.d_y)
    << " d_z=" << detail::fmt(r.best.d_z) << "\nfeasible: " << (r.feasible ? "yes" : "no");
  if (!r.feasible) o << " (worst constraint short by " << detail::fmt(r.max_violation_db) << " dB)";
  o << "\n\nmetric            predicted_db  validated_db\n";
  for (Metric m : kAllMetrics) {
    std::string name = metric_name(m);
    name.resize(18, ' ');
    o << name;
    std::string p = r.predicted_db.count(m) ? detail::fmt(r.predicted_db.at(m)) : "-";
    std::string v = r.validated ? detail::fmt((*r.validated)[static_cast<int>(m)]) : "-";
    p.resize(14, ' ');
    o << p << v << '\n';
  }
  o << "\nemulator evaluations: " << r.emulator_evaluations << "\nsimulator calls (dataset): " << r.simulator_calls
    << "\nspeedup factor (evaluations / simulator calls): " << detail::fmt(run.speedup.evaluation_ratio) << '\n';
  for (const auto& w : run.speedup.warnings) o << "warning: " << w << '\n';
  return o.str();
}

inline OptimizeRun run_optimize(const PipelineConfig& cfg, std::ostream& log, unsigned jobs = effective_jobs()) {
  for (const auto& [m, s] : cfg.models) detail::require(cfg.model_path(m));
  const Dataset ds = load_run_dataset(cfg);
  const EmulatorSet models = load_run_models(cfg);
  const SearchSpace space = SearchSpace::from_dataset(ds);

  OptimizeRun run;
  run.result = optimize(models, cfg.objective, space, cfg.optimizer.seed, cfg.optimizer.de, jobs);
  run.result.simulator_calls = ds.size();
  run.validation_seed = validation_seed(cfg.simulation.seed);
  run.result.validated = validate_candidate(run.result.best, cfg.simulation, 0, jobs);

  double sim_per_call = 0.0;
  if (fs::exists(cfg.output_dir / "dataset_timing.json"))
    sim_per_call = detail::read_json(cfg.output_dir / "dataset_timing.json").value("seconds_per_call", 0.0);
  run.speedup = speedup_report(run.result, ds.size(), sim_per_call);

  detail::write_json(cfg.report_path(), optimization_report_json(cfg, run));
  detail::open_out(cfg.output_dir / "optimization_report.txt") << optimization_report_text(cfg, run);
  detail::write_json(cfg.output_dir / "optimization_timing.json",
                     json{{"search_seconds", run.result.emulator_seconds},
                          {"emulator_seconds_per_call", run.speedup.emulator_seconds_per_call},
                          {"simulator_seconds_per_call", run.speedup.simulator_seconds_per_call},
                          {"latency_ratio", run.speedup.latency_ratio}});
  log << "optimize: " << run.result.emulator_evaluations << " emulator evaluations in " << run.result.emulator_seconds
      << " s (" << run.speedup.emulator_seconds_per_call << " s per call)";
  if (run.speedup.latency_ratio > 0) log << ", simulator/emulator latency ratio " << run.speedup.latency_ratio;
  log << '\n';
  return run;
}

// ------------------------------------------------------------ validate ----

struct ComparisonRow {
  std::string label;
  ArrayConfig config;
  MetricVector simulated;
};

/// Re-simulates baseline, best dataset row and emulator optimum at the same
/// validation seed, so the three rows share their random drops.
inline std::vector<ComparisonRow> run_validate(const PipelineConfig& cfg, std::ostream& log,
                                               unsigned jobs = effective_jobs()) {
  const json report = detail::read_json(cfg.report_path());
  const Dataset ds = load_run_dataset(cfg);
  const ArrayConfig optimum = report.at("best").get<ArrayConfig>();

  std::vector<ComparisonRow> rows{{"baseline", cfg.baseline, {}}};
  try {
    rows.push_back({"dataset_argmax", dataset_argmax(ds, cfg.objective).config, {}});
  } catch (const ValidationError& e) {
    log << "validate: " << e.what() << '\n';
  }
  rows.push_back({"emulator_optimum", optimum, {}});
  for (auto& r : rows) r.simulated = validate_candidate(r.config, cfg.simulation, 0, jobs);

  auto out = detail::open_out(cfg.output_dir / "comparison_table.csv");
  out << "label,n_y,n_z,d_y,d_z";
  for (const char* t : kTargetNames) out << ',' << t;
  out << '\n';
  for (const auto& r : rows) {
    out << r.label << ',' << r.config.n_y << ',' << r.config.n_z << ',' << detail::fmt(r.config.d_y) << ','
        << detail::fmt(r.config.d_z);
    for (Metric m : kAllMetrics) out << ',' << detail::fmt(r.simulated[static_cast<int>(m)]);
    out << '\n';
  }
  return rows;
}

}  // namespace emuopt
