// emuopt: command-line driver for the surrogate-assisted antenna pipeline.
//
//   emuopt simulate --ny 8 --dy 0.5 --dz 0.5 [--config run.json]
//   emuopt dataset|train|curve|optimize|validate --config run.json
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emuopt/pipeline.hpp"

namespace {

using namespace emuopt;

struct Options {
  std::string config;
  std::string output;
  unsigned jobs = 0;
  int ny = 8;
  double dy = 0.5;
  double dz = 0.5;
};

PipelineConfig resolve(const Options& o) {
  PipelineConfig cfg = o.config.empty() ? parse_pipeline_config(json{{"schema_version", kSchemaVersion}})
                                        : load_pipeline_config(o.config);
  if (!o.output.empty()) cfg.output_dir = o.output;
  return cfg;
}

void print_metrics(const MetricVector& m) {
  for (Metric k : kAllMetrics) std::printf("%-12s %10.4f dB\n", metric_name(k).c_str(), m[static_cast<int>(k)]);
}

int run(const std::string& command, const Options& o) {
  const PipelineConfig cfg = resolve(o);
  const unsigned jobs = effective_jobs();
  std::ostream& log = std::cerr;

  if (command == "simulate") {
    ArrayConfig config;
    try {
      config = ArrayConfig(o.ny, o.dy, o.dz, cfg.sampling.n_total, cfg.wavelength());
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    print_metrics(run_simulate(cfg, config, log, jobs));
  } else if (command == "dataset") {
    const Dataset ds = run_dataset(cfg, log, jobs);
    std::printf("wrote %zu rows to %s\n", ds.size(), cfg.dataset_path().string().c_str());
  } else if (command == "train") {
    const TrainRun t = run_train(cfg, log, jobs);
    std::printf("%-12s %-14s %8s %8s %10s\n", "metric", "kind", "n_train", "n_test", "nrmse");
    for (const auto& s : t.scores)
      std::printf("%-12s %-14s %8zu %8zu %10.5f\n", metric_name(s.metric).c_str(), kind_name(s.kind).c_str(),
                  s.n_train, s.n_test, s.nrmse);
  } else if (command == "curve") {
    const auto curves = run_curve(cfg, log, jobs);
    std::printf("%-12s %-14s %6s %10s %10s\n", "metric", "kind", "size", "nrmse", "ci95");
    for (const auto& c : curves)
      for (const auto& p : c.points)
        std::printf("%-12s %-14s %6zu %10.5f %10.5f\n", metric_name(c.target).c_str(), kind_name(c.kind).c_str(),
                    p.size, p.mean, p.ci_half_width);
  } else if (command == "optimize") {
    const OptimizeRun r = run_optimize(cfg, log, jobs);
    std::fputs(optimization_report_text(cfg, r).c_str(), stdout);
  } else if (command == "validate") {
    std::printf("%-18s %4s %4s %8s %8s %10s %10s %10s %10s\n", "label", "n_y", "n_z", "d_y", "d_z", "mean_db", "p5_db",
                "p50_db", "p95_db");
    for (const auto& r : run_validate(cfg, log, jobs))
      std::printf("%-18s %4d %4d %8.4f %8.4f %10.4f %10.4f %10.4f %10.4f\n", r.label.c_str(), r.config.n_y,
                  r.config.n_z, r.config.d_y, r.config.d_z, r.simulated.sinr_mean, r.simulated.sinr_p5,
                  r.simulated.sinr_p50, r.simulated.sinr_p95);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surrogate-assisted antenna array optimization"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Options o;
  app.add_option("--jobs,-j", o.jobs, "worker threads (0 = all cores)");

  std::string command;
  auto add = [&](const std::string& name, const std::string& help, bool needs_config) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto* c = sub->add_option("--config,-c", o.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--output,-o", o.output, "run directory (overrides output_dir)");
    sub->callback([&command, name] { command = name; });
    return sub;
  };
  CLI::App* sim = add("simulate", "simulate one array configuration", false);
  sim->add_option("--ny", o.ny, "horizontal element count (divisor of n_total)")->required();
  sim->add_option("--dy", o.dy, "horizontal spacing in wavelengths")->required();
  sim->add_option("--dz", o.dz, "vertical spacing in wavelengths")->required();
  add("dataset", "sample configurations and build the training CSV", true);
  add("train", "fit one emulator per metric and score it on the test split", true);
  add("curve", "learning curves: test nRMSE vs training size", true);
  add("optimize", "search the emulators for the constrained optimum", true);
  add("validate", "re-simulate baseline, dataset optimum and emulator optimum", true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    max_jobs().store(o.jobs);
    return run(command, o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
