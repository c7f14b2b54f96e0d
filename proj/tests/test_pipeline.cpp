#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "emuopt/pipeline.hpp"

using namespace emuopt;
namespace fs = std::filesystem;

namespace {

json tiny_config(const fs::path& out) {
  json j = json::parse(R"({
    "schema_version": 1,
    "simulation": {"n_drops": 6, "n_ues_per_drop": 8, "seed": 3},
    "sampling": {"count": 60, "seed": 4},
    "split": {"test_size": 15, "seed": 1},
    "models": {
      "sinr_mean": {"kind": "gpr", "gpr": {"restarts": 2}},
      "sinr_p5": {"kind": "random-forest", "random_forest": {"n_trees": 20}}
    },
    "curve": {"sizes": [10, 20, 45], "n_runs": 2, "metrics": ["sinr_mean", "sinr_p5"]},
    "objective": {"maximize": "sinr_mean", "constraints": [{"metric": "sinr_p5", "op": ">", "threshold_db": -5}]},
    "optimizer": {"seed": 2, "population": 8, "generations": 10},
    "slices": {"parameters": ["d_y"], "points": 5}
  })");
  j["output_dir"] = out.string();
  return j;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "emuopt_test_pipeline" / name;
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST(Config, DefaultsValidate) {
  const PipelineConfig c = parse_pipeline_config(json{{"schema_version", 1}});
  EXPECT_EQ(c.sampling.count, 1000u);
  EXPECT_EQ(c.split.test_size, 300u);
  EXPECT_EQ(c.models.size(), 4u);
  EXPECT_EQ(c.baseline, ArrayConfig(8, 0.5, 0.5));
  EXPECT_EQ(c.objective.constraints.size(), 1u);
}

TEST(Config, MissingOrWrongSchemaVersion) {
  EXPECT_THROW(parse_pipeline_config(json::object()), ConfigError);
  EXPECT_THROW(parse_pipeline_config(json{{"schema_version", 2}}), ConfigError);
}

TEST(Config, BadValuesBecomeConfigErrors) {
  EXPECT_THROW(parse_pipeline_config(json::parse(R"({"schema_version":1,"models":{"sinr_p7":{"kind":"gpr"}}})")),
               ConfigError);
  EXPECT_THROW(parse_pipeline_config(json::parse(R"({"schema_version":1,"sampling":{"bounds":[1.0,0.2]}})")),
               ConfigError);
  EXPECT_THROW(parse_pipeline_config(json::parse(R"({"schema_version":1,"simulation":{"n_drops":"x"}})")),
               ConfigError);
  EXPECT_THROW(parse_pipeline_config(json::parse(R"({"schema_version":1,"baseline":{"n_y":5,"d_y":0.5,"d_z":0.5}})")),
               ConfigError);
  // Objective needs an emulator for every metric it mentions.
  EXPECT_THROW(parse_pipeline_config(json::parse(R"({"schema_version":1,"models":{"sinr_mean":{"kind":"gpr"}}})")),
               ConfigError);
}

TEST(Config, JsonRoundTrip) {
  const PipelineConfig a = parse_pipeline_config(tiny_config("somewhere"));
  const PipelineConfig b = parse_pipeline_config(pipeline_config_to_json(a));
  EXPECT_EQ(pipeline_config_to_json(a), pipeline_config_to_json(b));
  EXPECT_EQ(b.models.at(Metric::P5).kind, ModelKind::RandomForest);
  EXPECT_EQ(b.models.at(Metric::P5).forest.n_trees, 20);
  EXPECT_EQ(b.objective.constraints.front().threshold_db, -5.0);
}

TEST(Config, LoadFromFile) {
  const fs::path dir = fresh_dir("load");
  fs::create_directories(dir);
  std::ofstream(dir / "cfg.json") << tiny_config(dir / "run").dump(2);
  EXPECT_EQ(load_pipeline_config(dir / "cfg.json").sampling.count, 60u);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_pipeline_config(dir / "broken.json"), ConfigError);
  EXPECT_THROW(load_pipeline_config(dir / "absent.json"), ConfigError);
}

TEST(Stages, MissingUpstreamArtifacts) {
  const PipelineConfig cfg = parse_pipeline_config(tiny_config(fresh_dir("missing")));
  std::ostringstream log;
  EXPECT_THROW(run_train(cfg, log, 1), MissingArtifact);
  EXPECT_THROW(run_curve(cfg, log, 1), MissingArtifact);
  EXPECT_THROW(run_optimize(cfg, log, 1), MissingArtifact);
  EXPECT_THROW(run_validate(cfg, log, 1), MissingArtifact);
}

TEST(Stages, EndToEndArtifactsAndDeterminism) {
  const fs::path a = fresh_dir("a"), b = fresh_dir("b");
  std::ostringstream log;
  for (const auto& dir : {a, b}) {
    const PipelineConfig cfg = parse_pipeline_config(tiny_config(dir));
    EXPECT_EQ(run_dataset(cfg, log, 2).size(), 60u);
    const TrainRun t = run_train(cfg, log, 2);
    EXPECT_EQ(t.scores.size(), 2u);
    const auto curves = run_curve(cfg, log, 2);
    EXPECT_EQ(curves.size(), 4u * 2u);
    const OptimizeRun o = run_optimize(cfg, log, 2);
    EXPECT_EQ(o.result.simulator_calls, 60u);
    EXPECT_EQ(o.result.emulator_evaluations, 7u * 8u * 11u);
    EXPECT_TRUE(o.result.validated.has_value());
    const auto rows = run_validate(cfg, log, 2);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows.back().config, o.result.best);
    EXPECT_EQ(rows.back().simulated, *o.result.validated);
  }
  EXPECT_EQ(line_count(a / "curves" / "learning_curves.csv"), 1u + 3 * 4 * 2);
  EXPECT_EQ(line_count(a / "curves" / "learning_curve_runs.csv"), 1u + 3 * 4 * 2 * 2);
  EXPECT_EQ(line_count(a / "comparison_table.csv"), 4u);
  EXPECT_EQ(line_count(a / "slices" / "sinr_mean_d_y.csv"), 6u);
  EXPECT_EQ(line_count(a / "pairplot.csv"), 1u + 60 * 16);
  for (const char* f : {"dataset.csv", "dataset.csv.meta.json", "pairplot.csv", "models/sinr_mean.json",
                        "models/sinr_p5.json", "models/test_nrmse.csv", "curves/learning_curves.csv",
                        "curves/learning_curve_runs.csv", "curves/learning_curves.meta.json",
                        "optimization_report.json", "optimization_report.txt", "comparison_table.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    if (std::string(f) == "curves/learning_curves.meta.json" || std::string(f) == "dataset.csv.meta.json") continue;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(json::parse(slurp(a / "optimization_report.json")).at("format"), "emuopt-optimization-report");
}

TEST(Stages, OptimizeReportsInfeasibleObjective) {
  const fs::path dir = fresh_dir("infeasible");
  json j = tiny_config(dir);
  j["objective"]["constraints"][0]["threshold_db"] = 80.0;
  j["sampling"]["count"] = 30;
  j["split"]["test_size"] = 10;
  const PipelineConfig cfg = parse_pipeline_config(j);
  std::ostringstream log;
  run_dataset(cfg, log, 1);
  run_train(cfg, log, 1);
  const OptimizeRun o = run_optimize(cfg, log, 1);
  EXPECT_FALSE(o.result.feasible);
  EXPECT_NE(slurp(dir / "optimization_report.txt").find("feasible: no"), std::string::npos);
  // No feasible dataset row: validation still compares baseline and optimum.
  EXPECT_EQ(run_validate(cfg, log, 1).size(), 2u);
}
