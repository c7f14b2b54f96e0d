#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "emuopt/emulator.hpp"
#include "oracles.hpp"

using namespace emuopt;
namespace fs = std::filesystem;

namespace {

// Rows with smooth synthetic metrics; no simulator involved.
Dataset synthetic(std::size_t n, std::uint64_t seed) {
  Dataset ds;
  std::size_t id = 0;
  for (const auto& c : sample_configs(n, {}, seed)) {
    const double ly = std::log2(static_cast<double>(c.n_y));
    DatasetRow r;
    r.row_id = id++;
    r.config = c;
    r.metrics.sinr_mean = 20 + 0.8 * ly + 3 * std::sin(3 * c.d_y) - 2 * (c.d_z - 0.5) * (c.d_z - 0.5);
    r.metrics.sinr_p5 = r.metrics.sinr_mean - 15 + 0.3 * ly;
    r.metrics.sinr_p50 = r.metrics.sinr_mean - 0.5;
    r.metrics.sinr_p95 = r.metrics.sinr_mean + 12;
    ds.rows.push_back(r);
  }
  return ds;
}

}  // namespace

TEST(Nrmse, HandValues) {
  Eigen::VectorXd y(2), yh(2);
  y << 1.0, 2.0;
  yh << 1.1, 1.8;
  EXPECT_NEAR(nrmse(y, yh), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(nrmse(y, y), 0.0);
  Eigen::VectorXd y3(3), yh3(3);
  y3 << 2.0, 4.0, 5.0;
  yh3 << 3.0, 4.0, 5.0;
  EXPECT_NEAR(nrmse(y3, yh3), std::sqrt(0.25 / 3.0), 1e-15);
}

TEST(Nrmse, MatchesDirectEvaluation) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(0.1, 1000.0), noise(-0.3, 0.3);
  Eigen::VectorXd y(1000), yh(1000);
  for (int i = 0; i < 1000; ++i) {
    y(i) = pos(rng) * (i % 7 == 0 ? -1 : 1);
    yh(i) = y(i) * (1 + noise(rng));
  }
  EXPECT_NEAR(nrmse(y, yh), oracle::nrmse(y, yh), 1e-12);
}

TEST(Nrmse, RejectsZeroTargetAndLengthMismatch) {
  Eigen::VectorXd y(2), yh(2), y1(1);
  y << 1.0, 0.0;
  yh << 1.0, 1.0;
  y1 << 1.0;
  EXPECT_THROW(nrmse(y, yh), ValidationError);
  EXPECT_THROW(nrmse(y1, yh), ValidationError);
}

TEST(ModelKind, NamesRoundTrip) {
  for (ModelKind k : kAllModelKinds) EXPECT_EQ(parse_kind(kind_name(k)), k);
  EXPECT_THROW(parse_kind("mlp"), ValidationError);
}

TEST(TargetTransform, EncodeDecode) {
  const TargetTransform t{true, 50.0, 20.0};
  EXPECT_NEAR(t.decode_linear(t.encode(20.0)), 100.0, 1e-12);
}

TEST(Emulator, LinearNeedsEnoughRows) {
  const Dataset ds = synthetic(4, 1);
  ModelSpec s;
  s.kind = ModelKind::Linear;
  EXPECT_THROW(fit_emulator(ds, s), ValidationError);
}

TEST(Emulator, EveryKindLearnsSmoothSurface) {
  const Dataset train = synthetic(250, 2), test = synthetic(100, 3);
  for (ModelKind k : kAllModelKinds) {
    ModelSpec s;
    s.kind = k;
    s.target = Metric::Mean;
    const EmulatorModel m = fit_emulator(train, s);
    EXPECT_EQ(m.training_row_ids.size(), 250u);
    EXPECT_LT(test_nrmse(m, test), 0.35) << kind_name(k);
  }
}

TEST(Emulator, PredictChecksFeatureCount) {
  ModelSpec s;
  const EmulatorModel m = fit_emulator(synthetic(30, 4), s);
  EXPECT_THROW(m.predict(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
}

TEST(Emulator, PredictDbIsLogOfLinear) {
  ModelSpec s;
  s.kind = ModelKind::Gpr;
  const Dataset ds = synthetic(60, 5);
  const EmulatorModel m = fit_emulator(ds, s);
  const Eigen::MatrixXd x = ds.features();
  const Eigen::VectorXd lin = m.predict_linear(x), db = m.predict(x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_NEAR(db(i), 10 * std::log10(lin(i)), 1e-12);
}

TEST(Serialization, RoundTripPredictsBitIdentically) {
  const Dataset train = synthetic(80, 6), probe = synthetic(40, 7);
  const fs::path dir = fs::temp_directory_path() / "emuopt_test_emulator";
  fs::create_directories(dir);
  for (ModelKind k : kAllModelKinds) {
    ModelSpec s;
    s.kind = k;
    s.target = Metric::P5;
    s.forest.n_trees = 10;
    const EmulatorModel m = fit_emulator(train, s);
    const fs::path p = dir / (kind_name(k) + ".json");
    save_model(m, p);
    const EmulatorModel back = load_model(p);
    EXPECT_EQ(back.spec, m.spec);
    EXPECT_EQ(back.training_row_ids, m.training_row_ids);
    const Eigen::VectorXd a = m.predict_linear(probe.features()), b = back.predict_linear(probe.features());
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_EQ(a(i), b(i)) << kind_name(k) << " row " << i;
    // Saving the reloaded model reproduces the same bytes.
    const fs::path p2 = dir / (kind_name(k) + "_again.json");
    save_model(back, p2);
    std::ifstream f1(p), f2(p2);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
  }
}

TEST(Serialization, RejectsForeignFile) {
  const fs::path p = fs::temp_directory_path() / "emuopt_test_emulator" / "foreign.json";
  fs::create_directories(p.parent_path());
  std::ofstream(p) << R"({"format": "something-else"})";
  EXPECT_THROW(load_model(p), ValidationError);
}

TEST(ModelSpec, PartialJsonKeepsDefaults) {
  const ModelSpec s = json::parse(R"({"kind": "svr", "svr": {"c": 3.5}})").get<ModelSpec>();
  EXPECT_EQ(s.kind, ModelKind::Svr);
  EXPECT_DOUBLE_EQ(s.svr.c, 3.5);
  EXPECT_DOUBLE_EQ(s.svr.epsilon, SvrParams{}.epsilon);
  EXPECT_EQ(s.forest, ForestParams{});
}
