#pragma once

// Emulators: one fitted regressor per output metric, wrapped with the input
// standardizer and the dB <-> linear target transform. Callers pass raw
// feature rows (n_y, n_z, d_y, d_z) and receive predictions in dB.
//
// Targets are fitted in linear SINR units, centered and scaled by their
// training mean and standard deviation so that the GP prior and the SVR
// epsilon-tube operate on a unit scale.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "emuopt/dataset.hpp"
#include "emuopt/error.hpp"
#include "emuopt/io.hpp"
#include "emuopt/models/forest.hpp"
#include "emuopt/models/gpr.hpp"
#include "emuopt/models/linear.hpp"
#include "emuopt/models/svr.hpp"

namespace emuopt {

enum class ModelKind { Linear, Gpr, RandomForest, Svr };

inline constexpr std::array<ModelKind, 4> kAllModelKinds{ModelKind::Linear, ModelKind::Gpr, ModelKind::RandomForest,
                                                         ModelKind::Svr};

inline std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Linear: return "linear";
    case ModelKind::Gpr: return "gpr";
    case ModelKind::RandomForest: return "random-forest";
    case ModelKind::Svr: return "svr";
  }
  return "?";
}

inline ModelKind parse_kind(const std::string& s) {
  for (ModelKind k : kAllModelKinds)
    if (kind_name(k) == s) return k;
  throw ValidationError("unknown model kind '" + s + "'");
}

struct ModelSpec {
  ModelKind kind = ModelKind::Linear;
  Metric target = Metric::Mean;
  GprParams gpr;
  ForestParams forest;
  SvrParams svr;

  void validate() const {
    gpr.validate();
    forest.validate();
    svr.validate();
  }
  bool operator==(const ModelSpec&) const = default;
};

/// Affine map from linear-unit targets to the fitted scale.
struct TargetTransform {
  bool linear_units = true;
  double offset = 0.0;
  double scale = 1.0;

  double encode(double db) const { return ((linear_units ? db_to_linear(db) : db) - offset) / scale; }
  double decode_linear(double z) const { return z * scale + offset; }
  bool operator==(const TargetTransform&) const = default;
};

using FittedRegressor = std::variant<LinearModel, GaussianProcess, RandomForest, SvrModel>;

class EmulatorModel {
public:
  ModelSpec spec;
  Standardizer scaler;
  TargetTransform transform;
  std::vector<std::uint64_t> training_row_ids;
  FittedRegressor regressor;

  std::size_t feature_count() const { return static_cast<std::size_t>(scaler.mean.size()); }

  /// Predictions in linear SINR units for raw feature rows.
  Eigen::VectorXd predict_linear(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != feature_count())
      throw ValidationError("predict: expected " + std::to_string(feature_count()) + " features, got " +
                            std::to_string(x.cols()));
    const Eigen::MatrixXd z = scaler.apply(x);
    Eigen::VectorXd raw = std::visit([&](const auto& r) -> Eigen::VectorXd { return r.predict(z); }, regressor);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = transform.decode_linear(raw(i));
    return raw;
  }

  /// Predictions in dB. Non-positive linear predictions map to -inf.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    Eigen::VectorXd lin = predict_linear(x);
    for (Eigen::Index i = 0; i < lin.size(); ++i)
      lin(i) = lin(i) > 0 ? linear_to_db(lin(i)) : -std::numeric_limits<double>::infinity();
    return lin;
  }

  double predict_linear(const ArrayConfig& c) const {
    return predict_linear(Eigen::MatrixXd(Dataset::feature_vector(c).transpose()))(0);
  }
};

/// Fits one emulator for spec.target on the training rows of `train`.
inline EmulatorModel fit_emulator(const Dataset& train, const ModelSpec& spec) {
  spec.validate();
  if (train.empty()) throw ValidationError("fit_emulator: empty training set");
  const Eigen::MatrixXd x = train.features();
  const Eigen::VectorXd y_db = train.target(spec.target);

  EmulatorModel m;
  m.spec = spec;
  m.training_row_ids = train.row_ids();
  m.scaler = Standardizer::fit(x);
  Eigen::VectorXd y_lin = y_db.unaryExpr([](double v) { return db_to_linear(v); });
  m.transform.offset = y_lin.mean();
  const double sd = std::sqrt((y_lin.array() - m.transform.offset).square().mean());
  m.transform.scale = sd > 0 ? sd : 1.0;
  Eigen::VectorXd z(y_db.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = m.transform.encode(y_db(i));
  const Eigen::MatrixXd xs = m.scaler.apply(x);

  switch (spec.kind) {
    case ModelKind::Linear:
      if (xs.rows() < xs.cols() + 1) throw ValidationError("fit_linear: needs rows >= features + 1");
      m.regressor = fit_linear(xs, z);
      break;
    case ModelKind::Gpr: m.regressor = fit_gpr(xs, z, spec.gpr); break;
    case ModelKind::RandomForest: m.regressor = fit_random_forest(xs, z, spec.forest); break;
    case ModelKind::Svr: m.regressor = fit_svr(xs, z, spec.svr); break;
  }
  return m;
}

/// Root mean squared relative error. Both vectors must be in the same
/// (linear) units.
inline double nrmse(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (y.size() == 0 || y.size() != y_hat.size()) throw ValidationError("nrmse: lengths must match and be non-zero");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0.0) throw ValidationError("nrmse: target " + std::to_string(i) + " is zero");
    const double r = (y(i) - y_hat(i)) / y(i);
    acc += r * r;
  }
  return std::sqrt(acc / y.size());
}

/// nRMSE of a model on a dataset, after converting dB targets to linear.
inline double test_nrmse(const EmulatorModel& model, const Dataset& test) {
  const Eigen::VectorXd y = test.target(model.spec.target).unaryExpr([](double v) { return db_to_linear(v); });
  return nrmse(y, model.predict_linear(test.features()));
}

// -------------------------------------------------------- serialization --

namespace detail {

inline json to_json_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& data = j.at("data");
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = data.at(i).at(k).get<double>();
  return m;
}

inline json to_json_vector(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline void to_json(json& j, const GpHyper& h) {
  j = json{{"signal_sd", h.signal_sd}, {"length_scale", h.length_scale}, {"noise_sd", h.noise_sd}};
}
inline void from_json(const json& j, GpHyper& h) {
  h.signal_sd = j.at("signal_sd").get<double>();
  h.length_scale = j.at("length_scale").get<double>();
  h.noise_sd = j.at("noise_sd").get<double>();
}

inline void to_json(json& j, const ModelSpec& s) {
  j = json{{"kind", kind_name(s.kind)},
           {"target", metric_name(s.target)},
           {"gpr",
            {{"restarts", s.gpr.restarts},
             {"length_bounds", {s.gpr.length_min, s.gpr.length_max}},
             {"signal_bounds", {s.gpr.signal_min, s.gpr.signal_max}},
             {"noise_bounds", {s.gpr.noise_min, s.gpr.noise_max}},
             {"max_iterations", s.gpr.max_iterations},
             {"seed", s.gpr.seed},
             {"optimize", s.gpr.optimize},
             {"initial", s.gpr.initial}}},
           {"random_forest",
            {{"n_trees", s.forest.n_trees},
             {"max_depth", s.forest.max_depth},
             {"min_leaf", s.forest.min_leaf},
             {"max_features", s.forest.max_features},
             {"bootstrap", s.forest.bootstrap},
             {"seed", s.forest.seed}}},
           {"svr",
            {{"c", s.svr.c},
             {"epsilon", s.svr.epsilon},
             {"gamma", s.svr.gamma},
             {"tol", s.svr.tol},
             {"max_iterations", s.svr.max_iterations}}}};
}

/// Missing blocks and keys keep their defaults.
inline void from_json(const json& j, ModelSpec& s) {
  s.kind = parse_kind(j.at("kind").get<std::string>());
  if (j.contains("target")) s.target = parse_metric(j.at("target").get<std::string>());
  if (j.contains("gpr")) {
    const auto& g = j.at("gpr");
    s.gpr.restarts = g.value("restarts", s.gpr.restarts);
    if (g.contains("length_bounds")) {
      s.gpr.length_min = g["length_bounds"].at(0);
      s.gpr.length_max = g["length_bounds"].at(1);
    }
    if (g.contains("signal_bounds")) {
      s.gpr.signal_min = g["signal_bounds"].at(0);
      s.gpr.signal_max = g["signal_bounds"].at(1);
    }
    if (g.contains("noise_bounds")) {
      s.gpr.noise_min = g["noise_bounds"].at(0);
      s.gpr.noise_max = g["noise_bounds"].at(1);
    }
    s.gpr.max_iterations = g.value("max_iterations", s.gpr.max_iterations);
    s.gpr.seed = g.value("seed", s.gpr.seed);
    s.gpr.optimize = g.value("optimize", s.gpr.optimize);
    if (g.contains("initial")) s.gpr.initial = g["initial"].get<GpHyper>();
  }
  if (j.contains("random_forest")) {
    const auto& f = j.at("random_forest");
    s.forest.n_trees = f.value("n_trees", s.forest.n_trees);
    s.forest.max_depth = f.value("max_depth", s.forest.max_depth);
    s.forest.min_leaf = f.value("min_leaf", s.forest.min_leaf);
    s.forest.max_features = f.value("max_features", s.forest.max_features);
    s.forest.bootstrap = f.value("bootstrap", s.forest.bootstrap);
    s.forest.seed = f.value("seed", s.forest.seed);
  }
  if (j.contains("svr")) {
    const auto& v = j.at("svr");
    s.svr.c = v.value("c", s.svr.c);
    s.svr.epsilon = v.value("epsilon", s.svr.epsilon);
    s.svr.gamma = v.value("gamma", s.svr.gamma);
    s.svr.tol = v.value("tol", s.svr.tol);
    s.svr.max_iterations = v.value("max_iterations", s.svr.max_iterations);
  }
  s.validate();
}

inline json model_to_json(const EmulatorModel& m) {
  json j;
  j["format"] = "emuopt-model";
  j["version"] = 1;
  j["spec"] = m.spec;
  j["scaler"] = {{"mean", detail::to_json_vector(m.scaler.mean)}, {"scale", detail::to_json_vector(m.scaler.scale)}};
  j["target_transform"] = {{"linear_units", m.transform.linear_units},
                           {"offset", m.transform.offset},
                           {"scale", m.transform.scale}};
  j["training_row_ids"] = m.training_row_ids;
  json fitted;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          fitted = {{"intercept", r.intercept}, {"weights", detail::to_json_vector(r.weights)}};
        } else if constexpr (std::is_same_v<T, GaussianProcess>) {
          fitted = {{"hyper", r.hyper},
                    {"jitter", r.jitter},
                    {"log_marginal_likelihood", r.log_marginal_likelihood},
                    {"train_x", detail::to_json_matrix(r.train_x)},
                    {"alpha", detail::to_json_vector(r.alpha)}};
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          json trees = json::array();
          for (const auto& t : r.trees) {
            json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
                 value = json::array();
            for (const auto& n : t.nodes) {
              feature.push_back(n.feature);
              threshold.push_back(n.threshold);
              left.push_back(n.left);
              right.push_back(n.right);
              value.push_back(n.value);
            }
            trees.push_back(
                {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}});
          }
          fitted = {{"n_features", r.n_features}, {"trees", std::move(trees)}};
        } else {
          fitted = {{"gamma", r.gamma},
                    {"bias", r.bias},
                    {"support", detail::to_json_matrix(r.support)},
                    {"coefficients", detail::to_json_vector(r.coefficients)},
                    {"dual_objective", r.dual_objective},
                    {"kkt_violation", r.kkt_violation},
                    {"iterations", r.iterations}};
        }
      },
      m.regressor);
  j["fitted"] = std::move(fitted);
  return j;
}

inline EmulatorModel model_from_json(const json& j) {
  if (j.value("format", "") != "emuopt-model") throw ValidationError("not an emuopt model file");
  EmulatorModel m;
  m.spec = j.at("spec").get<ModelSpec>();
  m.scaler.mean = detail::vector_from_json(j.at("scaler").at("mean"));
  m.scaler.scale = detail::vector_from_json(j.at("scaler").at("scale"));
  const auto& tt = j.at("target_transform");
  m.transform = {tt.at("linear_units").get<bool>(), tt.at("offset").get<double>(), tt.at("scale").get<double>()};
  m.training_row_ids = j.at("training_row_ids").get<std::vector<std::uint64_t>>();
  const auto& f = j.at("fitted");
  switch (m.spec.kind) {
    case ModelKind::Linear:
      m.regressor = LinearModel{f.at("intercept").get<double>(), detail::vector_from_json(f.at("weights"))};
      break;
    case ModelKind::Gpr:
      m.regressor = GaussianProcess::restore(detail::matrix_from_json(f.at("train_x")),
                                             detail::vector_from_json(f.at("alpha")), f.at("hyper").get<GpHyper>(),
                                             f.at("jitter").get<double>(), f.at("log_marginal_likelihood").get<double>());
      break;
    case ModelKind::RandomForest: {
      RandomForest rf;
      rf.n_features = f.at("n_features").get<int>();
      for (const auto& t : f.at("trees")) {
        RegressionTree tree;
        const auto feature = t.at("feature").get<std::vector<int>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<int>>();
        const auto right = t.at("right").get<std::vector<int>>();
        const auto value = t.at("value").get<std::vector<double>>();
        for (std::size_t k = 0; k < feature.size(); ++k)
          tree.nodes.push_back({feature[k], threshold[k], left[k], right[k], value[k]});
        rf.trees.push_back(std::move(tree));
      }
      m.regressor = std::move(rf);
      break;
    }
    case ModelKind::Svr: {
      SvrModel s;
      s.gamma = f.at("gamma").get<double>();
      s.bias = f.at("bias").get<double>();
      s.support = detail::matrix_from_json(f.at("support"));
      s.coefficients = detail::vector_from_json(f.at("coefficients"));
      s.dual_objective = f.at("dual_objective").get<double>();
      s.kkt_violation = f.at("kkt_violation").get<double>();
      s.iterations = f.at("iterations").get<long>();
      m.regressor = std::move(s);
      break;
    }
  }
  return m;
}

inline void save_model(const EmulatorModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << model_to_json(m).dump() << "\n";
}

inline EmulatorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what(), 1);
  }
  return model_from_json(j);
}

}  // namespace emuopt
