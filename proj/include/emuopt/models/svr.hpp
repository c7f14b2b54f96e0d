#pragma once

// epsilon-insensitive support vector regression with an RBF kernel, solved
// in the dual by SMO with second-order working-set selection.
//
// The dual is posed over 2n variables a = (alpha, alpha*) with labels
// s = (+1, ..., -1, ...):
//   min 0.5 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C
// where Q_ij = s_i s_j K(i mod n, j mod n), p = (eps - y, eps + y).
// The regression weights are beta_i = alpha_i - alpha*_i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "emuopt/error.hpp"
#include "emuopt/models/gpr.hpp"

namespace emuopt {

struct SvrParams {
  double c = 10.0;
  double epsilon = 0.05;
  double gamma = 0.0;  // <= 0: 1 / (n_features * mean feature variance)
  double tol = 1e-3;
  long max_iterations = 100000;

  void validate() const {
    if (!(c > 0)) throw ValidationError("svr: C must be positive");
    if (!(epsilon >= 0)) throw ValidationError("svr: epsilon must be >= 0");
    if (!(tol > 0)) throw ValidationError("svr: tol must be positive");
    if (max_iterations < 1) throw ValidationError("svr: max_iterations must be >= 1");
  }
  bool operator==(const SvrParams&) const = default;
};

inline double rbf_gamma_auto(const Eigen::MatrixXd& x) {
  const double var = (x.rowwise() - x.colwise().mean()).array().square().mean();
  return var > 0 ? 1.0 / (x.cols() * var) : 1.0;
}

struct SvrModel {
  double gamma = 1.0;
  double bias = 0.0;
  Eigen::MatrixXd support;       // support vectors, one per row
  Eigen::VectorXd coefficients;  // beta for each support vector
  // Solver diagnostics.
  Eigen::VectorXd beta_all;      // beta for every training row
  double dual_objective = 0.0;   // 0.5 a'Qa + p'a at termination
  double kkt_violation = 0.0;    // max_{I_up} -sG - min_{I_low} -sG
  long iterations = 0;

  std::size_t support_count() const { return static_cast<std::size_t>(support.rows()); }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (support.rows() == 0) return Eigen::VectorXd::Constant(x.rows(), bias);
    if (x.cols() != support.cols()) throw ValidationError("svr: feature dimension mismatch");
    const Eigen::MatrixXd k = rbf_kernel(squared_distances(x, support), gamma);
    return (k * coefficients).array() + bias;
  }
};

/// Dual objective for given alpha / alpha* (minimization form).
inline double svr_dual_objective(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double epsilon,
                                 const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha_star) {
  const Eigen::VectorXd beta = alpha - alpha_star;
  return 0.5 * beta.dot(kernel * beta) + epsilon * (alpha.sum() + alpha_star.sum()) - y.dot(beta);
}

inline SvrModel fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrParams& params = {}) {
  params.validate();
  if (x.rows() < 2) throw ValidationError("fit_svr: needs at least 2 rows");
  if (x.rows() != y.size()) throw ValidationError("fit_svr: row count mismatch");
  const Eigen::Index n = x.rows();
  const Eigen::Index m = 2 * n;
  const double c = params.c;
  const double gamma = params.gamma > 0 ? params.gamma : rbf_gamma_auto(x);
  const Eigen::MatrixXd kernel = rbf_kernel(squared_distances(x, x), gamma);

  auto sign = [n](Eigen::Index t) { return t < n ? 1.0 : -1.0; };
  auto base = [n](Eigen::Index t) { return t < n ? t : t - n; };
  auto q = [&](Eigen::Index i, Eigen::Index j) { return sign(i) * sign(j) * kernel(base(i), base(j)); };

  Eigen::VectorXd a = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd p(m);
  p.head(n) = params.epsilon - y.array();
  p.tail(n) = params.epsilon + y.array();
  Eigen::VectorXd g = p;  // gradient Qa + p

  auto in_up = [&](Eigen::Index t) { return sign(t) > 0 ? a(t) < c : a(t) > 0; };
  auto in_low = [&](Eigen::Index t) { return sign(t) > 0 ? a(t) > 0 : a(t) < c; };
  constexpr double kTau = 1e-12;
  const double inf = std::numeric_limits<double>::infinity();

  long iter = 0;
  double violation = 0.0;
  for (;; ++iter) {
    // i: maximal violating index in I_up.
    double g_max = -inf, g_min = inf;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (in_up(t) && -sign(t) * g(t) >= g_max) {
        g_max = -sign(t) * g(t);
        i = t;
      }
    }
    for (Eigen::Index t = 0; t < m; ++t)
      if (in_low(t)) g_min = std::min(g_min, -sign(t) * g(t));
    violation = g_max - g_min;
    if (i < 0 || violation < params.tol) break;
    if (iter >= params.max_iterations)
      throw ConvergenceError("svr: SMO did not converge in " + std::to_string(params.max_iterations) +
                                 " iterations; KKT violation " + std::to_string(violation),
                             violation);

    // j: second-order choice in I_low.
    Eigen::Index j = -1;
    double best = inf;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (!in_low(t)) continue;
      const double b = g_max + sign(t) * g(t);
      if (b <= 0) continue;
      double curv = q(i, i) + q(t, t) - 2.0 * sign(i) * sign(t) * q(i, t);
      if (curv <= 0) curv = kTau;
      const double obj = -(b * b) / curv;
      if (obj <= best) {
        best = obj;
        j = t;
      }
    }
    if (j < 0) break;

    const double old_ai = a(i), old_aj = a(j);
    const double si = sign(i), sj = sign(j);
    double curv = q(i, i) + q(j, j) - 2.0 * si * sj * q(i, j);
    if (curv <= 0) curv = kTau;
    if (si != sj) {
      const double delta = (-g(i) - g(j)) / curv;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0) {
        if (a(j) < 0) { a(j) = 0; a(i) = diff; }
      } else {
        if (a(i) < 0) { a(i) = 0; a(j) = -diff; }
      }
      if (diff > 0) {
        if (a(i) > c) { a(i) = c; a(j) = c - diff; }
      } else {
        if (a(j) > c) { a(j) = c; a(i) = c + diff; }
      }
    } else {
      const double delta = (g(i) - g(j)) / curv;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > c) {
        if (a(i) > c) { a(i) = c; a(j) = sum - c; }
      } else {
        if (a(j) < 0) { a(j) = 0; a(i) = sum; }
      }
      if (sum > c) {
        if (a(j) > c) { a(j) = c; a(i) = sum - c; }
      } else {
        if (a(i) < 0) { a(i) = 0; a(j) = sum; }
      }
    }
    const double di = a(i) - old_ai, dj = a(j) - old_aj;
    for (Eigen::Index t = 0; t < m; ++t) g(t) += q(t, i) * di + q(t, j) * dj;
  }

  // Bias from free variables, or the midpoint of the feasible interval.
  double ub = inf, lb = -inf, sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < m; ++t) {
    const double yg = sign(t) * g(t);
    if (a(t) >= c) {
      if (sign(t) < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a(t) <= 0) {
      if (sign(t) > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  SvrModel model;
  model.gamma = gamma;
  model.bias = -rho;
  model.beta_all = a.head(n) - a.tail(n);
  model.dual_objective = 0.5 * a.dot(g + p);
  model.kkt_violation = std::max(violation, 0.0);
  model.iterations = iter;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (model.beta_all(t) != 0.0) sv.push_back(t);
  model.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.coefficients.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support.row(k) = x.row(sv[k]);
    model.coefficients(k) = model.beta_all(sv[k]);
  }
  return model;
}

}  // namespace emuopt
