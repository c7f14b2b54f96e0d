#pragma once

// Zero-mean Gaussian process regression with an isotropic RBF kernel
//   k(a, b) = sf^2 exp(-|a - b|^2 / (2 l^2)) + sn^2 [a == b]
// Hyperparameters are fitted by maximizing the log marginal likelihood
// with multi-start quasi-Newton ascent in log space.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "emuopt/error.hpp"

namespace emuopt {

struct GpHyper {
  double signal_sd = 1.0;
  double length_scale = 1.0;
  double noise_sd = 0.1;

  Eigen::Vector3d log_vector() const { return {std::log(signal_sd), std::log(length_scale), std::log(noise_sd)}; }
  static GpHyper from_log(const Eigen::Vector3d& v) { return {std::exp(v(0)), std::exp(v(1)), std::exp(v(2))}; }
  bool operator==(const GpHyper&) const = default;
};

struct GprParams {
  int restarts = 5;
  double length_min = 1e-2, length_max = 1e2;
  double signal_min = 1e-4, signal_max = 1e2;
  double noise_min = 1e-4, noise_max = 1e2;
  int max_iterations = 100;
  std::uint64_t seed = 0;
  bool optimize = true;  // false: use `initial` as-is
  GpHyper initial{};

  void validate() const {
    if (restarts < 1) throw ValidationError("gpr: restarts must be >= 1");
    if (!(length_min > 0 && length_min <= length_max && signal_min > 0 && signal_min <= signal_max &&
          noise_min > 0 && noise_min <= noise_max))
      throw ValidationError("gpr: hyperparameter bounds must be positive and ordered");
    if (max_iterations < 1) throw ValidationError("gpr: max_iterations must be >= 1");
  }
  bool operator==(const GprParams&) const = default;
};

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) d(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  return d;
}

/// exp(-gamma * d2) elementwise. Entries below e^-230 are set to zero so
/// that later products never reach subnormal range.
inline Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& sqdist, double gamma) {
  return sqdist.unaryExpr([gamma](double d2) {
    const double arg = gamma * d2;
    return arg > 230.0 ? 0.0 : std::exp(-arg);
  });
}

namespace detail {

inline constexpr std::array<double, 6> kJitterLadder{0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

// Cholesky of k with escalating diagonal jitter. Returns the jitter used.
inline double robust_cholesky(const Eigen::MatrixXd& k, Eigen::LLT<Eigen::MatrixXd>& llt) {
  for (double jitter : kJitterLadder) {
    if (jitter == 0.0) {
      llt.compute(k);
    } else {
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += jitter;
      llt.compute(kj);
    }
    if (llt.info() == Eigen::Success) return jitter;
  }
  throw NumericalError("gpr: kernel matrix is not positive definite even with 1e-6 jitter");
}

inline Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& sqdist, const GpHyper& h) {
  return (h.signal_sd * h.signal_sd) * rbf_kernel(sqdist, 1.0 / (2.0 * h.length_scale * h.length_scale));
}

}  // namespace detail

struct LmlResult {
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();  // d/d(log sf, log l, log sn)
};

namespace detail {

inline LmlResult lml_from_sqdist(const Eigen::MatrixXd& sqdist, const Eigen::VectorXd& y, const GpHyper& h,
                                      bool with_gradient = true) {
  const Eigen::Index n = y.size();
  const Eigen::MatrixXd corr = detail::rbf_gram(sqdist, h);
  Eigen::MatrixXd k = corr;
  k.diagonal().array() += h.noise_sd * h.noise_sd;
  Eigen::LLT<Eigen::MatrixXd> llt;
  detail::robust_cholesky(k, llt);
  const Eigen::VectorXd alpha = llt.solve(y);
  const double log_det_half = llt.matrixLLT().diagonal().array().log().sum();

  LmlResult r;
  r.value = -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * std::log(2.0 * std::numbers::pi);
  if (!with_gradient) return r;

  // W = alpha alpha^T - K^-1 ; dL/dtheta = 0.5 tr(W dK/dtheta)
  Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
  w = alpha * alpha.transpose() - w;
  const double l2 = h.length_scale * h.length_scale;
  r.gradient(0) = (w.array() * corr.array()).sum();  // 0.5 * tr(W * 2 corr)
  r.gradient(1) = 0.5 * (w.array() * corr.array() * sqdist.array()).sum() / l2;
  r.gradient(2) = h.noise_sd * h.noise_sd * w.trace();
  return r;
}

}  // namespace detail

/// Log marginal likelihood and its analytic gradient with respect to
/// (log sf, log l, log sn).

inline LmlResult gpr_lml_and_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& h) {
  if (x.rows() != y.size()) throw ValidationError("gpr: row count mismatch");
  return detail::lml_from_sqdist(squared_distances(x, x), y, h);
}

class GaussianProcess {
public:
  GpHyper hyper;
  double jitter = 0.0;
  double log_marginal_likelihood = 0.0;
  Eigen::MatrixXd train_x;
  Eigen::VectorXd alpha;

  /// Conditions on (x, y) with fixed hyperparameters.
  static GaussianProcess condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& h) {
    if (x.rows() != y.size()) throw ValidationError("gpr: row count mismatch");
    if (x.rows() < 1) throw ValidationError("gpr: empty input");
    GaussianProcess gp;
    gp.hyper = h;
    gp.train_x = x;
    Eigen::MatrixXd k = detail::rbf_gram(squared_distances(x, x), h);
    k.diagonal().array() += h.noise_sd * h.noise_sd;
    gp.jitter = detail::robust_cholesky(k, gp.llt_);
    gp.factored_ = true;
    gp.alpha = gp.llt_.solve(y);
    gp.log_marginal_likelihood = -0.5 * y.dot(gp.alpha) - gp.llt_.matrixLLT().diagonal().array().log().sum() -
                                 0.5 * y.size() * std::log(2.0 * std::numbers::pi);
    return gp;
  }

  /// Restores a fitted model from stored state; the factorization is
  /// recomputed for variance queries only.
  static GaussianProcess restore(const Eigen::MatrixXd& x, const Eigen::VectorXd& alpha, const GpHyper& h,
                                 double jitter, double lml) {
    GaussianProcess gp;
    gp.hyper = h;
    gp.train_x = x;
    gp.alpha = alpha;
    gp.jitter = jitter;
    gp.log_marginal_likelihood = lml;
    gp.factored_ = false;
    return gp;
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const {
    if (x.cols() != train_x.cols()) throw ValidationError("gpr: feature dimension mismatch");
    return cross_kernel(x) * alpha;
  }

  /// Latent predictive variance (diagnostic only).
  Eigen::VectorXd predict_variance(const Eigen::MatrixXd& x) const {
    ensure_factor();
    const Eigen::MatrixXd ks = cross_kernel(x).transpose();
    const Eigen::MatrixXd v = llt_.matrixL().solve(ks);
    Eigen::VectorXd var = Eigen::VectorXd::Constant(x.rows(), hyper.signal_sd * hyper.signal_sd);
    var -= v.colwise().squaredNorm().transpose();
    return var.cwiseMax(0.0);
  }

private:
  mutable Eigen::LLT<Eigen::MatrixXd> llt_;
  mutable bool factored_ = false;

  Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& x) const {
    return detail::rbf_gram(squared_distances(x, train_x), hyper);
  }

  void ensure_factor() const {
    if (factored_) return;
    Eigen::MatrixXd k = detail::rbf_gram(squared_distances(train_x, train_x), hyper);
    k.diagonal().array() += hyper.noise_sd * hyper.noise_sd + jitter;
    llt_.compute(k);
    if (llt_.info() != Eigen::Success) throw NumericalError("gpr: cannot refactor stored kernel");
    factored_ = true;
  }
};

namespace detail {

struct LogBox {
  Eigen::Vector3d lo, hi;
  Eigen::Vector3d clamp(const Eigen::Vector3d& v) const { return v.cwiseMax(lo).cwiseMin(hi); }
};

// Projected BFGS ascent on the log marginal likelihood from one start.
inline std::pair<Eigen::Vector3d, double> ascend_lml(const Eigen::MatrixXd& sqdist, const Eigen::VectorXd& y,
                                                     Eigen::Vector3d theta, const LogBox& box, int max_iter) {
  auto eval = [&](const Eigen::Vector3d& t, bool grad) {
    try {
      return lml_from_sqdist(sqdist, y, GpHyper::from_log(t), grad);
    } catch (const NumericalError&) {
      return LmlResult{-std::numeric_limits<double>::infinity(), Eigen::Vector3d::Zero()};
    }
  };
  theta = box.clamp(theta);
  LmlResult cur = eval(theta, true);
  if (!std::isfinite(cur.value)) return {theta, cur.value};
  Eigen::Matrix3d hinv = Eigen::Matrix3d::Identity();

  auto projected_gradient = [&](const Eigen::Vector3d& t, const Eigen::Vector3d& g) {
    Eigen::Vector3d pg = g;
    for (int k = 0; k < 3; ++k)
      if ((t(k) <= box.lo(k) && g(k) < 0) || (t(k) >= box.hi(k) && g(k) > 0)) pg(k) = 0;
    return pg;
  };

  for (int it = 0; it < max_iter; ++it) {
    const Eigen::Vector3d pg = projected_gradient(theta, cur.gradient);
    if (pg.lpNorm<Eigen::Infinity>() < 1e-5) break;
    Eigen::Vector3d dir = hinv * pg;
    if (dir.dot(pg) <= 0) {
      hinv.setIdentity();
      dir = pg;
    }
    // Cap the step at one decade per coordinate.
    const double big = dir.lpNorm<Eigen::Infinity>();
    if (big > 2.3) dir *= 2.3 / big;

    double step = 1.0;
    Eigen::Vector3d next;
    LmlResult trial;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
      next = box.clamp(theta + step * dir);
      trial = eval(next, false);
      if (std::isfinite(trial.value) && trial.value >= cur.value + 1e-4 * pg.dot(next - theta)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    trial = eval(next, true);
    const Eigen::Vector3d s = next - theta;
    const Eigen::Vector3d yk = cur.gradient - trial.gradient;  // ascent: curvature of -L
    const double improvement = trial.value - cur.value;
    theta = next;
    cur = trial;
    const double sy = s.dot(yk);
    const bool clamped = (theta.array() <= box.lo.array()).any() || (theta.array() >= box.hi.array()).any();
    if (sy > 1e-12 && !clamped) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
      hinv = (i3 - rho * s * yk.transpose()) * hinv * (i3 - rho * yk * s.transpose()) + rho * s * s.transpose();
    } else {
      hinv.setIdentity();
    }
    if (improvement < 2.2e-9 * std::max({1.0, std::abs(cur.value), std::abs(trial.value)})) break;
  }
  return {theta, cur.value};
}

}  // namespace detail

/// Fits hyperparameters (unless params.optimize is false) and conditions.
/// The first start is a data-driven guess; the rest are log-uniform draws.
inline GaussianProcess fit_gpr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GprParams& params = {}) {
  params.validate();
  if (x.rows() < 2) throw ValidationError("fit_gpr: needs at least 2 rows");
  if (x.rows() != y.size()) throw ValidationError("fit_gpr: row count mismatch");
  if (!params.optimize) return GaussianProcess::condition(x, y, params.initial);

  detail::LogBox box;
  box.lo = {std::log(params.signal_min), std::log(params.length_min), std::log(params.noise_min)};
  box.hi = {std::log(params.signal_max), std::log(params.length_max), std::log(params.noise_max)};
  const Eigen::MatrixXd sqdist = squared_distances(x, x);

  const double y_sd = std::sqrt((y.array() - y.mean()).square().mean());
  const double sd0 = y_sd > 0 ? y_sd : 1.0;
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::Vector3d best_theta = box.clamp(GpHyper{sd0, 1.0, 0.1 * sd0}.log_vector());
  double best_value = -std::numeric_limits<double>::infinity();
  for (int start = 0; start < params.restarts; ++start) {
    Eigen::Vector3d theta0;
    if (start == 0) {
      theta0 = GpHyper{sd0, 1.0, 0.1 * sd0}.log_vector();
    } else {
      for (int k = 0; k < 3; ++k) theta0(k) = box.lo(k) + unit(rng) * (box.hi(k) - box.lo(k));
    }
    auto [theta, value] = detail::ascend_lml(sqdist, y, theta0, box, params.max_iterations);
    if (value > best_value) {
      best_value = value;
      best_theta = theta;
    }
  }
  if (!std::isfinite(best_value)) throw NumericalError("fit_gpr: no start produced a finite likelihood");
  return GaussianProcess::condition(x, y, GpHyper::from_log(best_theta));
}

}  // namespace emuopt
