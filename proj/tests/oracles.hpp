#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond Eigen containers.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

// Gauss-Jordan with partial pivoting; returns the inverse and log|det|.
inline std::pair<Dense, double> gauss_jordan_inverse(Dense a) {
  const std::size_t n = a.size();
  Dense inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  double log_det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(inv[c], inv[p]);
    const double piv = a[c][c];
    log_det += std::log(std::abs(piv));
    for (std::size_t j = 0; j < n; ++j) {
      a[c][j] /= piv;
      inv[c][j] /= piv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return {inv, log_det};
}

// GP log marginal likelihood from an explicit inverse and determinant.
inline double dense_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double sf, double ell, double sn) {
  const std::size_t n = x.rows();
  Dense k(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) d2 += std::pow(x(i, c) - x(j, c), 2);
      k[i][j] = sf * sf * std::exp(-d2 / (2 * ell * ell)) + (i == j ? sn * sn : 0.0);
    }
  const auto [inv, log_det] = gauss_jordan_inverse(k);
  double quad = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) quad += y(i) * inv[i][j] * y(j);
  return -0.5 * quad - 0.5 * log_det - 0.5 * n * std::log(2 * std::numbers::pi);
}

// Minimum of 0.5 b'Kb + eps*|b|_1 - y'b  s.t. sum(b) = 0, |b_i| <= C.
// Augmented Lagrangian on the equality, FISTA on the inner problem (the prox
// of eps*|.| plus the box is soft-threshold followed by clipping).
inline double svr_dual(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, double eps, double c) {
  const int n = static_cast<int>(y.size());
  const double rho = 5.0;
  const double lip = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues().maxCoeff() + rho * n;
  const double t = 1.0 / lip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  double lambda = 0.0;
  auto prox = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
      const double s = std::copysign(std::max(std::abs(v(i)) - t * eps, 0.0), v(i));
      out(i) = std::clamp(s, -c, c);
    }
    return out;
  };
  for (int outer = 0; outer < 400; ++outer) {
    Eigen::VectorXd z = b, prev = b;
    double m = 1.0;
    for (int inner = 0; inner < 3000; ++inner) {
      const Eigen::VectorXd grad = k * z - y + Eigen::VectorXd::Constant(n, lambda + rho * z.sum());
      const Eigen::VectorXd next = prox(z - t * grad);
      const double m_next = 0.5 * (1 + std::sqrt(1 + 4 * m * m));
      z = next + ((m - 1) / m_next) * (next - prev);
      prev = next;
      m = m_next;
    }
    b = prev;
    lambda += rho * b.sum();
    if (std::abs(b.sum()) < 1e-12 && outer > 20) break;
  }
  return 0.5 * b.dot(k * b) + eps * b.cwiseAbs().sum() - y.dot(b);
}

struct Stump {
  int feature = -1;
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
};

// Best single split by direct SSE over every feature and midpoint.
inline Stump exhaustive_stump(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.rows();
  Stump best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::vector<double> v(x.col(f).data(), x.col(f).data() + n);
    std::sort(v.begin(), v.end());
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
      if (!(v[k] < v[k + 1])) continue;
      const double thr = 0.5 * (v[k] + v[k + 1]);
      double sl = 0, sr = 0;
      int nl = 0, nr = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (x(i, f) <= thr) sl += y(i), ++nl;
        else sr += y(i), ++nr;
      }
      const double ml = sl / nl, mr = sr / nr;
      double sse = 0;
      for (Eigen::Index i = 0; i < n; ++i) sse += std::pow(y(i) - (x(i, f) <= thr ? ml : mr), 2);
      if (sse < best_sse) {
        best_sse = sse;
        best = {static_cast<int>(f), thr, ml, mr};
      }
    }
  }
  return best;
}

// sqrt(mean(((y - yh) / y)^2)) accumulated in long double, back to front.
inline double nrmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yh) {
  long double acc = 0.0L;
  for (Eigen::Index i = y.size() - 1; i >= 0; --i) {
    const long double r = (static_cast<long double>(y(i)) - yh(i)) / y(i);
    acc += r * r;
  }
  return static_cast<double>(std::sqrt(acc / y.size()));
}

// |sum_p sum_q exp(j 2pi (u_obs - u_steer) . r_pq)|^2, elements on the y-z
// plane at spacings (dy, dz) wavelengths; angles in degrees.
inline double phasor_sum_power(int ny, int nz, double dy, double dz, double ts, double ps, double to, double po) {
  const double d2r = std::numbers::pi / 180.0;
  auto unit = [&](double t, double p) {
    return std::array<double, 3>{std::sin(t * d2r) * std::cos(p * d2r), std::sin(t * d2r) * std::sin(p * d2r),
                                 std::cos(t * d2r)};
  };
  const auto us = unit(ts, ps), uo = unit(to, po);
  std::complex<double> acc = 0.0;
  for (int p = 0; p < ny; ++p)
    for (int q = 0; q < nz; ++q)
      acc += std::polar(1.0, 2 * std::numbers::pi * (p * dy * (uo[1] - us[1]) + q * dz * (uo[2] - us[2])));
  return std::norm(acc);
}

}  // namespace oracle
