#pragma once

// Small optimizers: Nelder-Mead simplex and weighted linear least squares.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "swapsim/errors.hpp"

namespace swapsim::numerics {

struct NelderMeadResult {
  std::vector<double> x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct NelderMeadOptions {
  double initial_step = 0.1;
  double f_tol = 1e-12;
  double x_tol = 1e-10;
  int max_iterations = 4000;
};

/// Minimizes f from x0 with the standard reflection/expansion/contraction/shrink rules.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  if (n == 0) throw Error("nelder_mead: empty parameter vector");
  std::vector<std::vector<double>> s(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) s[i + 1][i] += (x0[i] != 0.0 ? opt.initial_step * std::max(1.0, std::abs(x0[i])) : opt.initial_step);
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i <= n; ++i) fs[i] = f(s[i]);

  NelderMeadResult res;
  std::vector<std::size_t> order(n + 1);
  for (int it = 0; it < opt.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double xspread = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
      for (std::size_t k = 0; k < n; ++k) xspread = std::max(xspread, std::abs(s[i][k] - s[best][k]));
    if (std::abs(fs[worst] - fs[best]) <= opt.f_tol * (1.0 + std::abs(fs[best])) && xspread <= opt.x_tol * (1.0 + xspread)) {
      res.converged = true;
      res.iterations = it;
      break;
    }
    res.iterations = it + 1;

    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t k = 0; k < n; ++k) c[k] += s[i][k] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (std::size_t k = 0; k < n; ++k) p[k] = c[k] + t * (s[worst][k] - c[k]);
      return p;
    };

    const auto xr = along(-1.0);
    const double fr = f(xr);
    if (fr < fs[best]) {
      const auto xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) s[worst] = xe, fs[worst] = fe;
      else s[worst] = xr, fs[worst] = fr;
      continue;
    }
    if (fr < fs[second]) {
      s[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : fs[worst])) {
      s[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t k = 0; k < n; ++k) s[i][k] = s[best][k] + 0.5 * (s[i][k] - s[best][k]);
      fs[i] = f(s[i]);
    }
  }
  const auto it = std::min_element(fs.begin(), fs.end());
  res.x = s[static_cast<std::size_t>(it - fs.begin())];
  res.fx = *it;
  return res;
}

struct LinearFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;  // (A^T W A)^{-1}
  double chi2 = 0.0;           // weighted residual sum of squares
};

/// argmin_c sum_i w_i (y_i - (A c)_i)^2.
inline LinearFit weighted_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (a.rows() != y.size() || w.size() != y.size()) throw Error("weighted_least_squares: size mismatch");
  if (a.rows() < a.cols()) throw EstimationError("weighted_least_squares: underdetermined system");
  const Eigen::VectorXd sw = w.cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd aw = sw.asDiagonal() * a;
  const Eigen::VectorXd yw = sw.asDiagonal() * y;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(aw);
  if (qr.rank() < a.cols()) throw EstimationError("weighted_least_squares: rank-deficient design");
  LinearFit fit;
  fit.coef = qr.solve(yw);
  fit.chi2 = (aw * fit.coef - yw).squaredNorm();
  fit.covariance = (aw.transpose() * aw).inverse();
  return fit;
}

}  // namespace swapsim::numerics
