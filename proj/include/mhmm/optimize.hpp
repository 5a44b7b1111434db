// Copyright 2026 The mhmm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small dense maximisers for smooth objectives without analytic gradients:
// a Nelder-Mead simplex and BFGS on central-difference gradients. Objectives
// may return -inf or NaN to signal an infeasible point; both are treated as
// -inf.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace mhmm {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double safe_eval(const Objective& f, const Eigen::VectorXd& x, int& count) {
  ++count;
  const double v = f(x);
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

}  // namespace detail

/// Central-difference step for coordinate value v.
inline double fd_step(double v, double rel = 1e-5) { return rel * std::max(1.0, std::abs(v)); }

/// Central-difference gradient; coordinates with active[i] == false get 0.
inline Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, const std::vector<bool>& active,
                                        int& evaluations, double rel = 1e-5) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!active.empty() && !active[static_cast<std::size_t>(i)]) continue;
    const double h = fd_step(x[i], rel);
    y[i] = x[i] + h;
    const double up = detail::safe_eval(f, y, evaluations);
    y[i] = x[i] - h;
    const double down = detail::safe_eval(f, y, evaluations);
    y[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Central-difference Hessian with step h per coordinate.
inline Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double h = 1e-3) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd y = x;
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = x[i] + h;
    const double fp = f(y);
    y[i] = x[i] - h;
    const double fm = f(y);
    y[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
    for (Eigen::Index j = 0; j < i; ++j) {
      y[i] = x[i] + h;
      y[j] = x[j] + h;
      const double fpp = f(y);
      y[j] = x[j] - h;
      const double fpm = f(y);
      y[i] = x[i] - h;
      const double fmm = f(y);
      y[j] = x[j] + h;
      const double fmp = f(y);
      y[i] = x[i];
      y[j] = x[j];
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    }
  }
  return hess;
}

struct NelderMeadOptions {
  int max_evaluations = 400;
  double initial_step = 0.5;
  double ftol = 1e-8;  // stop when the simplex value range falls below this
};

/// Maximises f with a Nelder-Mead simplex (standard coefficients 1, 2, 0.5, 0.5).
inline OptimizeResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  OptimizeResult res;
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)][i] += opt.initial_step;
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = detail::safe_eval(f, pts[i], res.evaluations);

  std::vector<std::size_t> order(pts.size());
  while (res.evaluations < opt.max_evaluations) {
    ++res.iterations;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    if (std::isfinite(val[worst]) && val[best] - val[worst] <= opt.ftol * (1.0 + std::abs(val[best]))) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) centroid += pts[order[i]];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = detail::safe_eval(f, xr, res.evaluations);
    if (fr > val[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = detail::safe_eval(f, xe, res.evaluations);
      if (fe > fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr > val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr > val[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = detail::safe_eval(f, xc, res.evaluations);
    if (fc > (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      val[i] = detail::safe_eval(f, pts[i], res.evaluations);
    }
  }
  const auto best = static_cast<std::size_t>(std::max_element(val.begin(), val.end()) - val.begin());
  res.x = pts[best];
  res.value = val[best];
  return res;
}

struct BfgsOptions {
  int max_iterations = 200;
  double gtol = 1e-3;       // max |gradient| over active coordinates
  double ftol = 1e-10;      // relative improvement treated as stalled
  double max_step = 2.0;    // largest coordinate move per line search
  std::vector<bool> active;  // empty: all coordinates move
};

/// Maximises f by BFGS with finite-difference gradients and backtracking
/// (Armijo) line search. Inactive coordinates stay at their start values.
inline OptimizeResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  OptimizeResult res;
  res.x = x0;
  res.value = detail::safe_eval(f, x0, res.evaluations);
  if (!std::isfinite(res.value)) return res;
  auto mask = [&](Eigen::VectorXd v) {
    if (!opt.active.empty()) {
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!opt.active[static_cast<std::size_t>(i)]) v[i] = 0.0;
      }
    }
    return v;
  };
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian of -f
  if (!opt.active.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!opt.active[static_cast<std::size_t>(i)]) H(i, i) = 0.0;
    }
  }
  Eigen::VectorXd g = numeric_gradient(f, res.x, opt.active, res.evaluations);
  int stalled = 0;
  int resets = 0;
  bool first_update = true;
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    if (!g.allFinite()) break;
    if (g.cwiseAbs().maxCoeff() <= opt.gtol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = mask(H * g);
    if (dir.dot(g) <= 0.0) {  // not an ascent direction: reset to steepest ascent
      H.setIdentity();
      first_update = true;
      if (!opt.active.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!opt.active[static_cast<std::size_t>(i)]) H(i, i) = 0.0;
        }
      }
      dir = mask(g);
    }
    const double longest = dir.cwiseAbs().maxCoeff();
    if (longest > opt.max_step) dir *= opt.max_step / longest;

    double step = 1.0;
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    const double slope = g.dot(dir);
    for (int ls = 0; ls < 40; ++ls) {
      x_new = res.x + step * dir;
      f_new = detail::safe_eval(f, x_new, res.evaluations);
      if (std::isfinite(f_new) && f_new >= res.value + 1e-4 * step * slope) break;
      step *= 0.5;
    }
    if (!std::isfinite(f_new) || f_new < res.value) {
      // No progress along the search direction; retry once from steepest ascent.
      if (resets++ > 0) break;
      H.setIdentity();
      first_update = true;
      if (!opt.active.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!opt.active[static_cast<std::size_t>(i)]) H(i, i) = 0.0;
        }
      }
      continue;
    }
    resets = 0;
    const double gain = f_new - res.value;
    const Eigen::VectorXd s = x_new - res.x;
    res.x = x_new;
    res.value = f_new;
    const Eigen::VectorXd g_new = numeric_gradient(f, res.x, opt.active, res.evaluations);
    const Eigen::VectorXd y = g - g_new;  // gradient change of -f
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first_update) {
        H *= sy / y.squaredNorm();
        first_update = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    g = g_new;
    if (gain <= opt.ftol * (1.0 + std::abs(res.value))) {
      if (++stalled >= 3) {
        res.converged = g.cwiseAbs().maxCoeff() <= 10.0 * opt.gtol;
        break;
      }
    } else {
      stalled = 0;
    }
  }
  return res;
}

}  // namespace mhmm
