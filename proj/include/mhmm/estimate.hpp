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

// Constrained maximum likelihood with Wald intervals.
//
// The likelihood is maximised over the free coordinates (log rates,
// log-ratio probabilities). Each start runs a short simplex warm-up and then
// BFGS. A rate whose MLE sits on the zero boundary drifts towards log(rate) =
// -inf with vanishing gradient; after BFGS every log-rate is probed at a floor
// of -40 and, if the likelihood does not drop, frozen there and the rest
// refitted. Standard errors come from a central-difference Hessian on the
// free scale and are mapped to the natural scale through log / logit.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/constraints.hpp"
#include "mhmm/error.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/model.hpp"
#include "mhmm/optimize.hpp"
#include "mhmm/rng.hpp"

namespace mhmm {

inline constexpr double kBoundaryRate = 1e-6;
inline constexpr double kZ975 = 1.959963984540054;

/// Log-likelihood as a function of the free vector; infeasible points
/// (overflow guard, numerical failure, degenerate conditioning) map to -inf.
inline Objective free_loglik(const ParameterLayout& layout, const std::vector<SubjectRecord>& data, int threads = 1) {
  return [&layout, &data, threads](const Eigen::VectorXd& x) {
    try {
      return dataset_loglik(layout.model(), layout.unpack(x), data, threads).value;
    } catch (const SubjectError&) {
      throw;
    } catch (const ModelError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
}

struct MleOptions {
  int starts = 10;
  int max_iterations = 200;
  double tol = 1e-3;  // gradient tolerance (log-likelihood units per free unit)
  double spread = 1.0;  // sd of the over-dispersed start distribution
  std::uint64_t seed = 1;
  int threads = 1;
  int warmup_evaluations = -1;  // simplex budget per start; -1 means 20 * dimension
  std::optional<Eigen::VectorXd> initial;  // first start; default is the zero vector
  bool boundary_probe = true;
  double boundary_floor = -40.0;
  bool compute_se = true;
};

/// Natural-scale summary of one named parameter.
struct ParameterInterval {
  ParamRef param;
  double estimate = 0.0;
  std::optional<double> se_transformed;  // se of log(rate) or logit(probability)
  std::optional<double> lower;
  std::optional<double> upper;
  bool fixed = false;  // pinned by a constraint
  bool boundary = false;
};

struct StandardErrors {
  std::vector<std::optional<double>> se;  // per free coordinate
  Eigen::MatrixXd covariance;              // NaN rows/cols for dropped coordinates
  bool positive_definite = true;
};

struct FitResult {
  ParameterSet params_hat;
  Eigen::VectorXd free_hat;
  double loglik = -std::numeric_limits<double>::infinity();
  std::vector<std::optional<double>> se_free;
  std::vector<ParameterInterval> ci;
  bool converged = false;
  bool hessian_positive_definite = true;
  int iterations = 0;
  int evaluations = 0;
  double multistart_spread = 0.0;
  std::vector<double> start_logliks;
  std::vector<ParamRef> boundary;  // rates estimated at the zero boundary

  const ParameterInterval* interval(const ParamRef& ref) const {
    for (const auto& c : ci) {
      if (c.param == ref) return &c;
    }
    return nullptr;
  }
};

/// Wald standard errors from the negative Hessian of `f` at `x_hat`.
/// Coordinates with active[i] == false are excluded. When the curvature
/// matrix is not positive definite, coordinates loading on its non-positive
/// eigenvectors are dropped (se absent) until the remainder is.
inline StandardErrors wald_standard_errors(const Objective& f, const Eigen::VectorXd& x_hat,
                                           std::vector<bool> active = {}, double h = 1e-3) {
  const Eigen::Index n = x_hat.size();
  if (active.empty()) active.assign(static_cast<std::size_t>(n), true);
  StandardErrors out;
  out.se.assign(static_cast<std::size_t>(n), std::nullopt);
  out.covariance = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());

  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (active[static_cast<std::size_t>(i)]) idx.push_back(i);
  }
  if (idx.empty()) return out;

  Eigen::VectorXd x_active(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) x_active[static_cast<Eigen::Index>(k)] = x_hat[idx[k]];
  auto restricted = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd full = x_hat;
    for (std::size_t k = 0; k < idx.size(); ++k) full[idx[k]] = z[static_cast<Eigen::Index>(k)];
    return f(full);
  };
  const Eigen::MatrixXd info_all = -numeric_hessian(restricted, x_active, h);
  if (!info_all.allFinite()) {
    out.positive_definite = false;
    return out;
  }

  std::vector<Eigen::Index> keep(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) keep[k] = static_cast<Eigen::Index>(k);
  while (!keep.empty()) {
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd info(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = 0; b < m; ++b) info(a, b) = info_all(keep[a], keep[b]);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const double top = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    std::vector<bool> drop(static_cast<std::size_t>(m), false);
    bool any = false;
    for (Eigen::Index e = 0; e < m; ++e) {
      if (eig.eigenvalues()[e] > 1e-10 * top) continue;
      any = true;
      for (Eigen::Index a = 0; a < m; ++a) {
        if (std::abs(eig.eigenvectors()(a, e)) > 1e-3) drop[static_cast<std::size_t>(a)] = true;
      }
    }
    if (!any) {
      const Eigen::MatrixXd cov = info.llt().solve(Eigen::MatrixXd::Identity(m, m));
      for (Eigen::Index a = 0; a < m; ++a) {
        const Eigen::Index ia = idx[static_cast<std::size_t>(keep[a])];
        for (Eigen::Index b = 0; b < m; ++b) out.covariance(ia, idx[static_cast<std::size_t>(keep[b])]) = cov(a, b);
        if (cov(a, a) > 0.0) out.se[static_cast<std::size_t>(ia)] = std::sqrt(cov(a, a));
      }
      break;
    }
    out.positive_definite = false;
    std::vector<Eigen::Index> next;
    for (Eigen::Index a = 0; a < m; ++a) {
      if (!drop[static_cast<std::size_t>(a)]) next.push_back(keep[a]);
    }
    keep.swap(next);
  }
  return out;
}

namespace detail {

inline double logit(double p) { return std::log(p) - std::log1p(-p); }
inline double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

/// log(rate) or logit(probability): the scale on which intervals are symmetric.
inline double natural_transform(const ParamRef& ref, double v) {
  return ref.kind == ParamRef::Kind::Rate ? std::log(v) : logit(v);
}
inline double natural_inverse(const ParamRef& ref, double h) {
  return ref.kind == ParamRef::Kind::Rate ? std::exp(h) : expit(h);
}

}  // namespace detail

/// 95% Wald intervals for every named (non-structural-zero) parameter. The
/// transformed-scale variance is grad(h)' Sigma grad(h) with h = log or logit
/// of the parameter as a function of the free vector; for a free rate this is
/// exactly the coordinate variance.
inline std::vector<ParameterInterval> natural_intervals(const ParameterLayout& layout, const Eigen::VectorXd& x_hat,
                                                        const StandardErrors& se,
                                                        const std::vector<ParamRef>& boundary = {}) {
  const ParameterSet p_hat = layout.unpack(x_hat);
  const MixtureModelSpec& model = layout.model();
  const Eigen::Index n = x_hat.size();
  std::vector<ParameterInterval> out;
  for (const ParamRef& ref : layout.natural_parameters()) {
    ParameterInterval iv;
    iv.param = ref;
    iv.estimate = p_hat.value(model, ref);
    iv.fixed = layout.status(ref) == ParameterLayout::Status::Fixed;
    iv.boundary = std::find(boundary.begin(), boundary.end(), ref) != boundary.end();
    if (iv.fixed || iv.estimate <= 0.0 || (ref.kind != ParamRef::Kind::Rate && iv.estimate >= 1.0)) {
      out.push_back(iv);
      continue;
    }
    const double h0 = detail::natural_transform(ref, iv.estimate);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    bool ok = true;
    for (Eigen::Index i = 0; i < n && ok; ++i) {
      const double step = 1e-6 * std::max(1.0, std::abs(x_hat[i]));
      Eigen::VectorXd up = x_hat;
      Eigen::VectorXd down = x_hat;
      up[i] += step;
      down[i] -= step;
      const double hu = detail::natural_transform(ref, layout.unpack(up).value(model, ref));
      const double hd = detail::natural_transform(ref, layout.unpack(down).value(model, ref));
      grad[i] = (hu - hd) / (2.0 * step);
      if (std::abs(grad[i]) < 1e-9) grad[i] = 0.0;
      if (grad[i] != 0.0 && !se.se[static_cast<std::size_t>(i)]) ok = false;
    }
    if (ok) {
      double var = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (grad[i] != 0.0 && grad[j] != 0.0) var += grad[i] * se.covariance(i, j) * grad[j];
        }
      }
      if (var > 0.0 && std::isfinite(var)) {
        const double s = std::sqrt(var);
        iv.se_transformed = s;
        iv.lower = detail::natural_inverse(ref, h0 - kZ975 * s);
        iv.upper = detail::natural_inverse(ref, h0 + kZ975 * s);
      }
    }
    out.push_back(iv);
  }
  return out;
}

namespace detail {

struct StartOutcome {
  OptimizeResult opt;
  std::vector<bool> frozen;
};

inline StartOutcome optimise_from(const Objective& f, const ParameterLayout& layout, const Eigen::VectorXd& x0,
                                  const MleOptions& options) {
  const Eigen::Index n = x0.size();
  StartOutcome out;
  out.frozen.assign(static_cast<std::size_t>(n), false);
  const int warmup = options.warmup_evaluations >= 0 ? options.warmup_evaluations : 20 * static_cast<int>(n);
  OptimizeResult cur;
  if (warmup > 0) {
    NelderMeadOptions nm;
    nm.max_evaluations = warmup;
    cur = nelder_mead(f, x0, nm);
  } else {
    cur.x = x0;
    cur.value = safe_eval(f, x0, cur.evaluations);
  }
  int evaluations = cur.evaluations;
  int iterations = cur.iterations;
  BfgsOptions bo;
  bo.max_iterations = options.max_iterations;
  bo.gtol = options.tol;
  OptimizeResult best = bfgs(f, cur.x, bo);
  evaluations += best.evaluations;
  iterations += best.iterations;

  if (options.boundary_probe && std::isfinite(best.value)) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (out.frozen[static_cast<std::size_t>(i)] || !layout.coordinates()[static_cast<std::size_t>(i)].is_rate()) {
          continue;
        }
        Eigen::VectorXd probe = best.x;
        probe[i] = options.boundary_floor;
        const double v = safe_eval(f, probe, evaluations);
        if (!(v >= best.value - 1e-9)) continue;
        std::vector<bool> frozen = out.frozen;
        frozen[static_cast<std::size_t>(i)] = true;
        bo.active.assign(frozen.size(), true);
        for (std::size_t k = 0; k < frozen.size(); ++k) bo.active[k] = !frozen[k];
        OptimizeResult refit = bfgs(f, probe, bo);
        evaluations += refit.evaluations;
        iterations += refit.iterations;
        if (refit.value >= best.value - 1e-9) {
          best = refit;
          out.frozen = frozen;
          changed = true;
        }
      }
    }
  }
  best.evaluations = evaluations;
  best.iterations = iterations;
  out.opt = best;
  return out;
}

}  // namespace detail

/// Multi-start constrained MLE. The first start is `options.initial` (zero
/// vector by default); the others add N(0, spread^2) noise to it.
inline FitResult fit_mle(const ParameterLayout& layout, const std::vector<SubjectRecord>& data,
                         const MleOptions& options = {}) {
  const int dim = layout.free_dimension();
  if (dim == 0) throw ModelError("every parameter is constrained; evaluate the likelihood directly instead of fitting");
  if (data.empty()) throw ModelError("cannot fit an empty dataset");
  if (options.starts < 1) throw ModelError("at least one optimiser start is required");
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      data[i].validate(layout.model());
    } catch (const ModelError& e) {
      throw SubjectError(i, e.what());
    }
  }
  const Objective f = free_loglik(layout, data, options.threads);
  Eigen::VectorXd base = Eigen::VectorXd::Zero(dim);
  if (options.initial) {
    if (options.initial->size() != dim) throw ModelError("initial free vector has the wrong length");
    base = *options.initial;
  }

  CounterRng rng(options.seed, 0x5157A27);
  FitResult fit;
  std::optional<detail::StartOutcome> best;
  double worst_value = std::numeric_limits<double>::infinity();
  for (int s = 0; s < options.starts; ++s) {
    Eigen::VectorXd x0 = base;
    if (s > 0) {
      for (Eigen::Index i = 0; i < dim; ++i) x0[i] += options.spread * rng.normal();
    }
    detail::StartOutcome outcome = detail::optimise_from(f, layout, x0, options);
    fit.evaluations += outcome.opt.evaluations;
    fit.iterations += outcome.opt.iterations;
    fit.start_logliks.push_back(outcome.opt.value);
    if (std::isfinite(outcome.opt.value)) worst_value = std::min(worst_value, outcome.opt.value);
    if (!best || outcome.opt.value > best->opt.value) best = std::move(outcome);
  }
  if (!best || !std::isfinite(best->opt.value)) {
    throw NumericalError("every optimiser start produced a non-finite log-likelihood");
  }
  fit.free_hat = best->opt.x;
  fit.loglik = best->opt.value;
  fit.params_hat = layout.unpack(fit.free_hat);
  fit.converged = best->opt.converged;
  fit.multistart_spread = fit.loglik - worst_value;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const ParamRef& ref = layout.coordinates()[static_cast<std::size_t>(i)].param;
    if (ref.kind == ParamRef::Kind::Rate && fit.params_hat.value(layout.model(), ref) < kBoundaryRate) {
      fit.boundary.push_back(ref);
    }
  }
  // Tied rates follow their root onto the boundary.
  for (const ParamRef& ref : layout.natural_parameters()) {
    if (ref.kind == ParamRef::Kind::Rate && fit.params_hat.value(layout.model(), ref) < kBoundaryRate &&
        std::find(fit.boundary.begin(), fit.boundary.end(), ref) == fit.boundary.end()) {
      fit.boundary.push_back(ref);
    }
  }

  if (options.compute_se) {
    std::vector<bool> active(static_cast<std::size_t>(dim), true);
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = !best->frozen[i];
    const StandardErrors se = wald_standard_errors(f, fit.free_hat, active);
    fit.se_free = se.se;
    fit.hessian_positive_definite = se.positive_definite;
    fit.ci = natural_intervals(layout, fit.free_hat, se, fit.boundary);
  } else {
    fit.se_free.assign(static_cast<std::size_t>(dim), std::nullopt);
    fit.ci = natural_intervals(layout, fit.free_hat, StandardErrors{fit.se_free, Eigen::MatrixXd::Zero(dim, dim), false},
                               fit.boundary);
  }
  return fit;
}

}  // namespace mhmm
