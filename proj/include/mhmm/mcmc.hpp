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

// Posterior sampling on the free vector: blocked adaptive random-walk
// Metropolis, priors on the transformed scale, and split-chain R-hat / ESS.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/constraints.hpp"
#include "mhmm/error.hpp"
#include "mhmm/estimate.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/rng.hpp"

namespace mhmm {

// ---------------------------------------------------------------------------
// Diagnostics

struct ChainDiagnostics {
  double rhat = 1.0;
  double n_eff = 0.0;
  bool degenerate = false;  // every chain constant
};

/// Split-chain potential scale reduction and initial-positive-sequence
/// effective sample size for one scalar. chains[c] holds chain c's draws.
inline ChainDiagnostics chain_diagnostics(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ModelError("diagnostics need at least 2 chains");
  std::size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  if (len < 10) throw ModelError("diagnostics need at least 10 draws per chain");
  const std::size_t n = len / 2;
  std::vector<std::vector<double>> split;
  for (const auto& c : chains) {
    split.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
    split.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(len - n), c.begin() + static_cast<std::ptrdiff_t>(len));
  }
  const auto m = static_cast<double>(split.size());
  const auto nd = static_cast<double>(n);
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& s : split) {
    double mu = 0.0;
    for (double v : s) mu += v;
    mu /= nd;
    double ss = 0.0;
    for (double v : s) ss += (v - mu) * (v - mu);
    means.push_back(mu);
    vars.push_back(ss / (nd - 1.0));
  }
  double W = 0.0;
  for (double v : vars) W += v;
  W /= m;
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= m;
  double B = 0.0;
  for (double mu : means) B += (mu - grand) * (mu - grand);
  B *= nd / (m - 1.0);

  ChainDiagnostics d;
  const double total = m * nd;
  if (!(W > 0.0)) {
    d.degenerate = true;
    d.rhat = B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;  // constant chains at different values
    d.n_eff = total;
    return d;
  }
  const double var_plus = (nd - 1.0) / nd * W + B / nd;
  d.rhat = std::sqrt(var_plus / W);

  // Autocorrelation from the averaged variogram; Geyer's initial positive
  // sequence on pair sums, made monotone.
  auto rho = [&](std::size_t t) {
    double v = 0.0;
    for (const auto& s : split) {
      for (std::size_t i = t; i < n; ++i) v += (s[i] - s[i - t]) * (s[i] - s[i - t]);
    }
    v /= m * static_cast<double>(n - t);
    return 1.0 - v / (2.0 * var_plus);
  };
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = (t == 0 ? 1.0 : rho(t)) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / std::log10(std::max(total, 10.0)));
  d.n_eff = std::min(total / tau, total);
  return d;
}

// ---------------------------------------------------------------------------
// Priors

struct CoordinatePrior {
  enum class Kind { Normal, Uniform };
  Kind kind = Kind::Normal;
  double mean = 0.0;
  double sd = 1.0;

  static CoordinatePrior normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }
  /// Uniform(0,1) on expit(x): the standard logistic density on x.
  static CoordinatePrior uniform() { return {Kind::Uniform, 0.0, 1.0}; }

  double log_density(double x) const {
    if (kind == Kind::Normal) {
      const double z = (x - mean) / sd;
      return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return -std::abs(x) - 2.0 * std::log1p(std::exp(-std::abs(x)));
  }
  double prior_mean() const { return kind == Kind::Normal ? mean : 0.0; }
  std::string describe() const {
    if (kind == Kind::Uniform) return "Uniform(0,1)";
    return "Normal(" + std::to_string(mean) + ", sd " + std::to_string(sd) + ")";
  }
};

/// One prior per free coordinate, in layout order.
struct PriorSpec {
  std::vector<CoordinatePrior> coordinates;

  void validate(const ParameterLayout& layout) const {
    if (static_cast<int>(coordinates.size()) != layout.free_dimension()) {
      throw ModelError("prior covers " + std::to_string(coordinates.size()) + " coordinates, layout has " +
                       std::to_string(layout.free_dimension()));
    }
    for (std::size_t i = 0; i < coordinates.size(); ++i) {
      const auto& c = coordinates[i];
      if (c.kind == CoordinatePrior::Kind::Normal && !(c.sd > 0.0 && std::isfinite(c.sd) && std::isfinite(c.mean))) {
        throw ModelError("prior for " + layout.coordinates()[i].label() + " needs a finite mean and sd > 0");
      }
    }
  }
  double log_density(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) s += coordinates[static_cast<std::size_t>(i)].log_density(x[i]);
    return s;
  }
};

/// log-rates ~ N(0, sd sqrt(1000)); probability coordinates Uniform(0,1).
inline PriorSpec noninformative_prior(const ParameterLayout& layout) {
  PriorSpec p;
  for (const auto& c : layout.coordinates()) {
    p.coordinates.push_back(c.is_rate() ? CoordinatePrior::normal(0.0, std::sqrt(1000.0)) : CoordinatePrior::uniform());
  }
  return p;
}

/// Sets the prior of the coordinate log(param/reference). Throws if the
/// layout has no such coordinate.
inline void set_coordinate_prior(PriorSpec& prior, const ParameterLayout& layout, const ParamRef& param,
                                 const std::optional<ParamRef>& reference, CoordinatePrior value) {
  const auto& coords = layout.coordinates();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (coords[i].param == param && (!reference || coords[i].reference == reference)) {
      prior.coordinates.at(i) = value;
      return;
    }
  }
  throw ModelError("no free coordinate for " + param.name() +
                   (reference ? " relative to " + reference->name() : std::string()));
}

/// Noninformative base plus the external-cohort priors of the two-type
/// dementia model: logit psi2 ~ N(0.99, var 2), logit pi1.2 ~ N(-3.69, var
/// 0.5), logit pi2.3 ~ N(-3.74, var 0.5). Each must be a two-member logit
/// coordinate in the layout (e.g. pi2.2 fixed at 0).
inline PriorSpec adams_prior(const ParameterLayout& layout) {
  PriorSpec p = noninformative_prior(layout);
  set_coordinate_prior(p, layout, ParamRef::psi(1), ParamRef::psi(0), CoordinatePrior::normal(0.99, std::sqrt(2.0)));
  set_coordinate_prior(p, layout, ParamRef::pi(0, 1), ParamRef::pi(0, 0), CoordinatePrior::normal(-3.69, std::sqrt(0.5)));
  set_coordinate_prior(p, layout, ParamRef::pi(1, 2), ParamRef::pi(1, 0), CoordinatePrior::normal(-3.74, std::sqrt(0.5)));
  return p;
}

/// Normal priors centred at the packed coordinates of `center`.
inline PriorSpec centered_prior(const ParameterLayout& layout, const ParameterSet& center, double sd) {
  const Eigen::VectorXd x = layout.pack(center);
  PriorSpec p;
  for (Eigen::Index i = 0; i < x.size(); ++i) p.coordinates.push_back(CoordinatePrior::normal(x[i], sd));
  return p;
}

// ---------------------------------------------------------------------------
// Sampler

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct MetropolisOptions {
  int chains = 4;
  int iterations = 2000;  // per chain, including burn-in
  int burn_in = -1;       // -1: iterations / 2
  std::uint64_t seed = 1;
  int threads = 1;        // chains in parallel
  double init_spread = 0.5;  // sd of the jitter around the initial point
  int init_attempts = 100;
  double target_acceptance = 0.234;
  std::vector<std::vector<int>> blocks;  // empty: one block per coordinate

  int resolved_burn_in() const { return burn_in < 0 ? iterations / 2 : burn_in; }
};

struct MetropolisRun {
  std::vector<Eigen::MatrixXd> chains;  // post burn-in draws, one row per iteration
  std::vector<std::vector<int>> blocks;
  std::vector<double> acceptance;  // per block, post burn-in, pooled over chains
};

namespace detail {

inline double safe_log_density(const LogDensity& f, const Eigen::VectorXd& x) {
  double v = -std::numeric_limits<double>::infinity();
  try {
    v = f(x);
  } catch (const ModelError&) {
  } catch (const NumericalError&) {
  }
  return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
}

}  // namespace detail

/// Blocked random-walk Metropolis. Each block proposes x_b + s_b L_b z with
/// L_b from the block's burn-in covariance (identity before it is
/// available); s_b follows a Robbins-Monro recursion toward the target
/// acceptance during burn-in and is frozen afterwards.
inline MetropolisRun run_adaptive_metropolis(const LogDensity& log_target, const Eigen::VectorXd& x0,
                                             const MetropolisOptions& opt) {
  const Eigen::Index dim = x0.size();
  if (dim < 1) throw ModelError("sampler needs at least one free coordinate");
  if (opt.chains < 1) throw ModelError("at least one chain is required");
  const int burn = opt.resolved_burn_in();
  if (opt.iterations < 1 || burn < 0 || burn >= opt.iterations) {
    throw ModelError("need iterations >= 1 and 0 <= burn_in < iterations");
  }
  MetropolisRun run;
  run.blocks = opt.blocks;
  if (run.blocks.empty()) {
    for (Eigen::Index i = 0; i < dim; ++i) run.blocks.push_back({static_cast<int>(i)});
  }
  {
    std::vector<int> seen(static_cast<std::size_t>(dim), 0);
    for (const auto& b : run.blocks) {
      for (int i : b) {
        if (i < 0 || i >= dim) throw ModelError("block index out of range");
        ++seen[static_cast<std::size_t>(i)];
      }
    }
    for (int s : seen) {
      if (s != 1) throw ModelError("blocks must partition the coordinates");
    }
  }
  const std::size_t nb = run.blocks.size();
  run.chains.resize(static_cast<std::size_t>(opt.chains));
  std::vector<std::vector<long>> accepted(static_cast<std::size_t>(opt.chains), std::vector<long>(nb, 0));
  const CounterRng root(opt.seed, 0xB4E5);

  parallel_for(static_cast<std::size_t>(opt.chains), opt.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      CounterRng rng = root.substream(c);
      Eigen::VectorXd x = x0;
      double lp = -std::numeric_limits<double>::infinity();
      for (int attempt = 0; attempt < opt.init_attempts && !std::isfinite(lp); ++attempt) {
        x = x0;
        if (attempt > 0 || opt.chains > 1) {
          for (Eigen::Index i = 0; i < dim; ++i) x[i] += opt.init_spread * rng.normal();
        }
        lp = detail::safe_log_density(log_target, x);
      }
      if (!std::isfinite(lp)) throw NumericalError("log-posterior not finite at any initial point");

      std::vector<double> log_scale(nb);
      std::vector<Eigen::MatrixXd> chol(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        const auto k = static_cast<Eigen::Index>(run.blocks[b].size());
        log_scale[b] = std::log(2.38 / std::sqrt(static_cast<double>(k)) * 0.1);
        chol[b] = Eigen::MatrixXd::Identity(k, k);
      }
      const int cov_begin = burn / 4;
      const int cov_end = burn / 2;
      std::vector<Eigen::VectorXd> history;
      Eigen::MatrixXd& out = run.chains[c];
      out.resize(opt.iterations - burn, dim);

      for (int it = 0; it < opt.iterations; ++it) {
        if (it == cov_end && cov_end - cov_begin >= 20) {
          for (std::size_t b = 0; b < nb; ++b) {
            const auto& idx = run.blocks[b];
            const auto k = static_cast<Eigen::Index>(idx.size());
            Eigen::VectorXd mu = Eigen::VectorXd::Zero(k);
            for (const auto& h : history) {
              for (Eigen::Index j = 0; j < k; ++j) mu[j] += h[idx[static_cast<std::size_t>(j)]];
            }
            mu /= static_cast<double>(history.size());
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k, k);
            for (const auto& h : history) {
              Eigen::VectorXd d(k);
              for (Eigen::Index j = 0; j < k; ++j) d[j] = h[idx[static_cast<std::size_t>(j)]] - mu[j];
              cov += d * d.transpose();
            }
            cov /= static_cast<double>(history.size() - 1);
            cov += 1e-8 * Eigen::MatrixXd::Identity(k, k);
            Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() == Eigen::Success && cov.allFinite() && cov.trace() > 1e-10) {
              chol[b] = llt.matrixL();
              log_scale[b] = std::log(2.38 / std::sqrt(static_cast<double>(k)));
            }
          }
          history.clear();
        }
        for (std::size_t b = 0; b < nb; ++b) {
          const auto& idx = run.blocks[b];
          const auto k = static_cast<Eigen::Index>(idx.size());
          Eigen::VectorXd z(k);
          for (Eigen::Index j = 0; j < k; ++j) z[j] = rng.normal();
          const Eigen::VectorXd step = std::exp(log_scale[b]) * (chol[b] * z);
          Eigen::VectorXd y = x;
          for (Eigen::Index j = 0; j < k; ++j) y[idx[static_cast<std::size_t>(j)]] += step[j];
          const double lq = detail::safe_log_density(log_target, y);
          const double log_ratio = lq - lp;
          const bool accept = std::isfinite(lq) && (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio);
          if (accept) {
            x = y;
            lp = lq;
          }
          if (it < burn) {
            const double a = std::isfinite(log_ratio) ? std::min(1.0, std::exp(std::min(log_ratio, 0.0))) : 0.0;
            log_scale[b] += (a - opt.target_acceptance) / std::pow(static_cast<double>(it) + 10.0, 0.6);
            log_scale[b] = std::clamp(log_scale[b], -20.0, 5.0);
          } else if (accept) {
            ++accepted[c][b];
          }
        }
        if (it >= cov_begin && it < cov_end) history.push_back(x);
        if (it >= burn) out.row(it - burn) = x.transpose();
      }
    }
  });
  const double kept = static_cast<double>(opt.iterations - burn) * opt.chains;
  run.acceptance.assign(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    long total = 0;
    for (const auto& a : accepted) total += a[b];
    run.acceptance[b] = kept > 0 ? static_cast<double>(total) / kept : 0.0;
  }
  return run;
}

// ---------------------------------------------------------------------------
// Posterior over a parameter layout

struct ParameterPosterior {
  ParamRef param;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
  double rhat = 1.0;
  double n_eff = 0.0;
  bool degenerate = false;
  bool fixed = false;
};

struct CoordinatePosterior {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  double mcse = 0.0;
  double rhat = 1.0;
  double n_eff = 0.0;
  bool degenerate = false;
};

struct PosteriorSummary {
  Eigen::MatrixXd draws;          // free vector, all chains stacked, post burn-in
  std::vector<int> chain;         // chain index of each draw row
  std::vector<int> iteration;     // iteration index (after burn-in) of each draw row
  std::vector<ParamRef> natural;  // columns of natural_draws
  Eigen::MatrixXd natural_draws;
  std::vector<ParameterPosterior> parameters;
  std::vector<CoordinatePosterior> coordinates;
  std::vector<std::vector<int>> blocks;
  std::vector<double> acceptance;  // per block
  int chains = 0;
  int iterations = 0;
  int burn_in = 0;

  const ParameterPosterior* find(const ParamRef& ref) const {
    for (const auto& p : parameters) {
      if (p.param == ref) return &p;
    }
    return nullptr;
  }
};

struct BayesOptions {
  int chains = 4;
  int iterations = 2000;
  int burn_in = -1;
  std::uint64_t seed = 1;
  int threads = 1;  // chains in parallel; the likelihood runs sequentially within a chain
  std::optional<Eigen::VectorXd> initial;  // default: prior means
};

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline ChainDiagnostics column_diagnostics(const Eigen::MatrixXd& m, Eigen::Index col, const std::vector<int>& chain,
                                           int n_chains) {
  std::vector<std::vector<double>> per(static_cast<std::size_t>(n_chains));
  for (Eigen::Index r = 0; r < m.rows(); ++r) per[static_cast<std::size_t>(chain[static_cast<std::size_t>(r)])].push_back(m(r, col));
  return chain_diagnostics(per);
}

}  // namespace detail

inline PosteriorSummary summarise_posterior(const ParameterLayout& layout, const MetropolisRun& run,
                                            int iterations, int burn_in) {
  PosteriorSummary s;
  s.chains = static_cast<int>(run.chains.size());
  s.iterations = iterations;
  s.burn_in = burn_in;
  s.blocks = run.blocks;
  s.acceptance = run.acceptance;
  const Eigen::Index dim = layout.free_dimension();
  Eigen::Index rows = 0;
  for (const auto& c : run.chains) rows += c.rows();
  s.draws.resize(rows, dim);
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < run.chains.size(); ++c) {
    for (Eigen::Index i = 0; i < run.chains[c].rows(); ++i, ++r) {
      s.draws.row(r) = run.chains[c].row(i);
      s.chain.push_back(static_cast<int>(c));
      s.iteration.push_back(static_cast<int>(i));
    }
  }
  s.natural = layout.natural_parameters();
  const MixtureModelSpec& model = layout.model();
  s.natural_draws.resize(rows, static_cast<Eigen::Index>(s.natural.size()));
  for (Eigen::Index i = 0; i < rows; ++i) {
    const ParameterSet p = layout.unpack(Eigen::VectorXd(s.draws.row(i).transpose()));
    for (std::size_t j = 0; j < s.natural.size(); ++j) s.natural_draws(i, static_cast<Eigen::Index>(j)) = p.value(model, s.natural[j]);
  }
  const bool can_diagnose = s.chains >= 2 && rows / std::max(s.chains, 1) >= 10;
  auto moments = [&](const Eigen::MatrixXd& m, Eigen::Index col, double& mean, double& sd) {
    mean = m.col(col).mean();
    const double ss = (m.col(col).array() - mean).square().sum();
    sd = rows > 1 ? std::sqrt(ss / static_cast<double>(rows - 1)) : 0.0;
  };
  for (Eigen::Index k = 0; k < dim; ++k) {
    CoordinatePosterior cp;
    cp.label = layout.coordinates()[static_cast<std::size_t>(k)].label();
    moments(s.draws, k, cp.mean, cp.sd);
    cp.n_eff = static_cast<double>(rows);
    if (can_diagnose) {
      const ChainDiagnostics d = detail::column_diagnostics(s.draws, k, s.chain, s.chains);
      cp.rhat = d.rhat;
      cp.n_eff = d.n_eff;
      cp.degenerate = d.degenerate;
    }
    cp.mcse = cp.sd / std::sqrt(std::max(cp.n_eff, 1.0));
    s.coordinates.push_back(cp);
  }
  for (std::size_t j = 0; j < s.natural.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    ParameterPosterior pp;
    pp.param = s.natural[j];
    pp.fixed = layout.status(pp.param) == ParameterLayout::Status::Fixed;
    moments(s.natural_draws, col, pp.mean, pp.sd);
    std::vector<double> v(s.natural_draws.col(col).data(), s.natural_draws.col(col).data() + rows);
    pp.lower = detail::quantile(v, 0.025);
    pp.upper = detail::quantile(v, 0.975);
    pp.n_eff = static_cast<double>(rows);
    if (can_diagnose) {
      const ChainDiagnostics d = detail::column_diagnostics(s.natural_draws, col, s.chain, s.chains);
      pp.rhat = d.rhat;
      pp.n_eff = d.n_eff;
      pp.degenerate = d.degenerate;
    }
    s.parameters.push_back(pp);
  }
  return s;
}

/// Posterior sampling for prior x likelihood on the layout's free vector.
/// An empty dataset samples the prior.
inline PosteriorSummary fit_bayes(const ParameterLayout& layout, const std::vector<SubjectRecord>& data,
                                  const PriorSpec& prior, const BayesOptions& options = {}) {
  prior.validate(layout);
  if (layout.free_dimension() < 1) throw ModelError("free dimension is 0: nothing to sample");
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      data[i].validate(layout.model());
    } catch (const ModelError& e) {
      throw SubjectError(i, e.what());
    }
  }
  const Objective loglik = free_loglik(layout, data, 1);
  const LogDensity target = [&](const Eigen::VectorXd& x) {
    const double lp = prior.log_density(x);
    if (!std::isfinite(lp)) return lp;
    return data.empty() ? lp : lp + loglik(x);
  };
  Eigen::VectorXd x0(layout.free_dimension());
  if (options.initial) {
    x0 = *options.initial;
    if (x0.size() != layout.free_dimension()) throw ModelError("initial vector has the wrong length");
  } else {
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] = prior.coordinates[static_cast<std::size_t>(i)].prior_mean();
  }
  MetropolisOptions mo;
  mo.chains = options.chains;
  mo.iterations = options.iterations;
  mo.burn_in = options.burn_in;
  mo.seed = options.seed;
  mo.threads = options.threads;
  mo.blocks = layout.blocks();
  const MetropolisRun run = run_adaptive_metropolis(target, x0, mo);
  return summarise_posterior(layout, run, options.iterations, mo.resolved_burn_in());
}

}  // namespace mhmm
