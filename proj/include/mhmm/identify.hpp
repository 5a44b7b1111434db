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

// Identifiability and estimability probes: the equal-likelihood transform of
// the two-type dementia model on restricted-path data, one-dimensional
// likelihood scans, and the constraint-scenario replication harness.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mhmm/closed_form.hpp"
#include "mhmm/constraints.hpp"
#include "mhmm/error.hpp"
#include "mhmm/estimate.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/model.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/rng.hpp"
#include "mhmm/simulate.hpp"

namespace mhmm {

/// Open interval of admissible rho values for the transform.
struct RhoRange {
  double rho1_max = 0.0;  // 1 / pi1.1
  double rho2_max = 0.0;  // 1 / (pi2.1 + pi2.2)
};

inline RhoRange equal_likelihood_rho_range(const ParameterSet& theta) {
  return {1.0 / theta.pi[0][0], 1.0 / (theta.pi[1][0] + theta.pi[1][1])};
}

/// theta* of the two-type dementia model: on restricted-path data it has the
/// same likelihood as theta for any admissible (rho1, rho2).
///   pi1.1* = rho1 pi1.1,      l1.12* = l1.12 / rho1,  l1.13* = (1 - 1/rho1) l1.12 + l1.13
///   pi2.j* = rho2 pi2.j (j = 1, 2),  l2.23* = l2.23 / rho2,  l2.25* = (1 - 1/rho2) l2.23 + l2.25
/// All other entries are unchanged; pi1.2* and pi2.3* absorb the remainder.
inline ParameterSet equal_likelihood_transform(const ParameterSet& theta, double rho1, double rho2) {
  const MixtureModelSpec model = dementia_mixture_model();
  theta.validate(model);
  const RhoRange range = equal_likelihood_rho_range(theta);
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
  };
  if (!(rho1 > 0.0 && rho1 < range.rho1_max)) {
    throw ModelError("rho1 = " + fmt(rho1) + " outside the admissible range (0, " + fmt(range.rho1_max) + ")");
  }
  if (!(rho2 > 0.0 && rho2 < range.rho2_max)) {
    throw ModelError("rho2 = " + fmt(rho2) + " outside the admissible range (0, " + fmt(range.rho2_max) + ")");
  }
  ParameterSet out = theta;
  out.pi[0][0] = rho1 * theta.pi[0][0];
  out.pi[0][1] = 1.0 - out.pi[0][0];
  out.pi[1][0] = rho2 * theta.pi[1][0];
  out.pi[1][1] = rho2 * theta.pi[1][1];
  out.pi[1][2] = 1.0 - out.pi[1][0] - out.pi[1][1];

  const double l1_12 = theta.rate(model, 0, 0, 1);
  const double l1_13 = theta.rate(model, 0, 0, 2);
  const double l2_23 = theta.rate(model, 1, 1, 2);
  const double l2_25 = theta.rate(model, 1, 1, 4);
  const double l1_13_star = (1.0 - 1.0 / rho1) * l1_12 + l1_13;
  const double l2_25_star = (1.0 - 1.0 / rho2) * l2_23 + l2_25;
  if (!(l1_13_star > 0.0)) {
    throw ModelError("transformed lambda1.1-3 = " + fmt(l1_13_star) + " is not positive; increase rho1");
  }
  if (!(l2_25_star > 0.0)) {
    throw ModelError("transformed lambda2.2-5 = " + fmt(l2_25_star) + " is not positive; increase rho2");
  }
  out.set_rate(model, 0, 0, 1, l1_12 / rho1);
  out.set_rate(model, 0, 0, 2, l1_13_star);
  out.set_rate(model, 1, 1, 2, l2_23 / rho2);
  out.set_rate(model, 1, 1, 4, l2_25_star);
  out.validate(model);
  return out;
}

struct TransformReport {
  ParameterSet theta;
  ParameterSet theta_star;
  double max_abs_loglik_gap = 0.0;
  double tolerance = 0.0;
  bool invariant = true;
  std::vector<double> gaps;  // per record
};

/// Compares subject log-likelihoods under two parameter sets.
inline TransformReport invariance_check(const MixtureModelSpec& model, const std::vector<SubjectRecord>& records,
                                        const ParameterSet& theta, const ParameterSet& theta_star, double tol) {
  TransformReport rep;
  rep.theta = theta;
  rep.theta_star = theta_star;
  rep.tolerance = tol;
  const LogLikelihood a = dataset_loglik(model, theta, records, 1);
  const LogLikelihood b = dataset_loglik(model, theta_star, records, 1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double x = a.per_subject[i];
    const double y = b.per_subject[i];
    const double gap = x == y ? 0.0 : std::abs(x - y);  // equal infinities give 0
    rep.gaps.push_back(gap);
    rep.max_abs_loglik_gap = std::max(rep.max_abs_loglik_gap, std::isnan(gap) ? INFINITY : gap);
  }
  rep.invariant = rep.max_abs_loglik_gap <= tol;
  return rep;
}

/// True if the record follows the restricted path: seen from time 0,
/// dementia-free visits, then dementia visits, then an observed death, and
/// no auxiliary information.
inline bool is_restricted_path(const SubjectRecord& r) {
  if (r.entry_time != 0.0 || !r.dead() || r.death_state != 2) return false;
  for (const auto& set : r.end_states) {
    if (set) return false;
  }
  if (r.visit_states.empty() || r.visit_states.front() != 0 || r.visit_states.back() != 1) return false;
  for (std::size_t k = 1; k < r.visit_states.size(); ++k) {
    if (r.visit_states[k] < r.visit_states[k - 1] || r.visit_states[k] > 1) return false;
  }
  return true;
}

/// invariance_check restricted to data on which the transform is exact.
inline TransformReport restricted_path_invariance_check(const std::vector<SubjectRecord>& records,
                                                        const ParameterSet& theta, const ParameterSet& theta_star,
                                                        double tol = 1e-8) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!is_restricted_path(records[i])) {
      throw SubjectError(i, "record does not follow the restricted path (dementia-free, dementia, observed death)");
    }
  }
  return invariance_check(dementia_mixture_model(), records, theta, theta_star, tol);
}

/// Random restricted-path times: a1 = 0 <= a2 < a3 <= a4 < a5.
inline RestrictedPathTimes random_restricted_path_times(CounterRng& rng) {
  RestrictedPathTimes a{};
  a[0] = 0.0;
  a[1] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
  a[2] = a[1] + 0.05 + rng.uniform();
  a[3] = rng.uniform() < 0.2 ? a[2] : a[2] + rng.uniform();
  a[4] = a[3] + 0.05 + rng.uniform();
  return a;
}

inline std::vector<SubjectRecord> make_restricted_path_records(int n, std::uint64_t seed) {
  CounterRng rng(seed, 0xA11);
  std::vector<SubjectRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(restricted_path_record(random_restricted_path_times(rng), std::to_string(i + 1)));
  return out;
}

struct FlatnessCurve {
  std::vector<double> offsets;
  std::vector<double> logliks;  // NaN where the likelihood was not finite
  double center = 0.0;
  double drop_minus = 0.0;  // loglik(center) - loglik(-half_width)
  double drop_plus = 0.0;   // loglik(center) - loglik(+half_width)
};

/// Log-likelihood along x_hat + offset * direction for evenly spaced offsets
/// in [-half_width, half_width].
inline FlatnessCurve flatness_scan(const Objective& f, const Eigen::VectorXd& x_hat, Eigen::VectorXd direction,
                                   double half_width, int n_points) {
  if (!x_hat.allFinite()) throw ModelError("scan centre must be finite");
  if (n_points < 1) throw ModelError("scan needs at least one point");
  if (direction.size() != x_hat.size()) throw ModelError("scan direction has the wrong length");
  const double norm = direction.norm();
  if (!(norm > 0.0)) throw ModelError("scan direction must be non-zero");
  direction /= norm;
  FlatnessCurve c;
  auto eval = [&](double offset) {
    double v = -std::numeric_limits<double>::infinity();
    try {
      v = f(x_hat + offset * direction);
    } catch (const std::exception&) {
    }
    return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
  };
  for (int k = 0; k < n_points; ++k) {
    const double offset = n_points == 1 ? 0.0 : -half_width + 2.0 * half_width * k / (n_points - 1);
    c.offsets.push_back(offset);
    c.logliks.push_back(eval(offset));
  }
  c.center = eval(0.0);
  c.drop_minus = c.center - eval(-half_width);
  c.drop_plus = c.center - eval(half_width);
  return c;
}

// ---------------------------------------------------------------------------
// Constraint scenarios

struct Scenario {
  std::string name;
  std::string description;
  ConstraintSet constraints;
};

/// S0-S4 with ratios taken at `truth`:
///   S0 none; S1 pi2.2/pi2.1; S2 lambda2.1-4/lambda1.1-3 (dementia-free death);
///   S3 S1 and S2; S4 lambda2.3-6/lambda1.2-4 (death with dementia).
inline std::vector<Scenario> dementia_scenarios(const ParameterSet& truth) {
  const MixtureModelSpec model = dementia_mixture_model();
  const ParamRef pi21 = ParamRef::pi(1, 0);
  const ParamRef pi22 = ParamRef::pi(1, 1);
  const ParamRef l1_13 = ParamRef::rate(0, 0, 2);
  const ParamRef l1_24 = ParamRef::rate(0, 1, 3);
  const ParamRef l2_14 = ParamRef::rate(1, 0, 3);
  const ParamRef l2_36 = ParamRef::rate(1, 2, 5);
  auto ratio = [&](const ParamRef& a, const ParamRef& b) { return truth.value(model, a) / truth.value(model, b); };
  std::vector<Scenario> out(5);
  out[0] = {"S0", "no constraint", {}};
  out[1] = {"S1", "pi2.2/pi2.1 known", {}};
  out[1].constraints.tie(pi22, pi21, ratio(pi22, pi21));
  out[2] = {"S2", "lambda2.1-4/lambda1.1-3 known", {}};
  out[2].constraints.tie(l2_14, l1_13, ratio(l2_14, l1_13));
  out[3] = {"S3", "S1 and S2", {}};
  out[3].constraints.tie(pi22, pi21, ratio(pi22, pi21)).tie(l2_14, l1_13, ratio(l2_14, l1_13));
  out[4] = {"S4", "lambda2.3-6/lambda1.2-4 known", {}};
  out[4].constraints.tie(l2_36, l1_24, ratio(l2_36, l1_24));
  return out;
}

/// Estimates from one replication under one scenario.
struct ReplicationFit {
  int replication = 0;
  bool ok = false;
  std::string error;
  FitResult fit;
};

struct ParameterSummary {
  ParamRef param;
  double truth = 0.0;
  double mean = 0.0;
  double empirical_se = 0.0;
  double mean_model_se = std::numeric_limits<double>::quiet_NaN();  // transformed scale
  double coverage = 0.0;         // share of successful fits whose CI contains the truth
  double boundary_fraction = 0.0;  // share of successful fits with the rate below 1e-6
  int fits = 0;
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<ReplicationFit> replications;
  std::vector<ParameterSummary> parameters;
  int failures = 0;
  double any_boundary_fraction = 0.0;
};

struct HarnessOptions {
  int n = 500;
  int replications = 50;
  std::uint64_t seed = 1;
  int threads = 1;  // replications in parallel
  SimulationDesign design = dementia_simulation_design();
  MleOptions mle;
};

inline std::vector<ParameterSummary> summarise_replications(const MixtureModelSpec& model, const ParameterSet& truth,
                                                            const std::vector<ReplicationFit>& reps) {
  std::vector<ParameterSummary> out;
  for (const ParamRef& ref : model_parameters(model)) {
    ParameterSummary s;
    s.param = ref;
    s.truth = truth.value(model, ref);
    std::vector<double> est;
    double se_sum = 0.0;
    int se_count = 0;
    int covered = 0;
    int boundary = 0;
    for (const auto& r : reps) {
      if (!r.ok) continue;
      const double v = r.fit.params_hat.value(model, ref);
      est.push_back(v);
      if (ref.kind == ParamRef::Kind::Rate && v < kBoundaryRate) ++boundary;
      if (const ParameterInterval* iv = r.fit.interval(ref)) {
        if (iv->fixed) {
          covered += std::abs(iv->estimate - s.truth) <= 1e-12 * std::max(1.0, s.truth);
        } else if (iv->lower && iv->upper && *iv->lower <= s.truth && s.truth <= *iv->upper) {
          ++covered;
        }
        if (iv->se_transformed) {
          se_sum += *iv->se_transformed;
          ++se_count;
        }
      }
    }
    s.fits = static_cast<int>(est.size());
    if (!est.empty()) {
      double mean = 0.0;
      for (double v : est) mean += v;
      mean /= static_cast<double>(est.size());
      double ss = 0.0;
      for (double v : est) ss += (v - mean) * (v - mean);
      s.mean = mean;
      s.empirical_se = est.size() > 1 ? std::sqrt(ss / static_cast<double>(est.size() - 1)) : 0.0;
      s.coverage = static_cast<double>(covered) / static_cast<double>(est.size());
      s.boundary_fraction = static_cast<double>(boundary) / static_cast<double>(est.size());
      if (se_count > 0) s.mean_model_se = se_sum / se_count;
    }
    out.push_back(s);
  }
  return out;
}

/// Simulate-and-fit replications under each scenario. Replication r uses the
/// same simulated dataset for every scenario (common random numbers). Fit
/// failures are recorded per replication and do not abort the run.
inline std::vector<ScenarioResult> scenario_harness(const MixtureModelSpec& model, const ParameterSet& truth,
                                                    const std::vector<Scenario>& scenarios,
                                                    const HarnessOptions& options) {
  if (options.replications < 1) throw ModelError("at least one replication is required");
  if (options.n < 1) throw ModelError("replication sample size must be at least 1");
  std::vector<ParameterLayout> layouts;
  for (const auto& s : scenarios) {
    layouts.emplace_back(model, s.constraints);
    layouts.back().pack(truth);  // scenario must hold at the truth
  }
  std::vector<ScenarioResult> results(scenarios.size());
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    results[k].scenario = scenarios[k];
    results[k].replications.resize(static_cast<std::size_t>(options.replications));
  }
  parallel_for(static_cast<std::size_t>(options.replications), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      SimulationDesign design = options.design;
      design.seed = splitmix64(options.seed ^ splitmix64(r + 1));
      const std::vector<SubjectRecord> data = simulate_dataset(model, truth, options.n, design, 1);
      for (std::size_t k = 0; k < scenarios.size(); ++k) {
        ReplicationFit& out = results[k].replications[r];
        out.replication = static_cast<int>(r);
        MleOptions mle = options.mle;
        mle.threads = 1;
        mle.seed = splitmix64(design.seed + k);
        try {
          out.fit = fit_mle(layouts[k], data, mle);
          out.ok = true;
        } catch (const std::exception& e) {
          out.error = e.what();
        }
      }
    }
  });
  for (auto& res : results) {
    res.parameters = summarise_replications(model, truth, res.replications);
    int ok = 0;
    int any_boundary = 0;
    for (const auto& r : res.replications) {
      if (!r.ok) {
        ++res.failures;
        continue;
      }
      ++ok;
      any_boundary += !r.fit.boundary.empty();
    }
    res.any_boundary_fraction = ok > 0 ? static_cast<double>(any_boundary) / ok : 0.0;
  }
  return results;
}

}  // namespace mhmm
