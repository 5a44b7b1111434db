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

// Mixture HMM likelihood for panel data with exact death times, left
// truncation and auxiliary end-state information.
//
// For one subject and component m:
//   L_m = pi P(t1) E(y1) Q_2 ... Q_K [Q_D] r / g,   g = pi P(t1) d
// with Q_k = P(t_k - t_{k-1}) E(y_k), Q_D = P(t_D - t_K) Lambda E(y_D), d the
// indicator of latent states emitting a non-absorbing observed state, and r
// the indicator of the auxiliary end-state set. The subject contributes
// log sum_m psi_m L_m. The forward vector is renormalised at every step.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/ctmc.hpp"
#include "mhmm/error.hpp"
#include "mhmm/model.hpp"
#include "mhmm/parallel.hpp"

namespace mhmm {

/// One subject's observations. States are 0-based.
struct SubjectRecord {
  std::string id;
  double entry_time = 0.0;          // t1; the first visit happens here
  std::vector<double> visit_times;  // strictly increasing, starts at entry_time
  std::vector<int> visit_states;    // non-absorbing observed states
  std::optional<double> death_time;
  int death_state = -1;                // observed absorbing state, when dead
  std::optional<double> censor_time;   // end of follow-up for survivors; carried, not used by the likelihood
  // Per component; nullopt (or a missing entry) means the full state set.
  std::vector<std::optional<std::vector<int>>> end_states;

  bool dead() const noexcept { return death_time.has_value(); }

  const std::optional<std::vector<int>>& end_state_set(int m) const {
    static const std::optional<std::vector<int>> kFull;
    return m < static_cast<int>(end_states.size()) ? end_states[m] : kFull;
  }

  void validate(const MixtureModelSpec& model) const {
    if (!std::isfinite(entry_time) || entry_time < 0.0) throw ModelError("entry time must be finite and >= 0");
    if (visit_times.empty()) throw ModelError("subject has no visits");
    if (visit_times.size() != visit_states.size()) throw ModelError("visit times and states differ in length");
    if (visit_times.front() != entry_time) throw ModelError("first visit must be at the entry time");
    for (std::size_t k = 0; k < visit_times.size(); ++k) {
      if (!std::isfinite(visit_times[k])) throw ModelError("visit time is not finite");
      if (k > 0 && !(visit_times[k] > visit_times[k - 1])) throw ModelError("visit times must be strictly increasing");
      const int y = visit_states[k];
      if (y < 0 || y >= model.n_obs) throw ModelError("visit state outside the observed state space");
      if (model.obs_is_absorbing(y)) throw ModelError("visit state is absorbing; record death as an exact event");
    }
    if (death_time) {
      if (!std::isfinite(*death_time) || !(*death_time > visit_times.back())) {
        throw ModelError("death time must be finite and after the last visit");
      }
      if (death_state < 0 || death_state >= model.n_obs || !model.obs_is_absorbing(death_state)) {
        throw ModelError("death state must be an absorbing observed state");
      }
      if (censor_time) throw ModelError("subject is both dead and censored");
    } else {
      if (death_state >= 0) throw ModelError("death state given without a death time");
      if (censor_time && !(*censor_time >= visit_times.back())) {
        throw ModelError("censoring time precedes the last visit");
      }
    }
    if (static_cast<int>(end_states.size()) > model.n_components()) {
      throw ModelError("end-state sets given for more components than the model has");
    }
    bool any_nonempty = static_cast<int>(end_states.size()) < model.n_components();
    for (std::size_t m = 0; m < end_states.size(); ++m) {
      if (!end_states[m]) {
        any_nonempty = true;
        continue;
      }
      for (int s : *end_states[m]) {
        if (s < 0 || s >= model.components[m].n_states) throw ModelError("end-state set contains an unknown state");
      }
      if (!end_states[m]->empty()) any_nonempty = true;
    }
    if (!any_nonempty) throw ModelError("every component's end-state set is empty");
  }
};

struct LogLikelihood {
  double value = 0.0;
  std::vector<double> per_subject;
};

// ---------------------------------------------------------------------------
// Single-factor building blocks (reference implementations of each matrix).

/// d^(m): 1 for latent states emitting a non-absorbing observed state.
inline ColVector alive_indicator(const MixtureModelSpec& model, int m) {
  const auto& comp = model.components[m];
  ColVector d(comp.n_states);
  for (int i = 0; i < comp.n_states; ++i) d[i] = model.obs_is_absorbing(comp.emission.observed(i)) ? 0.0 : 1.0;
  return d;
}

/// g(theta^(m); t1) = pi^(m) P^(m)(0, t1) d^(m).
inline double sampling_probability(const MixtureModelSpec& model, const ParameterSet& params, int m, double t1) {
  const auto& comp = model.components.at(m);
  const Matrix p = transition_probability(params.intensity(model, m), t1).probs();
  RowVector pi(comp.n_states);
  for (int j = 0; j < comp.n_states; ++j) pi[j] = params.pi[m][j];
  return (pi * p * alive_indicator(model, m))(0, 0);
}

/// Q_k = P(t_k - t_prev) diag(e_{., y_k}).
inline Matrix visit_matrix(const MixtureModelSpec& model, const ParameterSet& params, int m, double t_prev,
                           double t_k, int y_k) {
  if (y_k < 0 || y_k >= model.n_obs) throw ModelError("observed state outside the observed state space");
  if (t_k < t_prev) throw ModelError("visit interval must have non-negative length");
  const auto& comp = model.components.at(m);
  Matrix q = transition_probability(params.intensity(model, m), t_k - t_prev).probs();
  for (int j = 0; j < comp.n_states; ++j) {
    if (!comp.emission.emits(j, y_k)) q.col(j).setZero();
  }
  return q;
}

/// Q_D = P(t_D - t_K) Lambda diag(e_{., y_D}).
inline Matrix death_matrix(const MixtureModelSpec& model, const ParameterSet& params, int m, double t_last,
                           double t_death, int death_state) {
  if (death_state < 0 || death_state >= model.n_obs || !model.obs_is_absorbing(death_state)) {
    throw ModelError("death state must be an absorbing observed state");
  }
  if (!(t_death > t_last)) throw ModelError("death time must follow the last visit");
  const auto& comp = model.components.at(m);
  const IntensityMatrix q = params.intensity(model, m);
  Matrix out = transition_probability(q, t_death - t_last).probs() * q.matrix();
  for (int j = 0; j < comp.n_states; ++j) {
    if (!comp.emission.emits(j, death_state)) out.col(j).setZero();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward evaluator

/// Precomputed per-parameter state for repeated subject evaluations. Caches
/// P(dt) per component, so one evaluator must not be shared across threads.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const MixtureModelSpec& model, const ParameterSet& params) : model_(model) {
    params.validate(model);
    const int M = model.n_components();
    comps_.resize(M);
    for (int m = 0; m < M; ++m) {
      const auto& spec = model.components[m];
      Comp& c = comps_[m];
      c.n = spec.n_states;
      c.psi = params.psi[m];
      c.q = params.intensity(model, m);
      c.pi.resize(c.n);
      for (int j = 0; j < c.n; ++j) c.pi[j] = params.pi[m][j];
      c.alive = alive_indicator(model, m);
      c.emits.assign(model.n_obs, RowVector::Zero(c.n));
      for (int j = 0; j < c.n; ++j) c.emits[spec.emission.observed(j)][j] = 1.0;
    }
  }

  /// Natural log of the subject's likelihood contribution; -inf if it is 0.
  double subject_loglik(const SubjectRecord& rec) {
    const int M = static_cast<int>(comps_.size());
    double terms[64];
    if (M > 64) throw ModelError("too many mixture components");
    bool any_conditioning = false;
    for (int m = 0; m < M; ++m) {
      terms[m] = -std::numeric_limits<double>::infinity();
      Comp& c = comps_[m];
      if (c.psi <= 0.0) continue;
      RowVector alpha = c.pi * P(m, rec.entry_time);
      const double g = alpha.dot(c.alive.transpose());
      if (!(g > 0.0)) continue;
      any_conditioning = true;
      double log_scale = -std::log(g);
      alpha = alpha.cwiseProduct(c.emits[rec.visit_states[0]]);
      if (!renormalise(alpha, log_scale)) continue;
      bool zero = false;
      for (std::size_t k = 1; k < rec.visit_times.size(); ++k) {
        alpha = alpha * P(m, rec.visit_times[k] - rec.visit_times[k - 1]);
        alpha = alpha.cwiseProduct(c.emits[rec.visit_states[k]]);
        if (!renormalise(alpha, log_scale)) {
          zero = true;
          break;
        }
      }
      if (zero) continue;
      if (rec.dead()) {
        RowVector a = alpha * P(m, *rec.death_time - rec.visit_times.back());
        alpha = (a * c.q.matrix()).cwiseProduct(c.emits[rec.death_state]);
      }
      double end_mass = 0.0;
      if (const auto& set = rec.end_state_set(m)) {
        for (int j : *set) end_mass += alpha[j];
      } else {
        end_mass = alpha.sum();
      }
      if (!(end_mass > 0.0)) continue;
      terms[m] = std::log(c.psi) + log_scale + std::log(end_mass);
    }
    if (!any_conditioning) {
      throw DegenerateConditioning("every component with positive weight has zero sampling probability at entry time " +
                                   std::to_string(rec.entry_time));
    }
    double top = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < M; ++m) top = std::max(top, terms[m]);
    if (top == -std::numeric_limits<double>::infinity()) return top;
    double acc = 0.0;
    for (int m = 0; m < M; ++m) acc += std::exp(terms[m] - top);
    return top + std::log(acc);
  }

 private:
  struct Comp {
    int n = 0;
    double psi = 0.0;
    IntensityMatrix q;
    RowVector pi;
    ColVector alive;
    std::vector<RowVector> emits;  // emits[y][j] = 1 if latent j emits y
    std::map<double, Matrix> cache;
  };

  const Matrix& P(int m, double dt) {
    auto& cache = comps_[m].cache;
    auto it = cache.find(dt);
    if (it == cache.end()) it = cache.emplace(dt, transition_probability(comps_[m].q, dt).probs()).first;
    return it->second;
  }

  static bool renormalise(RowVector& alpha, double& log_scale) {
    const double s = alpha.sum();
    if (!(s > 0.0)) return false;
    alpha /= s;
    log_scale += std::log(s);
    return true;
  }

  const MixtureModelSpec& model_;
  std::vector<Comp> comps_;
};

inline double subject_loglik(const MixtureModelSpec& model, const ParameterSet& params, const SubjectRecord& record) {
  record.validate(model);
  LikelihoodEvaluator eval(model, params);
  return eval.subject_loglik(record);
}

/// Sum of floating-point values that does not depend on their order: sorted,
/// then compensated (Neumaier) summation.
inline double order_independent_sum(std::vector<double> values) {
  for (double v : values) {
    if (v == -std::numeric_limits<double>::infinity()) return v;
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Sum of subject log-likelihoods. The total is bit-identical under record
/// permutation and for any thread count. Per-subject failures are rethrown as
/// SubjectError carrying the record's position.
inline LogLikelihood dataset_loglik(const MixtureModelSpec& model, const ParameterSet& params,
                                    const std::vector<SubjectRecord>& records, int threads = 0) {
  LogLikelihood out;
  out.per_subject.assign(records.size(), 0.0);
  params.validate(model);
  parallel_for(records.size(), threads, [&](std::size_t begin, std::size_t end) {
    LikelihoodEvaluator eval(model, params);
    for (std::size_t i = begin; i < end; ++i) {
      try {
        records[i].validate(model);
        out.per_subject[i] = eval.subject_loglik(records[i]);
      } catch (const DegenerateConditioning& e) {
        throw DegenerateConditioning("subject " + std::to_string(i) + ": " + e.what());
      } catch (const SubjectError&) {
        throw;
      } catch (const ModelError& e) {
        throw SubjectError(i, e.what());
      } catch (const NumericalError& e) {
        throw NumericalError("subject " + std::to_string(i) + ": " + e.what());
      }
    }
  });
  out.value = order_independent_sum(out.per_subject);
  return out;
}

}  // namespace mhmm
