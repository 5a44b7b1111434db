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

// Prevalence, cumulative incidence and simple derived quantities from a
// parameter set. Times are measured from the time origin; reported ages are
// origin + t.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mhmm/ctmc.hpp"
#include "mhmm/error.hpp"
#include "mhmm/model.hpp"

namespace mhmm {

namespace detail {

/// Occupancy pi^(m) exp(t Lambda^(m)).
inline RowVector occupancy(const MixtureModelSpec& model, const ParameterSet& params, int m, double t) {
  const int n = model.components[m].n_states;
  RowVector pi(n);
  for (int j = 0; j < n; ++j) pi[j] = params.pi[m][j];
  return pi * transition_probability(params.intensity(model, m), t).probs();
}

inline std::string format_age(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// Numerator and denominator of the type-m prevalence at time t.
struct PrevalenceTerms {
  std::vector<double> numerators;  // per component: psi_m * mass emitting the disease state
  double alive = 0.0;              // sum_m psi_m * mass emitting a non-absorbing observed state
};

inline PrevalenceTerms prevalence_terms(const MixtureModelSpec& model, const ParameterSet& params, double t,
                                        int disease_obs_state) {
  if (disease_obs_state < 0 || disease_obs_state >= model.n_obs || model.obs_is_absorbing(disease_obs_state)) {
    throw ModelError("disease state must be a non-absorbing observed state");
  }
  if (!(t >= 0.0) || !std::isfinite(t)) throw ModelError("prevalence time must be finite and >= 0");
  PrevalenceTerms terms;
  for (int m = 0; m < model.n_components(); ++m) {
    const auto& comp = model.components[m];
    const RowVector occ = detail::occupancy(model, params, m, t);
    double disease = 0.0;
    double alive = 0.0;
    for (int s = 0; s < comp.n_states; ++s) {
      const int y = comp.emission.observed(s);
      if (y == disease_obs_state) disease += occ[s];
      if (!model.obs_is_absorbing(y)) alive += occ[s];
    }
    terms.numerators.push_back(params.psi[m] * disease);
    terms.alive += params.psi[m] * alive;
  }
  return terms;
}

/// P(component m, Y(t) = disease | Y(t) not absorbing).
inline double prevalence_type(const MixtureModelSpec& model, const ParameterSet& params, double t, int m,
                              int disease_obs_state) {
  if (m < 0 || m >= model.n_components()) throw ModelError("component index out of range");
  const PrevalenceTerms terms = prevalence_terms(model, params, t, disease_obs_state);
  if (!(terms.alive > 0.0)) {
    throw NumericalError("prevalence undefined at t = " + detail::format_age(t) + ": no mass in living states");
  }
  return terms.numerators[static_cast<std::size_t>(m)] / terms.alive;
}

struct PrevalenceCurve {
  std::vector<double> ages;
  std::vector<double> all_cause;
  std::vector<std::vector<double>> by_type;  // by_type[m][k]
};

/// Prevalence at ages (t = age - origin), by type and summed.
inline PrevalenceCurve prevalence_curve(const MixtureModelSpec& model, const ParameterSet& params,
                                        const std::vector<double>& ages, double origin, int disease_obs_state) {
  if (ages.empty()) throw ModelError("age grid is empty");
  for (std::size_t k = 1; k < ages.size(); ++k) {
    if (!(ages[k] > ages[k - 1])) throw ModelError("age grid must be strictly increasing");
  }
  if (ages.front() < origin) throw ModelError("ages must not precede the origin " + detail::format_age(origin));
  PrevalenceCurve c;
  c.ages = ages;
  c.by_type.assign(static_cast<std::size_t>(model.n_components()), {});
  for (double age : ages) {
    const PrevalenceTerms terms = prevalence_terms(model, params, age - origin, disease_obs_state);
    if (!(terms.alive > 0.0)) {
      throw NumericalError("prevalence undefined at age " + detail::format_age(age) + ": no mass in living states");
    }
    double sum = 0.0;
    for (int m = 0; m < model.n_components(); ++m) {
      const double v = terms.numerators[static_cast<std::size_t>(m)] / terms.alive;
      c.by_type[static_cast<std::size_t>(m)].push_back(v);
      sum += v;
    }
    c.all_cause.push_back(sum);
  }
  return c;
}

/// First non-absorbing latent state of component m.
inline int default_start_state(const ComponentSpec& comp) {
  for (int s = 0; s < comp.n_states; ++s) {
    if (!comp.is_absorbing(s)) return s;
  }
  throw ModelError("component has no transient state");
}

/// Latent states emitting the disease state, closed downstream.
inline std::vector<int> disease_targets(const ComponentSpec& comp, int disease_obs_state) {
  std::vector<int> seeds;
  for (int s = 0; s < comp.n_states; ++s) {
    if (comp.emission.observed(s) == disease_obs_state) seeds.push_back(s);
  }
  return comp.downstream_closure(seeds);
}

/// P(Z^(m)(t) in targets | Z^(m)(0) = start). targets must be closed
/// downstream so that occupancy now equals having ever entered.
inline double cumulative_incidence(const MixtureModelSpec& model, const ParameterSet& params, double t, int m,
                                   const std::vector<int>& targets, std::optional<int> start = std::nullopt) {
  if (m < 0 || m >= model.n_components()) throw ModelError("component index out of range");
  const auto& comp = model.components[m];
  for (int s : targets) {
    if (s < 0 || s >= comp.n_states) throw ModelError("target state out of range");
  }
  std::vector<int> closure = comp.downstream_closure(targets);
  std::vector<int> sorted = targets;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (closure != sorted) throw ModelError("target set is not closed under downstream transitions");
  const int s0 = start ? *start : default_start_state(comp);
  if (s0 < 0 || s0 >= comp.n_states) throw ModelError("start state out of range");
  if (!(t >= 0.0) || !std::isfinite(t)) throw ModelError("incidence time must be finite and >= 0");
  const auto P = transition_probability(params.intensity(model, m), t);
  double v = 0.0;
  for (int s : targets) v += P(s0, s);
  return std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Derived quantities

struct SojournTime {
  int component = 0;
  int state = 0;
  double mean = 0.0;  // 1 / total exit rate
  bool infinite = false;
};

struct TransitionTime {
  ParamRef rate;
  double mean = 0.0;  // 1 / lambda
  bool infinite = false;
};

struct MortalityRatio {
  int component = 0;
  ParamRef numerator;    // death rate with disease
  ParamRef denominator;  // death rate without disease
  double ratio = 0.0;
};

struct DerivedQuantities {
  std::vector<SojournTime> sojourns;
  std::vector<TransitionTime> transition_times;
  std::vector<MortalityRatio> mortality_ratios;  // two-type dementia model only
  std::vector<double> psi;
};

inline DerivedQuantities derived_quantities(const MixtureModelSpec& model, const ParameterSet& params) {
  params.validate(model, 1e-9, true);
  DerivedQuantities d;
  d.psi = params.psi;
  for (int m = 0; m < model.n_components(); ++m) {
    const auto& comp = model.components[m];
    for (int s = 0; s < comp.n_states; ++s) {
      if (comp.is_absorbing(s)) continue;
      double exit = 0.0;
      for (std::size_t k = 0; k < comp.transitions.size(); ++k) {
        if (comp.transitions[k].first == s) exit += params.rates[m][k];
      }
      SojournTime st{m, s, exit > 0.0 ? 1.0 / exit : std::numeric_limits<double>::infinity(), !(exit > 0.0)};
      d.sojourns.push_back(st);
    }
    for (std::size_t k = 0; k < comp.transitions.size(); ++k) {
      const double r = params.rates[m][k];
      const auto [from, to] = comp.transitions[k];
      d.transition_times.push_back(
          {ParamRef::rate(m, from, to), r > 0.0 ? 1.0 / r : std::numeric_limits<double>::infinity(), !(r > 0.0)});
    }
  }
  if (model == dementia_mixture_model()) {
    const std::pair<ParamRef, ParamRef> pairs[] = {{ParamRef::rate(0, 1, 3), ParamRef::rate(0, 0, 2)},
                                                   {ParamRef::rate(1, 2, 5), ParamRef::rate(1, 0, 3)}};
    for (int m = 0; m < 2; ++m) {
      const auto& [num, den] = pairs[m];
      const double b = params.value(model, den);
      d.mortality_ratios.push_back(
          {m, num, den, b > 0.0 ? params.value(model, num) / b : std::numeric_limits<double>::infinity()});
    }
  }
  return d;
}

}  // namespace mhmm
