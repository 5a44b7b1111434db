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

// Synthetic panel data from a mixture of progressive CTMCs.
//
// Subject i draws everything from substream i of the design seed, so a
// subject's record does not depend on n or on the thread count.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/error.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/model.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/rng.hpp"

namespace mhmm {

enum class Disclosure {
  None,         // no auxiliary information
  Component,    // the true component is revealed: A^(true) full, others empty
  EndStateSet,  // marker-state finding (e.g. neuropathology) restricts end states
};

/// Entry time t1: a fixed value, or uniform on [low, high].
struct EntryRule {
  double low = 0.0;
  double high = 0.0;

  static EntryRule fixed(double t) { return {t, t}; }
  static EntryRule uniform(double lo, double hi) { return {lo, hi}; }
  bool is_fixed() const noexcept { return low == high; }
  double draw(CounterRng& rng) const { return is_fixed() ? low : low + (high - low) * rng.uniform(); }
};

struct SimulationDesign {
  std::vector<double> visit_grid = {0.0, 0.25, 0.5, 0.75, 1.0};  // offsets from entry
  double admin_end = 1.0;                                          // follow-up length after entry
  EntryRule entry = EntryRule::fixed(0.0);
  Disclosure disclosure = Disclosure::Component;
  double p_disclose = 0.8;  // applied to deceased subjects only
  // EndStateSet mode: per component, latent states whose occupancy the
  // finding reveals. Missing entries mean "no marker states".
  std::vector<std::vector<int>> marker_states;
  std::uint64_t seed = 1;

  void validate(const MixtureModelSpec& model) const {
    if (visit_grid.empty() || visit_grid.front() != 0.0) throw ModelError("visit grid must start at 0 (the entry visit)");
    for (std::size_t k = 0; k < visit_grid.size(); ++k) {
      if (!std::isfinite(visit_grid[k])) throw ModelError("visit grid time is not finite");
      if (k > 0 && !(visit_grid[k] > visit_grid[k - 1])) throw ModelError("visit grid must be strictly increasing");
    }
    if (!std::isfinite(admin_end) || visit_grid.back() > admin_end) {
      throw ModelError("visit grid must lie within [0, admin_end]");
    }
    if (!(entry.low >= 0.0) || !(entry.high >= entry.low) || !std::isfinite(entry.high)) {
      throw ModelError("entry rule must satisfy 0 <= low <= high < inf");
    }
    if (!(p_disclose >= 0.0 && p_disclose <= 1.0)) throw ModelError("disclosure probability must lie in [0,1]");
    if (static_cast<int>(marker_states.size()) > model.n_components()) {
      throw ModelError("marker states given for more components than the model has");
    }
    for (std::size_t m = 0; m < marker_states.size(); ++m) {
      for (int s : marker_states[m]) {
        if (s < 0 || s >= model.components[m].n_states) throw ModelError("marker state out of range");
      }
    }
  }
};

/// Design of the two-type dementia simulation study: visits at 0, 0.25, ...,
/// 1, entry at 0, component revealed for 80% of deaths.
inline SimulationDesign dementia_simulation_design(std::uint64_t seed = 1) {
  SimulationDesign d;
  d.seed = seed;
  d.marker_states = {{}, {1}};
  return d;
}

struct LatentPath {
  int component = 0;
  std::vector<double> times;  // times[0] = 0; times[k] = entry time of states[k]
  std::vector<int> states;

  int state_at(double t) const {
    int s = states.front();
    for (std::size_t k = 1; k < times.size() && times[k] <= t; ++k) s = states[k];
    return s;
  }
  bool visited(int state) const { return std::find(states.begin(), states.end(), state) != states.end(); }
};

inline LatentPath simulate_path(const MixtureModelSpec& model, const ParameterSet& params, CounterRng& rng) {
  auto categorical = [&](const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = rng.uniform() * total;
    int last = -1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last = static_cast<int>(i);
      if (u < w[i]) return last;
      u -= w[i];
    }
    return last;
  };
  LatentPath path;
  path.component = categorical(params.psi);
  const int m = path.component;
  const auto& comp = model.components[m];
  int state = categorical(params.pi[m]);
  double t = 0.0;
  path.times.push_back(t);
  path.states.push_back(state);
  while (!comp.is_absorbing(state)) {
    std::vector<double> exits(comp.n_states, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < comp.transitions.size(); ++k) {
      if (comp.transitions[k].first == state) {
        exits[comp.transitions[k].second] = params.rates[m][k];
        total += params.rates[m][k];
      }
    }
    t += rng.exponential(total);
    state = categorical(exits);
    path.times.push_back(t);
    path.states.push_back(state);
  }
  return path;
}

/// Latent states reachable from the initial support without entering the
/// downstream closure of `markers`.
inline std::vector<int> states_avoiding(const ComponentSpec& comp, const std::vector<int>& markers) {
  const std::vector<int> blocked = comp.downstream_closure(markers);
  auto is_blocked = [&](int s) { return std::find(blocked.begin(), blocked.end(), s) != blocked.end(); };
  std::vector<bool> mark(comp.n_states, false);
  std::vector<int> stack;
  for (int s : comp.initial_support) {
    if (!is_blocked(s) && !mark[s]) {
      mark[s] = true;
      stack.push_back(s);
    }
  }
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (const auto& [from, to] : comp.transitions) {
      if (from == s && !mark[to] && !is_blocked(to)) {
        mark[to] = true;
        stack.push_back(to);
      }
    }
  }
  std::vector<int> out;
  for (int s = 0; s < comp.n_states; ++s) {
    if (mark[s]) out.push_back(s);
  }
  return out;
}

/// End-state sets implied by a marker finding (present or absent).
inline std::vector<std::optional<std::vector<int>>> marker_end_states(const MixtureModelSpec& model,
                                                                      const std::vector<std::vector<int>>& markers,
                                                                      bool present) {
  std::vector<std::optional<std::vector<int>>> out(model.n_components());
  for (int m = 0; m < model.n_components(); ++m) {
    const auto& comp = model.components[m];
    const std::vector<int> mk = m < static_cast<int>(markers.size()) ? markers[m] : std::vector<int>{};
    if (present) {
      out[m] = mk.empty() ? std::vector<int>{} : comp.downstream_closure(mk);
    } else {
      out[m] = mk.empty() ? comp.all_states() : states_avoiding(comp, mk);
    }
  }
  return out;
}

/// Panel observation of a path entering the study at `entry`. Returns nullopt
/// when the subject is dead (absorbed) at entry.
inline std::optional<SubjectRecord> panel_observe(const LatentPath& path, const MixtureModelSpec& model,
                                                  const SimulationDesign& design, double entry, CounterRng& rng) {
  const auto& comp = model.components[path.component];
  const bool absorbed = comp.is_absorbing(path.states.back());
  const double death = absorbed ? path.times.back() : std::numeric_limits<double>::infinity();
  if (death <= entry) return std::nullopt;

  SubjectRecord r;
  r.entry_time = entry;
  for (double offset : design.visit_grid) {
    const double t = entry + offset;
    if (t >= death) break;
    r.visit_times.push_back(t);
    r.visit_states.push_back(comp.emission.observed(path.state_at(t)));
  }
  const double end = entry + design.admin_end;
  if (death <= end) {
    r.death_time = death;
    r.death_state = comp.emission.observed(path.states.back());
    if (design.disclosure != Disclosure::None && rng.uniform() < design.p_disclose) {
      if (design.disclosure == Disclosure::Component) {
        r.end_states.assign(model.n_components(), std::vector<int>{});
        r.end_states[path.component] = std::nullopt;
      } else {
        const std::vector<int> mk = path.component < static_cast<int>(design.marker_states.size())
                                        ? design.marker_states[path.component]
                                        : std::vector<int>{};
        bool present = false;
        for (int s : mk) present = present || path.visited(s);
        r.end_states = marker_end_states(model, design.marker_states, present);
      }
    }
  } else {
    r.censor_time = end;
  }
  return r;
}

struct SimulatedSubject {
  LatentPath path;
  SubjectRecord record;
  int attempts = 0;
};

inline constexpr int kMaxEntryAttempts = 100000;

/// One accepted subject drawn from substream `index` of the design seed.
inline SimulatedSubject simulate_subject(const MixtureModelSpec& model, const ParameterSet& params,
                                         const SimulationDesign& design, std::uint64_t index) {
  CounterRng rng = CounterRng(design.seed).substream(index);
  for (int attempt = 1; attempt <= kMaxEntryAttempts; ++attempt) {
    const double entry = design.entry.draw(rng);
    LatentPath path = simulate_path(model, params, rng);
    if (auto rec = panel_observe(path, model, design, entry, rng)) {
      rec->id = std::to_string(index + 1);
      return {std::move(path), std::move(*rec), attempt};
    }
  }
  throw ModelError("simulation design is degenerate: rejection rate above 0.999 (no subject alive at entry after " +
                   std::to_string(kMaxEntryAttempts) + " draws)");
}

inline std::vector<SimulatedSubject> simulate_subjects(const MixtureModelSpec& model, const ParameterSet& params,
                                                       int n, const SimulationDesign& design, int threads = 1) {
  if (n < 1) throw ModelError("number of subjects must be at least 1");
  model.validate();
  params.validate(model);
  design.validate(model);
  std::vector<SimulatedSubject> out(static_cast<std::size_t>(n));
  parallel_for(out.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = simulate_subject(model, params, design, i);
  });
  long long attempts = 0;
  for (const auto& s : out) attempts += s.attempts;
  if (static_cast<double>(n) / static_cast<double>(attempts) < 1e-3) {
    throw ModelError("simulation design is degenerate: rejection rate above 0.999");
  }
  return out;
}

inline std::vector<SubjectRecord> simulate_dataset(const MixtureModelSpec& model, const ParameterSet& params, int n,
                                                   const SimulationDesign& design, int threads = 1) {
  std::vector<SubjectRecord> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (auto& s : simulate_subjects(model, params, n, design, threads)) out.push_back(std::move(s.record));
  return out;
}

}  // namespace mhmm
