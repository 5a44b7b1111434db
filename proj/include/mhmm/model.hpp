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

// Model specification: latent components, deterministic emissions, mixture
// weights, and the parameter values attached to them.
//
// All indices in the C++ API are 0-based. Parameter *names* (used in files,
// constraints and on the command line) are 1-based:
//   psi.<m>            mixture weight of component m
//   pi<m>.<j>          initial probability of latent state j in component m
//   lambda<m>.<i>-<j>  intensity of the i -> j transition in component m

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "mhmm/ctmc.hpp"
#include "mhmm/error.hpp"

namespace mhmm {

/// Deterministic 0/1 emission: every latent state maps to exactly one
/// observed state.
class EmissionMatrix {
 public:
  EmissionMatrix() = default;
  EmissionMatrix(int obs_dim, std::vector<int> observed_of_latent)
      : obs_dim_(obs_dim), observed_(std::move(observed_of_latent)) {
    if (obs_dim_ < 1) throw ModelError("emission needs at least one observed state");
    for (int y : observed_) {
      if (y < 0 || y >= obs_dim_) throw ModelError("emission target outside observed state space");
    }
  }

  /// From explicit 0/1 rows; rejects rows that are not a single 1.
  static EmissionMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    if (rows.empty()) throw ModelError("emission matrix has no rows");
    const int obs_dim = static_cast<int>(rows.front().size());
    std::vector<int> observed;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (static_cast<int>(rows[i].size()) != obs_dim) throw ModelError("emission rows differ in length");
      int target = -1;
      for (int j = 0; j < obs_dim; ++j) {
        const int e = rows[i][j];
        if (e != 0 && e != 1) throw ModelError("emission entries must be 0 or 1 (misclassification is not supported)");
        if (e == 1) {
          if (target >= 0) throw ModelError("emission row " + std::to_string(i + 1) + " has more than one 1");
          target = j;
        }
      }
      if (target < 0) throw ModelError("emission row " + std::to_string(i + 1) + " has no 1");
      observed.push_back(target);
    }
    return {obs_dim, std::move(observed)};
  }

  int latent_dim() const noexcept { return static_cast<int>(observed_.size()); }
  int obs_dim() const noexcept { return obs_dim_; }
  int observed(int latent) const { return observed_.at(latent); }
  bool emits(int latent, int obs) const { return observed_[latent] == obs; }

  Matrix matrix() const {
    Matrix e = Matrix::Zero(latent_dim(), obs_dim_);
    for (int i = 0; i < latent_dim(); ++i) e(i, observed_[i]) = 1.0;
    return e;
  }

  bool operator==(const EmissionMatrix&) const = default;

 private:
  int obs_dim_ = 0;
  std::vector<int> observed_;
};

/// One latent disease-type process.
struct ComponentSpec {
  std::string name;
  int n_states = 0;
  std::vector<int> absorbing;
  std::vector<std::pair<int, int>> transitions;
  EmissionMatrix emission;
  std::vector<int> initial_support;

  bool is_absorbing(int s) const { return std::find(absorbing.begin(), absorbing.end(), s) != absorbing.end(); }

  int transition_index(int from, int to) const {
    for (std::size_t k = 0; k < transitions.size(); ++k) {
      if (transitions[k].first == from && transitions[k].second == to) return static_cast<int>(k);
    }
    return -1;
  }

  /// States reachable from `seeds` (inclusive) along allowed transitions.
  std::vector<int> downstream_closure(const std::vector<int>& seeds) const {
    std::vector<bool> mark(n_states, false);
    std::vector<int> stack;
    for (int s : seeds) {
      if (s >= 0 && s < n_states && !mark[s]) {
        mark[s] = true;
        stack.push_back(s);
      }
    }
    while (!stack.empty()) {
      const int s = stack.back();
      stack.pop_back();
      for (const auto& [from, to] : transitions) {
        if (from == s && !mark[to]) {
          mark[to] = true;
          stack.push_back(to);
        }
      }
    }
    std::vector<int> out;
    for (int s = 0; s < n_states; ++s) {
      if (mark[s]) out.push_back(s);
    }
    return out;
  }

  std::vector<int> all_states() const {
    std::vector<int> s(n_states);
    std::iota(s.begin(), s.end(), 0);
    return s;
  }

  /// Checks structure against an observed space with absorbing set `obs_absorbing`.
  void validate(int n_obs, const std::vector<int>& obs_absorbing) const {
    const std::string where = "component '" + name + "': ";
    if (n_states < 1 || n_states > kMaxStates) {
      throw ModelError(where + "state count must be in 1.." + std::to_string(kMaxStates));
    }
    if (emission.latent_dim() != n_states || emission.obs_dim() != n_obs) {
      throw ModelError(where + "emission matrix must be " + std::to_string(n_states) + "x" + std::to_string(n_obs));
    }
    for (int s : absorbing) {
      if (s < 0 || s >= n_states) throw ModelError(where + "absorbing state out of range");
    }
    std::vector<int> out_degree(n_states, 0);
    for (std::size_t k = 0; k < transitions.size(); ++k) {
      const auto [from, to] = transitions[k];
      if (from < 0 || from >= n_states || to < 0 || to >= n_states) {
        throw ModelError(where + "transition state out of range");
      }
      if (from == to) throw ModelError(where + "self transition");
      for (std::size_t l = 0; l < k; ++l) {
        if (transitions[l] == transitions[k]) throw ModelError(where + "duplicate transition");
      }
      ++out_degree[from];
    }
    auto obs_absorbing_has = [&](int y) {
      return std::find(obs_absorbing.begin(), obs_absorbing.end(), y) != obs_absorbing.end();
    };
    for (int s = 0; s < n_states; ++s) {
      const bool absorbing_state = is_absorbing(s);
      if (absorbing_state && out_degree[s] > 0) {
        throw ModelError(where + "absorbing state " + std::to_string(s + 1) + " has outgoing transitions");
      }
      if (!absorbing_state && out_degree[s] == 0) {
        throw ModelError(where + "state " + std::to_string(s + 1) + " has no exits but is not declared absorbing");
      }
      if (absorbing_state != obs_absorbing_has(emission.observed(s))) {
        throw ModelError(where + "latent state " + std::to_string(s + 1) +
                         (absorbing_state ? " is absorbing but emits a non-absorbing observed state"
                                          : " is transient but emits an absorbing observed state"));
      }
    }
    // Strict progressivity: Kahn's algorithm must consume every state.
    std::vector<int> indegree(n_states, 0);
    for (const auto& tr : transitions) ++indegree[tr.second];
    std::vector<int> queue;
    for (int s = 0; s < n_states; ++s) {
      if (indegree[s] == 0) queue.push_back(s);
    }
    int visited = 0;
    while (!queue.empty()) {
      const int s = queue.back();
      queue.pop_back();
      ++visited;
      for (const auto& [from, to] : transitions) {
        if (from == s && --indegree[to] == 0) queue.push_back(to);
      }
    }
    if (visited != n_states) throw ModelError(where + "transition structure has a directed cycle");
    if (initial_support.empty()) throw ModelError(where + "initial support is empty");
    for (std::size_t k = 0; k < initial_support.size(); ++k) {
      const int s = initial_support[k];
      if (s < 0 || s >= n_states) throw ModelError(where + "initial support state out of range");
      if (is_absorbing(s)) throw ModelError(where + "initial support contains an absorbing state");
      if (std::find(initial_support.begin(), initial_support.begin() + static_cast<long>(k), s) !=
          initial_support.begin() + static_cast<long>(k)) {
        throw ModelError(where + "initial support lists a state twice");
      }
    }
  }

  bool operator==(const ComponentSpec&) const = default;
};

/// M latent components sharing one observed state space.
struct MixtureModelSpec {
  int n_obs = 0;
  std::vector<int> obs_absorbing;
  std::vector<ComponentSpec> components;

  int n_components() const noexcept { return static_cast<int>(components.size()); }
  bool obs_is_absorbing(int y) const {
    return std::find(obs_absorbing.begin(), obs_absorbing.end(), y) != obs_absorbing.end();
  }

  void validate() const {
    if (components.empty()) throw ModelError("model has no components");
    if (n_obs < 1) throw ModelError("model has no observed states");
    for (int y : obs_absorbing) {
      if (y < 0 || y >= n_obs) throw ModelError("observed absorbing state out of range");
    }
    for (const auto& c : components) c.validate(n_obs, obs_absorbing);
  }

  bool operator==(const MixtureModelSpec&) const = default;
};

/// Two-type dementia model: observed dementia-free / dementia / death; type I
/// is a four-state illness-death chain, type II adds an unobservable pathology
/// state that emits "dementia-free".
inline MixtureModelSpec dementia_mixture_model() {
  MixtureModelSpec model;
  model.n_obs = 3;
  model.obs_absorbing = {2};

  ComponentSpec type1;
  type1.name = "type I";
  type1.n_states = 4;
  type1.absorbing = {2, 3};
  type1.transitions = {{0, 1}, {0, 2}, {1, 3}};
  type1.emission = EmissionMatrix(3, {0, 1, 2, 2});
  type1.initial_support = {0, 1};

  ComponentSpec type2;
  type2.name = "type II";
  type2.n_states = 6;
  type2.absorbing = {3, 4, 5};
  type2.transitions = {{0, 1}, {0, 3}, {1, 2}, {1, 4}, {2, 5}};
  type2.emission = EmissionMatrix(3, {0, 0, 1, 2, 2, 2});
  type2.initial_support = {0, 1, 2};

  model.components = {type1, type2};
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// Parameter names

struct ParamRef {
  enum class Kind { Psi = 0, Pi = 1, Rate = 2 };
  Kind kind = Kind::Psi;
  int component = 0;
  int state = 0;  // Pi: latent state; Rate: from-state
  int to = 0;     // Rate only

  static ParamRef psi(int m) { return {Kind::Psi, m, 0, 0}; }
  static ParamRef pi(int m, int j) { return {Kind::Pi, m, j, 0}; }
  static ParamRef rate(int m, int from, int to) { return {Kind::Rate, m, from, to}; }

  std::string name() const {
    switch (kind) {
      case Kind::Psi:
        return "psi." + std::to_string(component + 1);
      case Kind::Pi:
        return "pi" + std::to_string(component + 1) + "." + std::to_string(state + 1);
      case Kind::Rate:
        return "lambda" + std::to_string(component + 1) + "." + std::to_string(state + 1) + "-" +
               std::to_string(to + 1);
    }
    return {};
  }

  static ParamRef parse(std::string_view text) {
    auto fail = [&]() -> ModelError { return ModelError("malformed parameter name '" + std::string(text) + "'"); };
    auto read_int = [&](std::string_view& s) {
      int value = 0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
      if (ec != std::errc{} || ptr == s.data() || value < 1) throw fail();
      s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
      return value - 1;
    };
    auto expect = [&](std::string_view& s, char c) {
      if (s.empty() || s.front() != c) throw fail();
      s.remove_prefix(1);
    };
    std::string_view s = text;
    ParamRef ref;
    if (s.starts_with("psi.")) {
      s.remove_prefix(4);
      ref = psi(read_int(s));
    } else if (s.starts_with("lambda")) {
      s.remove_prefix(6);
      const int m = read_int(s);
      expect(s, '.');
      const int from = read_int(s);
      expect(s, '-');
      ref = rate(m, from, read_int(s));
    } else if (s.starts_with("pi")) {
      s.remove_prefix(2);
      const int m = read_int(s);
      expect(s, '.');
      ref = pi(m, read_int(s));
    } else {
      throw fail();
    }
    if (!s.empty()) throw fail();
    return ref;
  }

  auto operator<=>(const ParamRef&) const = default;
};

// ---------------------------------------------------------------------------
// Parameter values

/// Theta = {psi_m, pi^(m), Lambda^(m)}. `pi[m]` spans all latent states of
/// component m (structural zeros included); `rates[m][k]` belongs to
/// `components[m].transitions[k]`.
struct ParameterSet {
  std::vector<double> psi;
  std::vector<std::vector<double>> pi;
  std::vector<std::vector<double>> rates;

  double rate(const MixtureModelSpec& model, int m, int from, int to) const {
    const int k = model.components.at(m).transition_index(from, to);
    if (k < 0) throw ModelError("no transition " + ParamRef::rate(m, from, to).name() + " in model");
    return rates[m][k];
  }
  void set_rate(const MixtureModelSpec& model, int m, int from, int to, double value) {
    const int k = model.components.at(m).transition_index(from, to);
    if (k < 0) throw ModelError("no transition " + ParamRef::rate(m, from, to).name() + " in model");
    rates[m][k] = value;
  }

  /// Value of a named parameter (0 for structural zeros of pi).
  double value(const MixtureModelSpec& model, const ParamRef& ref) const {
    switch (ref.kind) {
      case ParamRef::Kind::Psi:
        return psi.at(ref.component);
      case ParamRef::Kind::Pi:
        return pi.at(ref.component).at(ref.state);
      case ParamRef::Kind::Rate:
        return rate(model, ref.component, ref.state, ref.to);
    }
    return 0.0;
  }

  IntensityMatrix intensity(const MixtureModelSpec& model, int m) const {
    const auto& comp = model.components[m];
    Matrix q = Matrix::Zero(comp.n_states, comp.n_states);
    for (std::size_t k = 0; k < comp.transitions.size(); ++k) {
      q(comp.transitions[k].first, comp.transitions[k].second) = rates[m][k];
    }
    return IntensityMatrix(q);
  }

  /// allow_zero_rates admits rates of exactly 0 (derived summaries of
  /// boundary estimates); the likelihood always requires positive rates.
  void validate(const MixtureModelSpec& model, double tol = 1e-9, bool allow_zero_rates = false) const {
    const int M = model.n_components();
    if (static_cast<int>(psi.size()) != M || static_cast<int>(pi.size()) != M ||
        static_cast<int>(rates.size()) != M) {
      throw ModelError("parameter set does not match the number of components");
    }
    double psi_total = 0.0;
    for (double p : psi) {
      if (!(p >= 0.0 && p <= 1.0)) throw ModelError("mixture weight outside [0,1]");
      psi_total += p;
    }
    if (std::abs(psi_total - 1.0) > tol) throw ModelError("mixture weights do not sum to 1");
    for (int m = 0; m < M; ++m) {
      const auto& comp = model.components[m];
      if (static_cast<int>(pi[m].size()) != comp.n_states) {
        throw ModelError("initial distribution of component " + std::to_string(m + 1) + " has wrong length");
      }
      double total = 0.0;
      for (int j = 0; j < comp.n_states; ++j) {
        const double p = pi[m][j];
        if (!(p >= 0.0 && p <= 1.0)) throw ModelError(ParamRef::pi(m, j).name() + " outside [0,1]");
        const bool supported =
            std::find(comp.initial_support.begin(), comp.initial_support.end(), j) != comp.initial_support.end();
        if (!supported && p != 0.0) throw ModelError(ParamRef::pi(m, j).name() + " must be 0 (outside initial support)");
        total += p;
      }
      if (std::abs(total - 1.0) > tol) {
        throw ModelError("initial distribution of component " + std::to_string(m + 1) + " does not sum to 1");
      }
      if (rates[m].size() != comp.transitions.size()) {
        throw ModelError("rate vector of component " + std::to_string(m + 1) + " has wrong length");
      }
      for (std::size_t k = 0; k < comp.transitions.size(); ++k) {
        const double r = rates[m][k];
        if (!std::isfinite(r) || r < 0.0 || (r == 0.0 && !allow_zero_rates)) {
          throw ModelError(ParamRef::rate(m, comp.transitions[k].first, comp.transitions[k].second).name() +
                           (allow_zero_rates ? " must be non-negative and finite" : " must be positive and finite"));
        }
      }
    }
  }
};

/// Every named parameter the model defines: psi, pi over the initial
/// support, and all rates.
inline std::vector<ParamRef> model_parameters(const MixtureModelSpec& model) {
  std::vector<ParamRef> refs;
  for (int m = 0; m < model.n_components(); ++m) refs.push_back(ParamRef::psi(m));
  for (int m = 0; m < model.n_components(); ++m) {
    for (int j : model.components[m].initial_support) refs.push_back(ParamRef::pi(m, j));
  }
  for (int m = 0; m < model.n_components(); ++m) {
    for (const auto& [from, to] : model.components[m].transitions) refs.push_back(ParamRef::rate(m, from, to));
  }
  return refs;
}

/// Parameter values used to generate the simulation-study data for the
/// dementia model.
inline ParameterSet dementia_simulation_truth() {
  ParameterSet p;
  p.psi = {0.5, 0.5};
  p.pi = {{0.7, 0.3, 0.0, 0.0}, {0.4, 0.3, 0.3, 0.0, 0.0, 0.0}};
  p.rates = {{2.383, 1.191, 1.787}, {1.802, 0.819, 2.457, 1.474, 2.047}};
  return p;
}

/// Point estimates reported for the dementia cohort analysis (initial
/// pathology probability of type II fixed at zero).
inline ParameterSet dementia_cohort_estimates() {
  ParameterSet p;
  p.psi = {1.0 - 0.738, 0.738};
  p.pi = {{0.977, 1.0 - 0.977, 0.0, 0.0}, {0.974, 0.0, 1.0 - 0.974, 0.0, 0.0, 0.0}};
  p.rates = {{0.055, 0.088, 0.377}, {0.153, 0.033, 0.122, 0.088, 0.254}};
  return p;
}

}  // namespace mhmm
