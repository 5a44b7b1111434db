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

// Parameter constraints and the unconstrained ("free") coordinate system.
//
// Free coordinates:
//   * log of every free rate;
//   * for each probability group (psi, and pi^(m) over its initial support),
//     log(p_j / p_ref) for every free member except the reference, which is
//     the first free member. With two free members this is the logit.
// Constrained parameters never appear in the free vector. A parameter fixed
// at probability 0 is dropped from its group as a structural zero.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mhmm/error.hpp"
#include "mhmm/model.hpp"

namespace mhmm {

/// param == value.
struct FixValue {
  ParamRef param;
  double value = 0.0;
};

/// param == ratio * reference.
struct FixRatio {
  ParamRef param;
  ParamRef reference;
  double ratio = 1.0;
};

using Constraint = std::variant<FixValue, FixRatio>;

struct ConstraintSet {
  std::vector<Constraint> items;

  ConstraintSet& fix(ParamRef param, double value) {
    items.emplace_back(FixValue{param, value});
    return *this;
  }
  ConstraintSet& tie(ParamRef param, ParamRef reference, double ratio) {
    items.emplace_back(FixRatio{param, reference, ratio});
    return *this;
  }
  bool empty() const noexcept { return items.empty(); }
};

/// Textual form used on the command line: "pi2.2=0" or "pi2.2/pi2.1=0.75".
inline std::string describe(const Constraint& c) {
  auto number = [](double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  if (const auto* f = std::get_if<FixValue>(&c)) return f->param.name() + "=" + number(f->value);
  const auto& r = std::get<FixRatio>(c);
  return r.param.name() + "/" + r.reference.name() + "=" + number(r.ratio);
}

inline Constraint parse_constraint(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ModelError("constraint '" + std::string(text) + "' has no '='");
  const std::string_view lhs = text.substr(0, eq);
  const std::string value_text(text.substr(eq + 1));
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(value_text.data(), value_text.data() + value_text.size(), value);
  if (ec != std::errc{} || ptr != value_text.data() + value_text.size()) {
    throw ModelError("constraint '" + std::string(text) + "' has a malformed value");
  }
  const auto slash = lhs.find('/');
  if (slash == std::string_view::npos) return FixValue{ParamRef::parse(lhs), value};
  return FixRatio{ParamRef::parse(lhs.substr(0, slash)), ParamRef::parse(lhs.substr(slash + 1)), value};
}

/// One free coordinate of the unconstrained parameterisation.
struct Coordinate {
  ParamRef param;                     // the parameter this coordinate drives
  std::optional<ParamRef> reference;  // probability coordinates: log(param / reference)

  bool is_rate() const noexcept { return param.kind == ParamRef::Kind::Rate; }
  std::string label() const {
    if (is_rate()) return "log(" + param.name() + ")";
    return "log(" + param.name() + "/" + reference->name() + ")";
  }
};

/// Compiled constraint set: maps free vectors to parameter sets and back.
class ParameterLayout {
 public:
  enum class Status { Free, Fixed, Tied, Zero };

  ParameterLayout(MixtureModelSpec model, ConstraintSet constraints)
      : model_(std::move(model)), constraints_(std::move(constraints)) {
    model_.validate();
    build();
  }

  const MixtureModelSpec& model() const noexcept { return model_; }
  const ConstraintSet& constraints() const noexcept { return constraints_; }
  int free_dimension() const noexcept { return static_cast<int>(coordinates_.size()); }
  const std::vector<Coordinate>& coordinates() const noexcept { return coordinates_; }

  /// Index of the coordinate driven by `ref`, or -1.
  int coordinate_of(const ParamRef& ref) const {
    for (std::size_t c = 0; c < coordinates_.size(); ++c) {
      if (coordinates_[c].param == ref) return static_cast<int>(c);
    }
    return -1;
  }

  Status status(const ParamRef& ref) const { return slots_.at(slot_of(ref)).status; }

  /// Named parameters that are not structural zeros.
  std::vector<ParamRef> natural_parameters() const {
    std::vector<ParamRef> out;
    for (const auto& s : slots_) {
      if (s.status != Status::Zero) out.push_back(s.ref);
    }
    return out;
  }

  /// Coordinate indices grouped for blocked samplers: mixture weights, each
  /// initial distribution, then each component's rates.
  std::vector<std::vector<int>> blocks() const {
    const int M = model_.n_components();
    std::vector<std::vector<int>> out(1 + 2 * static_cast<std::size_t>(M));
    for (std::size_t c = 0; c < coordinates_.size(); ++c) {
      const ParamRef& p = coordinates_[c].param;
      std::size_t b = 0;
      if (p.kind == ParamRef::Kind::Pi) b = 1 + static_cast<std::size_t>(p.component);
      if (p.kind == ParamRef::Kind::Rate) b = 1 + static_cast<std::size_t>(M + p.component);
      out[b].push_back(static_cast<int>(c));
    }
    std::erase_if(out, [](const auto& v) { return v.empty(); });
    return out;
  }

  Eigen::VectorXd pack(const ParameterSet& params) const {
    params.validate(model_);
    for (const auto& s : slots_) {
      const double v = params.value(model_, s.ref);
      bool ok = true;
      switch (s.status) {
        case Status::Zero:
          ok = std::abs(v) <= 1e-8;
          break;
        case Status::Fixed:
          ok = std::abs(v - s.value) <= 1e-8 * std::max(1.0, std::abs(s.value));
          break;
        case Status::Tied: {
          const double target = s.factor * params.value(model_, slots_[s.root].ref);
          ok = std::abs(v - target) <= 1e-8 * std::max(1.0, std::abs(v));
          break;
        }
        case Status::Free:
          break;
      }
      if (!ok) throw ModelError("parameter set violates the constraint on " + s.ref.name());
    }
    Eigen::VectorXd x(free_dimension());
    for (std::size_t c = 0; c < coordinates_.size(); ++c) {
      const Coordinate& coord = coordinates_[c];
      const double v = params.value(model_, coord.param);
      if (coord.is_rate()) {
        x[static_cast<Eigen::Index>(c)] = std::log(v);
      } else {
        const double ref = params.value(model_, *coord.reference);
        if (!(v > 0.0) || !(ref > 0.0)) {
          throw ModelError("probability " + coord.param.name() + " on the boundary cannot be packed");
        }
        x[static_cast<Eigen::Index>(c)] = std::log(v) - std::log(ref);
      }
    }
    return x;
  }

  ParameterSet unpack(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != free_dimension()) {
      throw ModelError("free vector has length " + std::to_string(x.size()) + ", expected " +
                       std::to_string(free_dimension()));
    }
    for (double v : x) {
      if (!std::isfinite(v)) throw ModelError("free vector has a non-finite coordinate");
      if (std::abs(v) > 700.0) throw ModelError("free coordinate magnitude exceeds 700 (exp overflow guard)");
    }
    const int M = model_.n_components();
    ParameterSet p;
    p.psi.assign(M, 0.0);
    p.pi.resize(M);
    p.rates.resize(M);
    for (int m = 0; m < M; ++m) {
      p.pi[m].assign(model_.components[m].n_states, 0.0);
      p.rates[m].assign(model_.components[m].transitions.size(), 0.0);
    }

    std::vector<double> root_value(slots_.size(), 0.0);  // rates: value; probabilities: log-weight
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const Slot& s = slots_[i];
      if (s.status != Status::Free) continue;
      root_value[i] = s.coordinate >= 0 ? x[s.coordinate] : 0.0;
      if (s.ref.kind == ParamRef::Kind::Rate) root_value[i] = std::exp(root_value[i]);
    }

    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const Slot& s = slots_[i];
      if (s.ref.kind != ParamRef::Kind::Rate) continue;
      const double v = s.status == Status::Free    ? root_value[i]
                       : s.status == Status::Fixed ? s.value
                                                   : s.factor * root_value[s.root];
      p.rates[s.ref.component][model_.components[s.ref.component].transition_index(s.ref.state, s.ref.to)] = v;
    }

    for (const Group& g : groups_) {
      double max_log = -std::numeric_limits<double>::infinity();
      for (int i : g.members) {
        const Slot& s = slots_[i];
        if (s.status == Status::Free) max_log = std::max(max_log, root_value[i]);
        if (s.status == Status::Tied) max_log = std::max(max_log, root_value[s.root] + std::log(s.factor));
      }
      std::vector<double> weight(g.members.size(), 0.0);
      double total = 0.0;
      for (std::size_t k = 0; k < g.members.size(); ++k) {
        const Slot& s = slots_[g.members[k]];
        if (s.status == Status::Free) weight[k] = std::exp(root_value[g.members[k]] - max_log);
        if (s.status == Status::Tied) weight[k] = std::exp(root_value[s.root] + std::log(s.factor) - max_log);
        total += weight[k];
      }
      const double free_mass = 1.0 - g.fixed_mass;
      for (std::size_t k = 0; k < g.members.size(); ++k) {
        const Slot& s = slots_[g.members[k]];
        double v = 0.0;
        if (s.status == Status::Fixed) v = s.value;
        if (s.status == Status::Free || s.status == Status::Tied) v = free_mass * weight[k] / total;
        if (s.ref.kind == ParamRef::Kind::Psi) {
          p.psi[s.ref.component] = v;
        } else {
          p.pi[s.ref.component][s.ref.state] = v;
        }
      }
    }
    return p;
  }

  ParameterSet unpack(const Eigen::VectorXd& x) const { return unpack(std::span<const double>(x.data(), x.size())); }

 private:
  struct Slot {
    ParamRef ref;
    Status status = Status::Free;
    double value = 0.0;   // Fixed
    double factor = 1.0;  // Tied: value = factor * value(root)
    int root = -1;
    int coordinate = -1;
  };
  struct Group {
    std::vector<int> members;
    double fixed_mass = 0.0;
  };

  int slot_of(const ParamRef& ref) const {
    const auto it = index_.find(ref);
    if (it == index_.end()) throw ModelError("constraint references unknown parameter " + ref.name());
    return it->second;
  }

  void build() {
    for (const ParamRef& ref : model_parameters(model_)) {
      index_[ref] = static_cast<int>(slots_.size());
      slots_.push_back(Slot{ref});
    }
    const std::size_t n = slots_.size();

    std::vector<std::optional<double>> fixed(n);
    struct Edge {
      int a, b;
      double ratio;  // value(a) = ratio * value(b)
    };
    std::vector<Edge> edges;
    for (const Constraint& c : constraints_.items) {
      if (const auto* f = std::get_if<FixValue>(&c)) {
        const int i = slot_of(f->param);
        if (!std::isfinite(f->value)) throw ModelError("fixed value for " + f->param.name() + " is not finite");
        if (f->param.kind == ParamRef::Kind::Rate && !(f->value > 0.0)) {
          throw ModelError("fixed rate " + f->param.name() + " must be positive");
        }
        if (f->param.kind != ParamRef::Kind::Rate && (f->value < 0.0 || f->value > 1.0)) {
          throw ModelError("fixed probability " + f->param.name() + " must lie in [0,1]");
        }
        if (fixed[i] && *fixed[i] != f->value) throw ModelError(f->param.name() + " is fixed to two different values");
        fixed[i] = f->value;
      } else {
        const auto& r = std::get<FixRatio>(c);
        const int a = slot_of(r.param);
        const int b = slot_of(r.reference);
        if (a == b) throw ModelError("ratio constraint relates " + r.param.name() + " to itself");
        if (!std::isfinite(r.ratio) || !(r.ratio > 0.0)) {
          throw ModelError("ratio for " + r.param.name() + " must be positive and finite");
        }
        if (r.param.kind != r.reference.kind ||
            (r.param.kind == ParamRef::Kind::Pi && r.param.component != r.reference.component)) {
          throw ModelError("ratio constraint " + r.param.name() + "/" + r.reference.name() +
                           " must relate parameters of the same group");
        }
        edges.push_back({a, b, r.ratio});
      }
    }

    // Constraint graph: must be a forest; each tree resolves to its smallest slot.
    std::vector<std::vector<std::pair<int, double>>> adj(n);  // (neighbour, factor to neighbour)
    for (const Edge& e : edges) {
      adj[e.b].push_back({e.a, e.ratio});
      adj[e.a].push_back({e.b, 1.0 / e.ratio});
    }
    std::vector<int> tree_of(n, -1);
    std::vector<double> factor(n, 1.0);
    std::vector<int> tree_root;
    for (std::size_t start = 0; start < n; ++start) {
      if (tree_of[start] >= 0) continue;
      const int tree = static_cast<int>(tree_root.size());
      tree_root.push_back(static_cast<int>(start));
      tree_of[start] = tree;
      std::vector<int> stack{static_cast<int>(start)};
      std::size_t nodes = 0;
      std::size_t half_edges = 0;
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        ++nodes;
        half_edges += adj[u].size();
        for (const auto& [v, f] : adj[u]) {
          if (tree_of[v] < 0) {
            tree_of[v] = tree;
            factor[v] = factor[u] * f;
            stack.push_back(v);
          }
        }
      }
      if (half_edges / 2 != nodes - 1) {
        throw ModelError("ratio constraints involving " + slots_[start].ref.name() + " form a cycle");
      }
    }

    std::vector<std::optional<double>> tree_value(tree_root.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!fixed[i]) continue;
      const double root_value = *fixed[i] / factor[i];
      auto& tv = tree_value[tree_of[i]];
      if (tv && std::abs(*tv - root_value) > 1e-10 * std::max(1.0, std::abs(root_value))) {
        throw ModelError("constraints on " + slots_[i].ref.name() + " are inconsistent");
      }
      tv = root_value;
    }

    for (std::size_t i = 0; i < n; ++i) {
      Slot& s = slots_[i];
      const int tree = tree_of[i];
      const int root = tree_root[tree];
      if (tree_value[tree]) {
        s.value = factor[i] * *tree_value[tree];
        if (s.ref.kind == ParamRef::Kind::Rate) {
          if (!(s.value > 0.0)) throw ModelError("constraints force rate " + s.ref.name() + " to be non-positive");
          s.status = Status::Fixed;
        } else {
          if (s.value > 1.0 + 1e-12) throw ModelError("constraints force " + s.ref.name() + " above 1");
          s.status = s.value == 0.0 ? Status::Zero : Status::Fixed;
        }
      } else if (static_cast<int>(i) == root) {
        s.status = Status::Free;
        s.root = root;
      } else {
        s.status = Status::Tied;
        s.root = root;
        s.factor = factor[i];
      }
    }

    // Probability groups.
    std::map<std::pair<int, int>, int> group_index;  // (kind, component) -> group
    for (std::size_t i = 0; i < n; ++i) {
      const ParamRef& r = slots_[i].ref;
      if (r.kind == ParamRef::Kind::Rate) continue;
      const auto key = std::make_pair(static_cast<int>(r.kind), r.kind == ParamRef::Kind::Psi ? -1 : r.component);
      auto [it, inserted] = group_index.try_emplace(key, static_cast<int>(groups_.size()));
      if (inserted) groups_.emplace_back();
      groups_[it->second].members.push_back(static_cast<int>(i));
    }
    std::vector<bool> is_reference(n, false);
    for (Group& g : groups_) {
      bool any_free = false;
      int reference = -1;
      for (int i : g.members) {
        const Slot& s = slots_[i];
        if (s.status == Status::Fixed) g.fixed_mass += s.value;
        if (s.status == Status::Free || s.status == Status::Tied) any_free = true;
        if (s.status == Status::Free && reference < 0) reference = i;
      }
      const std::string group_name = slots_[g.members.front()].ref.kind == ParamRef::Kind::Psi
                                         ? std::string("mixture weights")
                                         : "initial distribution of component " +
                                               std::to_string(slots_[g.members.front()].ref.component + 1);
      if (!any_free) {
        if (std::abs(g.fixed_mass - 1.0) > 1e-9) throw ModelError("fixed " + group_name + " do not sum to 1");
      } else if (!(g.fixed_mass < 1.0 - 1e-12)) {
        throw ModelError("fixed values leave no mass for the free members of the " + group_name);
      }
      if (reference >= 0) is_reference[reference] = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
      Slot& s = slots_[i];
      if (s.status != Status::Free || is_reference[i]) continue;
      s.coordinate = static_cast<int>(coordinates_.size());
      Coordinate c{s.ref, std::nullopt};
      if (s.ref.kind != ParamRef::Kind::Rate) {
        for (const Group& g : groups_) {
          if (std::find(g.members.begin(), g.members.end(), static_cast<int>(i)) == g.members.end()) continue;
          for (int j : g.members) {
            if (is_reference[j]) c.reference = slots_[j].ref;
          }
        }
      }
      coordinates_.push_back(c);
    }
  }

  MixtureModelSpec model_;
  ConstraintSet constraints_;
  std::vector<Slot> slots_;
  std::map<ParamRef, int> index_;
  std::vector<Group> groups_;
  std::vector<Coordinate> coordinates_;
};

inline Eigen::VectorXd pack(const ParameterSet& params, const ParameterLayout& layout) { return layout.pack(params); }
inline ParameterSet unpack(const Eigen::VectorXd& x, const ParameterLayout& layout) { return layout.unpack(x); }

/// Initial support left after structural zeros, per component.
inline std::vector<int> effective_support(const ParameterLayout& layout, int m) {
  std::vector<int> out;
  for (int j : layout.model().components[m].initial_support) {
    if (layout.status(ParamRef::pi(m, j)) != ParameterLayout::Status::Zero) out.push_back(j);
  }
  return out;
}

}  // namespace mhmm
