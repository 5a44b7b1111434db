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

// File formats. Every state index in a file is 1-based.
//
//   model spec      JSON, {"format": "mhmm-model", "version": 1, ...}
//   parameters      JSON, {"format": "mhmm-params", "version": 1, "parameters": {"psi.1": ..}}
//   dataset         CSV, header subject_id,record_type,time,value; record types
//                   entry, visit, death, censor, aux (value "m:j1|j2|..")
//   fit / posterior JSON, with the model and point parameters embedded
//   draws           CSV, chain,iteration,<natural parameters>

#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mhmm/constraints.hpp"
#include "mhmm/epi.hpp"
#include "mhmm/error.hpp"
#include "mhmm/estimate.hpp"
#include "mhmm/identify.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/mcmc.hpp"
#include "mhmm/model.hpp"

namespace mhmm::io {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(where + ": '" + std::string(text) + "' is not a number");
  }
  return v;
}

inline int parse_int(std::string_view text, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError(where + ": '" + std::string(text) + "' is not an integer");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a temporary sibling and renames, so a failed run leaves no
/// partial file behind.
inline void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw InputError("failed writing '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InputError("cannot write '" + path + "'");
  }
}

/// Fails early when `path` cannot be created (missing directory, no permission).
inline void check_writable(const std::string& path) {
  const std::filesystem::path p(path);
  const std::filesystem::path dir = p.has_parent_path() ? p.parent_path() : std::filesystem::path(".");
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw InputError("output directory '" + dir.string() + "' does not exist");
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(source + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

namespace detail {

inline void check_header(const json& j, std::string_view format, const std::string& source) {
  if (!j.is_object()) throw InputError(source + ": top level must be an object");
  if (!j.contains("format") || j["format"] != format) {
    throw InputError(source + ": expected \"format\": \"" + std::string(format) + "\"");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kFormatVersion) {
    throw InputError(source + ": unsupported or missing \"version\" (expected " + std::to_string(kFormatVersion) + ")");
  }
}

inline const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InputError(where + ": missing field \"" + key + "\"");
  return j[key];
}

inline int get_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw InputError(where + ": expected an integer");
  return j.get<int>();
}

inline double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw InputError(where + ": expected a number");
  return j.get<double>();
}

inline std::vector<int> get_states(const json& j, const std::string& where) {
  if (!j.is_array()) throw InputError(where + ": expected an array");
  std::vector<int> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(get_int(j[k], where + "[" + std::to_string(k) + "]") - 1);
  return out;
}

inline json states_json(const std::vector<int>& s) {
  json a = json::array();
  for (int v : s) a.push_back(v + 1);
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Model spec

inline json model_to_json(const MixtureModelSpec& model) {
  json j;
  j["format"] = "mhmm-model";
  j["version"] = kFormatVersion;
  j["observed_states"] = model.n_obs;
  j["observed_absorbing"] = detail::states_json(model.obs_absorbing);
  j["components"] = json::array();
  for (const auto& c : model.components) {
    json cj;
    cj["name"] = c.name;
    cj["latent_states"] = c.n_states;
    cj["absorbing"] = detail::states_json(c.absorbing);
    cj["transitions"] = json::array();
    for (const auto& [from, to] : c.transitions) cj["transitions"].push_back(json::array({from + 1, to + 1}));
    std::vector<int> emission;
    for (int s = 0; s < c.n_states; ++s) emission.push_back(c.emission.observed(s));
    cj["emission"] = detail::states_json(emission);
    cj["initial_support"] = detail::states_json(c.initial_support);
    j["components"].push_back(cj);
  }
  return j;
}

inline MixtureModelSpec model_from_json(const json& j, const std::string& source = "model") {
  detail::check_header(j, "mhmm-model", source);
  MixtureModelSpec model;
  model.n_obs = detail::get_int(detail::field(j, "observed_states", source), source + ".observed_states");
  model.obs_absorbing = detail::get_states(detail::field(j, "observed_absorbing", source), source + ".observed_absorbing");
  const json& comps = detail::field(j, "components", source);
  if (!comps.is_array() || comps.empty()) throw InputError(source + ".components: expected a non-empty array");
  for (std::size_t m = 0; m < comps.size(); ++m) {
    const std::string where = source + ".components[" + std::to_string(m) + "]";
    const json& cj = comps[m];
    ComponentSpec c;
    if (cj.contains("name")) c.name = cj["name"].is_string() ? cj["name"].get<std::string>() : "";
    c.n_states = detail::get_int(detail::field(cj, "latent_states", where), where + ".latent_states");
    if (c.n_states < 1 || c.n_states > kMaxStates) {
      throw InputError(where + ".latent_states: must lie in [1, " + std::to_string(kMaxStates) + "]");
    }
    c.absorbing = detail::get_states(detail::field(cj, "absorbing", where), where + ".absorbing");
    const json& tr = detail::field(cj, "transitions", where);
    if (!tr.is_array()) throw InputError(where + ".transitions: expected an array");
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const std::string tw = where + ".transitions[" + std::to_string(k) + "]";
      if (!tr[k].is_array() || tr[k].size() != 2) throw InputError(tw + ": expected [from, to]");
      c.transitions.emplace_back(detail::get_int(tr[k][0], tw) - 1, detail::get_int(tr[k][1], tw) - 1);
    }
    const std::vector<int> emission = detail::get_states(detail::field(cj, "emission", where), where + ".emission");
    if (static_cast<int>(emission.size()) != c.n_states) {
      throw InputError(where + ".emission: needs one observed state per latent state");
    }
    try {
      c.emission = EmissionMatrix(model.n_obs, emission);
    } catch (const ModelError& e) {
      throw InputError(where + ".emission: " + e.what());
    }
    c.initial_support = detail::get_states(detail::field(cj, "initial_support", where), where + ".initial_support");
    model.components.push_back(std::move(c));
  }
  try {
    model.validate();
  } catch (const ModelError& e) {
    throw InputError(source + ": " + e.what());
  }
  return model;
}

// ---------------------------------------------------------------------------
// Parameters

inline json parameters_json(const MixtureModelSpec& model, const ParameterSet& params) {
  json p = json::object();
  for (const ParamRef& ref : model_parameters(model)) p[ref.name()] = params.value(model, ref);
  return p;
}

inline json params_to_json(const MixtureModelSpec& model, const ParameterSet& params) {
  json j;
  j["format"] = "mhmm-params";
  j["version"] = kFormatVersion;
  j["parameters"] = parameters_json(model, params);
  return j;
}

/// Reads a {"name": value} object; every model parameter must appear once.
inline ParameterSet parameters_from_json(const MixtureModelSpec& model, const json& p, const std::string& where) {
  if (!p.is_object()) throw InputError(where + ": expected an object of named parameters");
  ParameterSet params;
  params.psi.assign(static_cast<std::size_t>(model.n_components()), 0.0);
  for (const auto& c : model.components) {
    params.pi.emplace_back(static_cast<std::size_t>(c.n_states), 0.0);
    params.rates.emplace_back(c.transitions.size(), 0.0);
  }
  const std::vector<ParamRef> expected = model_parameters(model);
  std::vector<bool> seen(expected.size(), false);
  for (const auto& [key, value] : p.items()) {
    ParamRef ref;
    try {
      ref = ParamRef::parse(key);
    } catch (const ModelError& e) {
      throw InputError(where + ": " + e.what());
    }
    const auto it = std::find(expected.begin(), expected.end(), ref);
    if (it == expected.end()) throw InputError(where + ": '" + key + "' is not a parameter of this model");
    const double v = detail::get_number(value, where + "." + key);
    seen[static_cast<std::size_t>(it - expected.begin())] = true;
    switch (ref.kind) {
      case ParamRef::Kind::Psi:
        params.psi[ref.component] = v;
        break;
      case ParamRef::Kind::Pi:
        params.pi[ref.component][ref.state] = v;
        break;
      case ParamRef::Kind::Rate:
        params.rates[ref.component][model.components[ref.component].transition_index(ref.state, ref.to)] = v;
        break;
    }
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (!seen[k]) throw InputError(where + ": missing parameter '" + expected[k].name() + "'");
  }
  try {
    params.validate(model);
  } catch (const ModelError& e) {
    throw InputError(where + ": " + e.what());
  }
  return params;
}

inline ParameterSet params_from_json(const MixtureModelSpec& model, const json& j, const std::string& source = "params") {
  detail::check_header(j, "mhmm-params", source);
  return parameters_from_json(model, detail::field(j, "parameters", source), source + ".parameters");
}

inline json constraints_json(const ConstraintSet& cs) {
  json a = json::array();
  for (const auto& c : cs.items) a.push_back(describe(c));
  return a;
}

inline ConstraintSet constraints_from_json(const json& a, const std::string& where) {
  if (!a.is_array()) throw InputError(where + ": expected an array of constraint strings");
  ConstraintSet cs;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].is_string()) throw InputError(where + "[" + std::to_string(k) + "]: expected a string");
    try {
      cs.items.push_back(parse_constraint(a[k].get<std::string>()));
    } catch (const ModelError& e) {
      throw InputError(where + "[" + std::to_string(k) + "]: " + e.what());
    }
  }
  return cs;
}

// ---------------------------------------------------------------------------
// Dataset CSV

inline constexpr std::string_view kDatasetHeader = "subject_id,record_type,time,value";

inline std::string write_dataset_csv(const std::vector<SubjectRecord>& records) {
  std::string out(kDatasetHeader);
  out += '\n';
  auto row = [&](const std::string& id, std::string_view type, const std::string& time, const std::string& value) {
    out += id;
    out += ',';
    out += type;
    out += ',';
    out += time;
    out += ',';
    out += value;
    out += '\n';
  };
  for (const auto& r : records) {
    if (r.id.empty() || r.id.find_first_of(",\"\n\r") != std::string::npos) {
      throw InputError("subject id '" + r.id + "' is empty or contains a comma, quote or newline");
    }
    row(r.id, "entry", format_double(r.entry_time), "");
    for (std::size_t k = 0; k < r.visit_times.size(); ++k) {
      row(r.id, "visit", format_double(r.visit_times[k]), std::to_string(r.visit_states[k] + 1));
    }
    if (r.death_time) row(r.id, "death", format_double(*r.death_time), std::to_string(r.death_state + 1));
    if (r.censor_time) row(r.id, "censor", format_double(*r.censor_time), "");
    for (std::size_t m = 0; m < r.end_states.size(); ++m) {
      if (!r.end_states[m]) continue;
      std::string v = std::to_string(m + 1) + ":";
      for (std::size_t k = 0; k < r.end_states[m]->size(); ++k) {
        if (k > 0) v += '|';
        v += std::to_string((*r.end_states[m])[k] + 1);
      }
      row(r.id, "aux", "", v);
    }
  }
  return out;
}

/// Parses the long-format dataset. Errors name the 1-based line number.
inline std::vector<SubjectRecord> read_dataset_csv(const std::string& text, const MixtureModelSpec& model,
                                                   const std::string& source = "dataset") {
  std::vector<SubjectRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::map<std::string, int> first_line;
  struct Pending {
    SubjectRecord rec;
    int first_line = 0;
    std::optional<double> last_time;
    bool has_entry = false;
  };
  std::optional<Pending> cur;

  auto finish = [&]() {
    if (!cur) return;
    SubjectRecord& r = cur->rec;
    if (!cur->has_entry) {
      if (r.visit_times.empty()) throw InputError(source + ": subject '" + r.id + "' (line " + std::to_string(cur->first_line) + ") has no visits");
      r.entry_time = r.visit_times.front();
    }
    try {
      r.validate(model);
    } catch (const ModelError& e) {
      throw InputError(source + ": subject '" + r.id + "' (starting line " + std::to_string(cur->first_line) + "): " + e.what());
    }
    out.push_back(std::move(r));
    cur.reset();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + " line " + std::to_string(line_no);
    if (!header_seen) {
      if (line != kDatasetHeader) throw InputError(where + ": header must be '" + std::string(kDatasetHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 4) throw InputError(where + ": expected 4 fields, found " + std::to_string(f.size()));
    const std::string id(f[0]);
    if (id.empty()) throw InputError(where + ": empty subject_id");
    if (!cur || cur->rec.id != id) {
      finish();
      if (first_line.count(id)) {
        throw InputError(where + ": rows of subject '" + id + "' are not contiguous (first seen on line " +
                         std::to_string(first_line[id]) + ")");
      }
      first_line[id] = line_no;
      cur.emplace();
      cur->rec.id = id;
      cur->first_line = line_no;
    }
    SubjectRecord& r = cur->rec;
    const std::string_view type = f[1];
    auto timed = [&]() {
      const double t = parse_double(f[2], where + " time");
      if (!std::isfinite(t)) throw InputError(where + ": time must be finite");
      if (cur->last_time && t < *cur->last_time) throw InputError(where + ": times must be nondecreasing within a subject");
      cur->last_time = t;
      return t;
    };
    auto state = [&]() {
      const int s = parse_int(f[3], where + " value") - 1;
      if (s < 0 || s >= model.n_obs) throw InputError(where + ": state " + std::string(f[3]) + " outside 1.." + std::to_string(model.n_obs));
      return s;
    };
    auto no_value = [&]() {
      if (!f[3].empty()) throw InputError(where + ": " + std::string(type) + " rows take no value");
    };
    if (type == "entry") {
      no_value();
      if (cur->has_entry || !r.visit_times.empty()) throw InputError(where + ": entry must be the subject's first timed row");
      r.entry_time = timed();
      cur->has_entry = true;
    } else if (type == "visit") {
      if (r.death_time || r.censor_time) throw InputError(where + ": visit after death or censoring");
      const double t = timed();
      r.visit_times.push_back(t);
      r.visit_states.push_back(state());
    } else if (type == "death") {
      if (r.death_time || r.censor_time) throw InputError(where + ": second terminal row");
      r.death_time = timed();
      r.death_state = state();
    } else if (type == "censor") {
      no_value();
      if (r.death_time || r.censor_time) throw InputError(where + ": second terminal row");
      r.censor_time = timed();
    } else if (type == "aux") {
      if (!f[2].empty()) throw InputError(where + ": aux rows take no time");
      const std::string_view v = f[3];
      const auto colon = v.find(':');
      if (colon == std::string_view::npos) throw InputError(where + ": aux value must look like m:j1|j2");
      const int m = parse_int(v.substr(0, colon), where + " aux component") - 1;
      if (m < 0 || m >= model.n_components()) throw InputError(where + ": aux component out of range");
      if (r.end_states.size() < static_cast<std::size_t>(model.n_components())) {
        r.end_states.resize(static_cast<std::size_t>(model.n_components()));
      }
      if (r.end_states[m]) throw InputError(where + ": duplicate aux row for component " + std::to_string(m + 1));
      std::vector<int> set;
      std::string_view items = v.substr(colon + 1);
      while (!items.empty()) {
        const auto bar = items.find('|');
        const int s = parse_int(items.substr(0, bar), where + " aux state") - 1;
        if (s < 0 || s >= model.components[m].n_states) throw InputError(where + ": aux state out of range");
        set.push_back(s);
        if (bar == std::string_view::npos) break;
        items.remove_prefix(bar + 1);
      }
      r.end_states[m] = std::move(set);
    } else {
      throw InputError(where + ": unknown record_type '" + std::string(type) + "'");
    }
  }
  if (!header_seen) throw InputError(source + ": empty file (missing header)");
  finish();
  return out;
}

// ---------------------------------------------------------------------------
// Results

inline json fit_to_json(const ParameterLayout& layout, const FitResult& fit) {
  const MixtureModelSpec& model = layout.model();
  json j;
  j["format"] = "mhmm-fit";
  j["version"] = kFormatVersion;
  j["mode"] = "mle";
  j["model"] = model_to_json(model);
  j["constraints"] = constraints_json(layout.constraints());
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["hessian_positive_definite"] = fit.hessian_positive_definite;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["multistart_spread"] = fit.multistart_spread;
  j["start_logliks"] = fit.start_logliks;
  j["parameters"] = parameters_json(model, fit.params_hat);
  json coords = json::array();
  for (std::size_t i = 0; i < layout.coordinates().size(); ++i) {
    json c;
    c["label"] = layout.coordinates()[i].label();
    c["estimate"] = fit.free_hat[static_cast<Eigen::Index>(i)];
    c["se"] = i < fit.se_free.size() && fit.se_free[i] ? json(*fit.se_free[i]) : json(nullptr);
    coords.push_back(c);
  }
  j["free"] = coords;
  json ci = json::array();
  for (const auto& iv : fit.ci) {
    json c;
    c["parameter"] = iv.param.name();
    c["estimate"] = iv.estimate;
    c["se_transformed"] = iv.se_transformed ? json(*iv.se_transformed) : json(nullptr);
    c["lower"] = iv.lower ? json(*iv.lower) : json(nullptr);
    c["upper"] = iv.upper ? json(*iv.upper) : json(nullptr);
    c["fixed"] = iv.fixed;
    c["boundary"] = iv.boundary;
    ci.push_back(c);
  }
  j["intervals"] = ci;
  json b = json::array();
  for (const auto& r : fit.boundary) b.push_back(r.name());
  j["boundary"] = b;
  return j;
}

inline json posterior_to_json(const ParameterLayout& layout, const PosteriorSummary& s, const PriorSpec& prior) {
  const MixtureModelSpec& model = layout.model();
  json j;
  j["format"] = "mhmm-posterior";
  j["version"] = kFormatVersion;
  j["mode"] = "bayes";
  j["model"] = model_to_json(model);
  j["constraints"] = constraints_json(layout.constraints());
  j["chains"] = s.chains;
  j["iterations"] = s.iterations;
  j["burn_in"] = s.burn_in;
  // Posterior means; linear constraints and the simplex hold for the mean.
  json means = json::object();
  for (const ParamRef& ref : model_parameters(model)) {
    const auto* p = s.find(ref);
    means[ref.name()] = p ? p->mean : 0.0;
  }
  j["parameters"] = means;
  json params = json::array();
  for (const auto& p : s.parameters) {
    params.push_back({{"parameter", p.param.name()},
                      {"mean", p.mean},
                      {"sd", p.sd},
                      {"lower", p.lower},
                      {"upper", p.upper},
                      {"rhat", p.rhat},
                      {"n_eff", p.n_eff},
                      {"degenerate", p.degenerate},
                      {"fixed", p.fixed}});
  }
  j["summary"] = params;
  json coords = json::array();
  for (std::size_t i = 0; i < s.coordinates.size(); ++i) {
    const auto& c = s.coordinates[i];
    coords.push_back({{"label", c.label},
                      {"prior", prior.coordinates[i].describe()},
                      {"mean", c.mean},
                      {"sd", c.sd},
                      {"mcse", c.mcse},
                      {"rhat", c.rhat},
                      {"n_eff", c.n_eff}});
  }
  j["free"] = coords;
  json blocks = json::array();
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    json labels = json::array();
    for (int i : s.blocks[b]) labels.push_back(layout.coordinates()[static_cast<std::size_t>(i)].label());
    blocks.push_back({{"coordinates", labels}, {"acceptance_rate", s.acceptance[b]}});
  }
  j["blocks"] = blocks;
  return j;
}

inline std::string draws_csv(const PosteriorSummary& s) {
  std::string out = "chain,iteration";
  for (const auto& ref : s.natural) out += "," + ref.name();
  out += '\n';
  for (Eigen::Index r = 0; r < s.natural_draws.rows(); ++r) {
    out += std::to_string(s.chain[static_cast<std::size_t>(r)] + 1);
    out += ',';
    out += std::to_string(s.iteration[static_cast<std::size_t>(r)] + 1);
    for (Eigen::Index c = 0; c < s.natural_draws.cols(); ++c) {
      out += ',';
      out += format_double(s.natural_draws(r, c));
    }
    out += '\n';
  }
  return out;
}

/// Model and point parameters from a params, fit or posterior file.
struct PointEstimate {
  MixtureModelSpec model;
  ParameterSet params;
  bool model_embedded = false;
};

inline PointEstimate point_estimate_from_json(const json& j, const std::optional<MixtureModelSpec>& fallback_model,
                                              const std::string& source) {
  if (!j.is_object() || !j.contains("format") || !j["format"].is_string()) {
    throw InputError(source + ": missing \"format\"");
  }
  const std::string format = j["format"].get<std::string>();
  PointEstimate pe;
  if (format == "mhmm-params") {
    if (!fallback_model) throw InputError(source + ": parameter files need a model");
    pe.model = *fallback_model;
    pe.params = params_from_json(pe.model, j, source);
    return pe;
  }
  if (format != "mhmm-fit" && format != "mhmm-posterior") {
    throw InputError(source + ": expected a params, fit or posterior file, found \"" + format + "\"");
  }
  detail::check_header(j, format, source);
  pe.model = model_from_json(detail::field(j, "model", source), source + ".model");
  pe.model_embedded = true;
  pe.params = parameters_from_json(pe.model, detail::field(j, "parameters", source), source + ".parameters");
  return pe;
}

inline std::string prevalence_csv(const PrevalenceCurve& c, const std::vector<std::vector<double>>& incidence) {
  std::string out = "age,all_cause";
  for (std::size_t m = 0; m < c.by_type.size(); ++m) out += ",type_" + std::to_string(m + 1);
  for (std::size_t m = 0; m < incidence.size(); ++m) out += ",cum_incidence_" + std::to_string(m + 1);
  out += '\n';
  for (std::size_t k = 0; k < c.ages.size(); ++k) {
    out += format_double(c.ages[k]);
    out += ',' + format_double(c.all_cause[k]);
    for (const auto& t : c.by_type) out += ',' + format_double(t[k]);
    for (const auto& inc : incidence) out += ',' + format_double(inc[k]);
    out += '\n';
  }
  return out;
}

inline json derived_to_json(const DerivedQuantities& d) {
  json j;
  j["psi"] = d.psi;
  json soj = json::array();
  for (const auto& s : d.sojourns) {
    soj.push_back({{"component", s.component + 1},
                   {"state", s.state + 1},
                   {"mean_sojourn", s.infinite ? json(nullptr) : json(s.mean)},
                   {"infinite", s.infinite}});
  }
  j["sojourns"] = soj;
  json tt = json::array();
  for (const auto& t : d.transition_times) {
    tt.push_back({{"rate", t.rate.name()},
                  {"mean_transition_time", t.infinite ? json(nullptr) : json(t.mean)},
                  {"infinite", t.infinite}});
  }
  j["transition_times"] = tt;
  json mr = json::array();
  for (const auto& r : d.mortality_ratios) {
    mr.push_back({{"component", r.component + 1},
                  {"numerator", r.numerator.name()},
                  {"denominator", r.denominator.name()},
                  {"ratio", std::isfinite(r.ratio) ? json(r.ratio) : json(nullptr)}});
  }
  j["mortality_ratios"] = mr;
  return j;
}

/// Scenario table: one row per parameter, Est and SE_emp per scenario, then
/// the boundary fraction per scenario.
inline std::string scenario_csv(const MixtureModelSpec& model, const std::vector<ScenarioResult>& results) {
  std::string out = "parameter,true";
  for (const auto& r : results) {
    out += "," + r.scenario.name + "_est," + r.scenario.name + "_se," + r.scenario.name + "_coverage," +
           r.scenario.name + "_boundary";
  }
  out += '\n';
  const std::vector<ParamRef> refs = model_parameters(model);
  for (std::size_t k = 0; k < refs.size(); ++k) {
    out += refs[k].name();
    out += ',' + format_double(results.empty() ? 0.0 : results.front().parameters[k].truth);
    for (const auto& r : results) {
      const auto& p = r.parameters[k];
      out += ',' + format_double(p.mean) + ',' + format_double(p.empirical_se) + ',' + format_double(p.coverage) + ',' +
             format_double(p.boundary_fraction);
    }
    out += '\n';
  }
  return out;
}

}  // namespace mhmm::io
