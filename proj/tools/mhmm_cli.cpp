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

// mhmm command-line tool: simulate, fit, predict, check-identifiability.
//
// Exit codes: 0 success, 2 input error, 3 numerical non-convergence,
// 4 identifiability guard (non-positive-definite Hessian at the MLE).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mhmm/mhmm.hpp"

namespace {

using mhmm::io::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitIdentifiability = 4;

struct Common {
  std::string model_path;
  int threads = 0;
  std::uint64_t seed = 1;
};

mhmm::MixtureModelSpec load_model(const std::string& path) {
  if (path.empty()) return mhmm::dementia_mixture_model();
  return mhmm::io::model_from_json(mhmm::io::read_json_file(path), path);
}

mhmm::ConstraintSet parse_constraints(const std::vector<std::string>& fixes, const std::vector<std::string>& ratios) {
  mhmm::ConstraintSet cs;
  for (const auto& f : fixes) {
    if (f.find('/') != std::string::npos) throw mhmm::InputError("--fix '" + f + "' looks like a ratio; use --ratio");
    cs.items.push_back(mhmm::parse_constraint(f));
  }
  for (const auto& r : ratios) {
    if (r.find('/') == std::string::npos) throw mhmm::InputError("--ratio '" + r + "' must look like a/b=value");
    cs.items.push_back(mhmm::parse_constraint(r));
  }
  return cs;
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
      if (c == ':') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(cur);
    if (parts.size() != 3) throw mhmm::InputError(flag + " range must be start:stop:step");
    const double a = mhmm::io::parse_double(parts[0], flag);
    const double b = mhmm::io::parse_double(parts[1], flag);
    const double h = mhmm::io::parse_double(parts[2], flag);
    if (!(h > 0.0) || !(b >= a)) throw mhmm::InputError(flag + " needs step > 0 and stop >= start");
    const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
    if (n > 1000000) throw mhmm::InputError(flag + " has too many points");
    for (long k = 0; k <= n; ++k) out.push_back(a + static_cast<double>(k) * h);
  } else {
    std::string cur;
    for (std::size_t i = 0; i <= text.size(); ++i) {
      if (i == text.size() || text[i] == ',') {
        if (!cur.empty()) out.push_back(mhmm::io::parse_double(cur, flag));
        cur.clear();
      } else {
        cur += text[i];
      }
    }
  }
  if (out.empty()) throw mhmm::InputError(flag + " is empty");
  for (std::size_t k = 1; k < out.size(); ++k) {
    if (!(out[k] > out[k - 1])) throw mhmm::InputError(flag + " must be strictly increasing");
  }
  return out;
}

json metadata(const CLI::App& app, const std::string& command, const std::vector<std::string>& outputs) {
  json m;
  m["format"] = "mhmm-metadata";
  m["version"] = mhmm::io::kFormatVersion;
  m["library_version"] = MHMM_VERSION;
  m["command"] = command;
  m["outputs"] = outputs;
  m["resolved_config"] = app.config_to_str(true, false);
  return m;
}

std::string meta_path(const std::string& out) { return out + ".meta.json"; }

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  Common common;
  std::string params_path;
  std::string preset;
  int n = 500;
  std::string out;
  std::string grid = "0,0.25,0.5,0.75,1";
  double admin_end = 1.0;
  double entry_low = 0.0;
  double entry_high = 0.0;
  std::string disclosure = "component";
  double p_disclose = 0.8;
  std::vector<std::string> markers;  // "m:j1|j2"
};

int run_simulate(const CLI::App& app, const SimulateArgs& a) {
  if (a.n < 1) throw mhmm::InputError("-n must be at least 1");
  mhmm::MixtureModelSpec model;
  mhmm::ParameterSet params;
  mhmm::SimulationDesign design;
  if (!a.preset.empty()) {
    if (a.preset != "sim-paper") throw mhmm::InputError("unknown preset '" + a.preset + "' (known: sim-paper)");
    if (!a.common.model_path.empty() || !a.params_path.empty()) {
      throw mhmm::InputError("--preset supplies the model and parameters; drop --model/--params");
    }
    model = mhmm::dementia_mixture_model();
    params = mhmm::dementia_simulation_truth();
    design = mhmm::dementia_simulation_design(a.common.seed);
  } else {
    if (a.params_path.empty()) throw mhmm::InputError("--params is required without --preset");
    model = load_model(a.common.model_path);
    params = mhmm::io::params_from_json(model, mhmm::io::read_json_file(a.params_path), a.params_path);
  }
  design.seed = a.common.seed;
  design.visit_grid = parse_grid(a.grid, "--grid");
  design.admin_end = a.admin_end;
  design.entry = {a.entry_low, std::max(a.entry_low, a.entry_high)};
  design.p_disclose = a.p_disclose;
  if (a.disclosure == "none") {
    design.disclosure = mhmm::Disclosure::None;
  } else if (a.disclosure == "component") {
    design.disclosure = mhmm::Disclosure::Component;
  } else if (a.disclosure == "end-state-set") {
    design.disclosure = mhmm::Disclosure::EndStateSet;
  } else {
    throw mhmm::InputError("--disclosure must be none, component or end-state-set");
  }
  if (!a.markers.empty()) {
    design.marker_states.assign(static_cast<std::size_t>(model.n_components()), {});
    for (const auto& mk : a.markers) {
      const auto colon = mk.find(':');
      if (colon == std::string::npos) throw mhmm::InputError("--marker must look like m:j1|j2");
      const int m = mhmm::io::parse_int(std::string_view(mk).substr(0, colon), "--marker") - 1;
      if (m < 0 || m >= model.n_components()) throw mhmm::InputError("--marker component out of range");
      std::string_view rest = std::string_view(mk).substr(colon + 1);
      while (!rest.empty()) {
        const auto bar = rest.find('|');
        design.marker_states[m].push_back(mhmm::io::parse_int(rest.substr(0, bar), "--marker") - 1);
        if (bar == std::string_view::npos) break;
        rest.remove_prefix(bar + 1);
      }
    }
  }
  try {
    design.validate(model);
  } catch (const mhmm::ModelError& e) {
    throw mhmm::InputError(e.what());
  }
  mhmm::io::check_writable(a.out);
  const auto subjects = mhmm::simulate_subjects(model, params, a.n, design, mhmm::resolve_threads(a.common.threads));
  std::vector<mhmm::SubjectRecord> records;
  int dead = 0;
  int censored = 0;
  for (const auto& s : subjects) {
    records.push_back(s.record);
    dead += s.record.dead();
    censored += s.record.censor_time.has_value();
  }
  mhmm::io::write_text_file(a.out, mhmm::io::write_dataset_csv(records));
  json meta = metadata(app, "simulate", {a.out});
  meta["model"] = mhmm::io::model_to_json(model);
  meta["parameters"] = mhmm::io::parameters_json(model, params);
  meta["summary"] = {{"subjects", a.n}, {"deaths", dead}, {"censored", censored},
                     {"censoring_fraction", static_cast<double>(censored) / a.n}};
  mhmm::io::write_text_file(meta_path(a.out), meta.dump(2) + "\n");
  std::cout << "wrote " << a.n << " subjects to " << a.out << " (censored " << censored << ", deaths " << dead << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  Common common;
  std::string data_path;
  std::string mode = "mle";
  std::vector<std::string> fixes;
  std::vector<std::string> ratios;
  int starts = 10;
  int max_iter = 200;
  double tol = 1e-3;
  std::string out;
  std::string prior_preset = "noninformative";
  int chains = 4;
  int iterations = 2000;
  int burn_in = -1;
  std::string draws_path;
};

int run_fit(const CLI::App& app, const FitArgs& a) {
  const mhmm::MixtureModelSpec model = load_model(a.common.model_path);
  const mhmm::ConstraintSet cs = parse_constraints(a.fixes, a.ratios);
  const mhmm::ParameterLayout layout(model, cs);
  if (a.mode != "mle" && a.mode != "bayes") throw mhmm::InputError("--mode must be mle or bayes");
  const std::vector<mhmm::SubjectRecord> data =
      mhmm::io::read_dataset_csv(mhmm::io::read_text_file(a.data_path), model, a.data_path);
  mhmm::io::check_writable(a.out);
  const int threads = mhmm::resolve_threads(a.common.threads);

  if (a.mode == "mle") {
    if (data.empty()) throw mhmm::InputError(a.data_path + ": dataset has no subjects");
    mhmm::MleOptions opt;
    opt.starts = a.starts;
    opt.max_iterations = a.max_iter;
    opt.tol = a.tol;
    opt.seed = a.common.seed;
    opt.threads = threads;
    const mhmm::FitResult fit = mhmm::fit_mle(layout, data, opt);
    json j = mhmm::io::fit_to_json(layout, fit);
    mhmm::io::write_text_file(a.out, j.dump(2) + "\n");
    mhmm::io::write_text_file(meta_path(a.out), metadata(app, "fit", {a.out}).dump(2) + "\n");
    std::cout << "loglik " << mhmm::io::format_double(fit.loglik) << (fit.converged ? " (converged)" : " (NOT converged)")
              << "\n";
    for (const auto& iv : fit.ci) {
      std::cout << "  " << iv.param.name() << " = " << iv.estimate;
      if (iv.lower && iv.upper) std::cout << "  [" << *iv.lower << ", " << *iv.upper << "]";
      if (iv.fixed) std::cout << "  (fixed)";
      if (iv.boundary) std::cout << "  (boundary)";
      std::cout << "\n";
    }
    if (!fit.converged) return kExitNoConvergence;
    if (!fit.hessian_positive_definite) {
      std::cerr << "warning: Hessian is not positive definite at the MLE; some parameters are not identified\n";
      return kExitIdentifiability;
    }
    return kExitOk;
  }

  mhmm::PriorSpec prior;
  if (a.prior_preset == "noninformative") {
    prior = mhmm::noninformative_prior(layout);
  } else if (a.prior_preset == "adams") {
    prior = mhmm::adams_prior(layout);
  } else {
    throw mhmm::InputError("--prior-preset must be noninformative or adams");
  }
  mhmm::BayesOptions opt;
  opt.chains = a.chains;
  opt.iterations = a.iterations;
  opt.burn_in = a.burn_in;
  opt.seed = a.common.seed;
  opt.threads = threads;
  const mhmm::PosteriorSummary post = mhmm::fit_bayes(layout, data, prior, opt);
  std::vector<std::string> outputs = {a.out};
  if (!a.draws_path.empty()) {
    mhmm::io::check_writable(a.draws_path);
    mhmm::io::write_text_file(a.draws_path, mhmm::io::draws_csv(post));
    outputs.push_back(a.draws_path);
  }
  mhmm::io::write_text_file(a.out, mhmm::io::posterior_to_json(layout, post, prior).dump(2) + "\n");
  mhmm::io::write_text_file(meta_path(a.out), metadata(app, "fit", outputs).dump(2) + "\n");
  bool mixed = true;
  for (const auto& p : post.parameters) {
    std::cout << "  " << p.param.name() << " mean " << p.mean << " [" << p.lower << ", " << p.upper << "] rhat "
              << p.rhat << " n_eff " << p.n_eff << "\n";
    if (!p.fixed && !p.degenerate && p.rhat > 1.1) mixed = false;
  }
  return mixed ? kExitOk : kExitNoConvergence;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_path;
  std::string fit_path;
  std::string ages = "75:100:1";
  double origin = 75.0;
  int disease_state = 2;
  std::string out;
  std::string derived_path;
};

int run_predict(const CLI::App& app, const PredictArgs& a) {
  std::optional<mhmm::MixtureModelSpec> fallback;
  fallback = load_model(a.model_path);
  const mhmm::io::PointEstimate pe =
      mhmm::io::point_estimate_from_json(mhmm::io::read_json_file(a.fit_path), fallback, a.fit_path);
  const std::vector<double> ages = parse_grid(a.ages, "--ages");
  const int disease = a.disease_state - 1;
  mhmm::io::check_writable(a.out);
  const mhmm::PrevalenceCurve curve = mhmm::prevalence_curve(pe.model, pe.params, ages, a.origin, disease);
  std::vector<std::vector<double>> incidence;
  for (int m = 0; m < pe.model.n_components(); ++m) {
    const auto targets = mhmm::disease_targets(pe.model.components[m], disease);
    std::vector<double> col;
    for (double age : ages) col.push_back(mhmm::cumulative_incidence(pe.model, pe.params, age - a.origin, m, targets));
    incidence.push_back(col);
  }
  const std::string derived_path = a.derived_path.empty() ? a.out + ".derived.json" : a.derived_path;
  mhmm::io::write_text_file(a.out, mhmm::io::prevalence_csv(curve, incidence));
  mhmm::io::write_text_file(derived_path,
                            mhmm::io::derived_to_json(mhmm::derived_quantities(pe.model, pe.params)).dump(2) + "\n");
  mhmm::io::write_text_file(meta_path(a.out), metadata(app, "predict", {a.out, derived_path}).dump(2) + "\n");
  std::cout << "wrote " << ages.size() << " ages to " << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check-identifiability

struct IdentifyArgs {
  Common common;
  std::string mode;
  std::string params_path;
  std::string data_path;
  std::string fit_path;
  double rho1 = 0.9;
  double rho2 = 0.9;
  int records = 100;
  double tol = 1e-8;
  std::string direction = "transform-rho1";
  double half_width = 0.5;
  int points = 21;
  std::vector<std::string> fixes;
  std::vector<std::string> ratios;
  std::string preset;
  std::vector<std::string> scenarios;
  int reps = 50;
  int n = 500;
  int starts = 2;
  std::string out;
};

mhmm::ParameterSet identify_params(const IdentifyArgs& a, const mhmm::MixtureModelSpec& model) {
  if (a.params_path.empty()) return mhmm::dementia_simulation_truth();
  const auto pe = mhmm::io::point_estimate_from_json(mhmm::io::read_json_file(a.params_path), model, a.params_path);
  return pe.params;
}

int run_identify(const CLI::App& app, const IdentifyArgs& a) {
  const mhmm::MixtureModelSpec model = load_model(a.common.model_path);
  if (a.mode == "transform" || a.mode == "flatness") {
    if (!(model == mhmm::dementia_mixture_model())) {
      throw mhmm::InputError("--mode " + a.mode + " applies to the two-type dementia model only");
    }
  }
  mhmm::io::check_writable(a.out);
  if (a.mode == "transform") {
    const mhmm::ParameterSet theta = identify_params(a, model);
    const mhmm::ParameterSet star = mhmm::equal_likelihood_transform(theta, a.rho1, a.rho2);
    const std::vector<mhmm::SubjectRecord> data =
        a.data_path.empty() ? mhmm::make_restricted_path_records(a.records, a.common.seed)
                            : mhmm::io::read_dataset_csv(mhmm::io::read_text_file(a.data_path), model, a.data_path);
    const mhmm::TransformReport rep = mhmm::restricted_path_invariance_check(data, theta, star, a.tol);
    json j;
    j["format"] = "mhmm-transform-report";
    j["version"] = mhmm::io::kFormatVersion;
    j["rho1"] = a.rho1;
    j["rho2"] = a.rho2;
    j["records"] = data.size();
    j["theta"] = mhmm::io::parameters_json(model, theta);
    j["theta_star"] = mhmm::io::parameters_json(model, star);
    j["max_abs_loglik_gap"] = rep.max_abs_loglik_gap;
    j["tolerance"] = rep.tolerance;
    j["verdict"] = rep.invariant ? "invariant" : "distinguishable";
    mhmm::io::write_text_file(a.out, j.dump(2) + "\n");
    mhmm::io::write_text_file(meta_path(a.out), metadata(app, "check-identifiability", {a.out}).dump(2) + "\n");
    std::cout << "verdict " << (rep.invariant ? "invariant" : "distinguishable") << " (max gap "
              << rep.max_abs_loglik_gap << ")\n";
    return kExitOk;
  }
  if (a.mode == "flatness") {
    const mhmm::ConstraintSet cs = parse_constraints(a.fixes, a.ratios);
    const mhmm::ParameterLayout layout(model, cs);
    const mhmm::ParameterSet theta = identify_params(a, model);
    const std::vector<mhmm::SubjectRecord> data =
        a.data_path.empty() ? mhmm::make_restricted_path_records(a.records, a.common.seed)
                            : mhmm::io::read_dataset_csv(mhmm::io::read_text_file(a.data_path), model, a.data_path);
    const Eigen::VectorXd x_hat = layout.pack(theta);
    Eigen::VectorXd dir;
    if (a.direction == "transform-rho1" || a.direction == "transform-rho2") {
      const double eps = 1e-4;
      const bool r1 = a.direction == "transform-rho1";
      const auto up = mhmm::equal_likelihood_transform(theta, r1 ? 1 + eps : 1.0, r1 ? 1.0 : 1 + eps);
      const auto down = mhmm::equal_likelihood_transform(theta, r1 ? 1 - eps : 1.0, r1 ? 1.0 : 1 - eps);
      dir = (layout.pack(up) - layout.pack(down)) / (2 * eps);
    } else {
      const mhmm::ParamRef ref = mhmm::ParamRef::parse(a.direction);
      const int idx = layout.coordinate_of(ref);
      if (idx < 0) throw mhmm::InputError("--direction " + a.direction + " is not a free coordinate");
      dir = Eigen::VectorXd::Zero(layout.free_dimension());
      dir[idx] = 1.0;
    }
    const mhmm::FlatnessCurve c =
        mhmm::flatness_scan(mhmm::free_loglik(layout, data, mhmm::resolve_threads(a.common.threads)), x_hat, dir,
                            a.half_width, a.points);
    std::string csv = "offset,loglik\n";
    for (std::size_t k = 0; k < c.offsets.size(); ++k) {
      csv += mhmm::io::format_double(c.offsets[k]) + "," +
             (std::isnan(c.logliks[k]) ? std::string() : mhmm::io::format_double(c.logliks[k])) + "\n";
    }
    mhmm::io::write_text_file(a.out, csv);
    json meta = metadata(app, "check-identifiability", {a.out});
    meta["drop_minus"] = c.drop_minus;
    meta["drop_plus"] = c.drop_plus;
    mhmm::io::write_text_file(meta_path(a.out), meta.dump(2) + "\n");
    std::cout << "loglik drop at -/+ half width: " << c.drop_minus << " / " << c.drop_plus << "\n";
    return kExitOk;
  }
  if (a.mode == "scenarios") {
    if (a.preset != "appendix-c") throw mhmm::InputError("--mode scenarios needs --preset appendix-c");
    if (!(model == mhmm::dementia_mixture_model())) throw mhmm::InputError("the scenario preset uses the dementia model");
    const mhmm::ParameterSet truth = identify_params(a, model);
    std::vector<mhmm::Scenario> all = mhmm::dementia_scenarios(truth);
    std::vector<mhmm::Scenario> chosen;
    if (a.scenarios.empty()) {
      chosen = all;
    } else {
      for (const auto& name : a.scenarios) {
        const auto it = std::find_if(all.begin(), all.end(), [&](const auto& s) { return s.name == name; });
        if (it == all.end()) throw mhmm::InputError("unknown scenario '" + name + "' (S0..S4)");
        chosen.push_back(*it);
      }
    }
    mhmm::HarnessOptions opt;
    opt.n = a.n;
    opt.replications = a.reps;
    opt.seed = a.common.seed;
    opt.threads = mhmm::resolve_threads(a.common.threads);
    opt.mle.starts = a.starts;
    const auto results = mhmm::scenario_harness(model, truth, chosen, opt);
    mhmm::io::write_text_file(a.out, mhmm::io::scenario_csv(model, results));
    json meta = metadata(app, "check-identifiability", {a.out});
    json fails = json::object();
    for (const auto& r : results) {
      fails[r.scenario.name] = {{"failures", r.failures},
                                {"any_boundary_fraction", r.any_boundary_fraction},
                                {"constraints", mhmm::io::constraints_json(r.scenario.constraints)}};
    }
    meta["scenarios"] = fails;
    mhmm::io::write_text_file(meta_path(a.out), meta.dump(2) + "\n");
    std::cout << "wrote scenario table for " << results.size() << " scenarios to " << a.out << "\n";
    return kExitOk;
  }
  throw mhmm::InputError("--mode must be transform, flatness or scenarios");
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--model", c.model_path, "model spec JSON (default: two-type dementia model)");
  sub->add_option("--threads", c.threads, "worker threads (0: MHMM_THREADS or all cores)");
  sub->add_option("--seed", c.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixture hidden Markov models for panel data with exact death times"};
  app.set_version_flag("--version", std::string(MHMM_VERSION));
  app.set_config("--config", "", "TOML/INI config file; flags override it");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "simulate a panel dataset");
  add_common(s, sim.common);
  s->add_option("--params", sim.params_path, "parameter JSON");
  s->add_option("--preset", sim.preset, "bundled design: sim-paper");
  s->add_option("-n", sim.n, "number of subjects");
  s->add_option("--out", sim.out, "dataset CSV")->required();
  s->add_option("--grid", sim.grid, "visit offsets after entry, comma separated or start:stop:step");
  s->add_option("--admin-end", sim.admin_end, "follow-up length after entry");
  s->add_option("--entry-low", sim.entry_low, "entry time lower bound");
  s->add_option("--entry-high", sim.entry_high, "entry time upper bound");
  s->add_option("--disclosure", sim.disclosure, "none, component or end-state-set")
      ->check(CLI::IsMember({"none", "component", "end-state-set"}));
  s->add_option("--p-disclose", sim.p_disclose, "disclosure probability for deaths");
  s->add_option("--marker", sim.markers, "marker states m:j1|j2 (end-state-set mode)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit a model to a dataset");
  add_common(f, fit.common);
  f->add_option("--data", fit.data_path, "dataset CSV")->required();
  f->add_option("--mode", fit.mode, "mle or bayes")->check(CLI::IsMember({"mle", "bayes"}));
  f->add_option("--fix", fit.fixes, "fix a parameter, e.g. pi2.2=0");
  f->add_option("--ratio", fit.ratios, "fix a ratio, e.g. pi2.2/pi2.1=0.75");
  f->add_option("--starts", fit.starts, "multi-start count (mle)");
  f->add_option("--max-iter", fit.max_iter, "quasi-Newton iterations per start (mle)");
  f->add_option("--tol", fit.tol, "gradient tolerance (mle)");
  f->add_option("--out", fit.out, "result JSON")->required();
  f->add_option("--prior-preset", fit.prior_preset, "noninformative or adams (bayes)");
  f->add_option("--chains", fit.chains, "chains (bayes)");
  f->add_option("--iterations", fit.iterations, "iterations per chain including burn-in (bayes)");
  f->add_option("--burn-in", fit.burn_in, "burn-in per chain; -1 for half (bayes)");
  f->add_option("--draws", fit.draws_path, "posterior draws CSV (bayes)");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "prevalence and cumulative incidence curves");
  p->add_option("--model", pred.model_path, "model spec JSON, used with a params file");
  p->add_option("--fit", pred.fit_path, "fit, posterior or params JSON")->required();
  p->add_option("--ages", pred.ages, "ages, start:stop:step or comma separated");
  p->add_option("--origin", pred.origin, "age at time 0");
  p->add_option("--disease-state", pred.disease_state, "observed disease state (1-based)");
  p->add_option("--out", pred.out, "curve CSV")->required();
  p->add_option("--derived", pred.derived_path, "derived quantities JSON (default <out>.derived.json)");

  IdentifyArgs id;
  auto* c = app.add_subcommand("check-identifiability", "identifiability and estimability probes");
  add_common(c, id.common);
  c->add_option("--mode", id.mode, "transform, flatness or scenarios")
      ->required()
      ->check(CLI::IsMember({"transform", "flatness", "scenarios"}));
  c->add_option("--params", id.params_path, "parameters (params or fit JSON; default simulation truth)");
  c->add_option("--data", id.data_path, "dataset CSV (default: generated restricted-path records)");
  c->add_option("--records", id.records, "generated restricted-path records");
  c->add_option("--rho1", id.rho1, "transform rho1");
  c->add_option("--rho2", id.rho2, "transform rho2");
  c->add_option("--tol", id.tol, "invariance tolerance");
  c->add_option("--direction", id.direction, "transform-rho1, transform-rho2 or a parameter name (flatness)");
  c->add_option("--half-width", id.half_width, "scan half width (flatness)");
  c->add_option("--points", id.points, "scan points (flatness)");
  c->add_option("--fix", id.fixes, "fix a parameter (flatness)");
  c->add_option("--ratio", id.ratios, "fix a ratio (flatness)");
  c->add_option("--preset", id.preset, "appendix-c (scenarios)");
  c->add_option("--scenarios", id.scenarios, "subset of S0..S4 (scenarios)");
  c->add_option("--reps", id.reps, "replications (scenarios)");
  c->add_option("-n", id.n, "subjects per replication (scenarios)");
  c->add_option("--starts", id.starts, "multi-start count per fit (scenarios)");
  c->add_option("--out", id.out, "report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  try {
    if (s->parsed()) return run_simulate(app, sim);
    if (f->parsed()) return run_fit(app, fit);
    if (p->parsed()) return run_predict(app, pred);
    if (c->parsed()) return run_identify(app, id);
  } catch (const mhmm::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const mhmm::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
