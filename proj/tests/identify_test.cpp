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

#include "mhmm/identify.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "test_support.hpp"

namespace mhmm {
namespace {

const MixtureModelSpec kModel = dementia_mixture_model();

// rho range keeping both transformed death rates positive.
std::pair<double, double> positive_rho_range(const ParameterSet& p, int which) {
  const RhoRange r = equal_likelihood_rho_range(p);
  if (which == 1) {
    const double l12 = p.rate(kModel, 0, 0, 1);
    const double l13 = p.rate(kModel, 0, 0, 2);
    return {l12 / (l12 + l13), r.rho1_max};
  }
  const double l23 = p.rate(kModel, 1, 1, 2);
  const double l25 = p.rate(kModel, 1, 1, 4);
  return {l23 / (l23 + l25), r.rho2_max};
}

TEST(EqualLikelihoodTransform, UnitRhoIsIdentity) {
  const ParameterSet truth = dementia_simulation_truth();
  const ParameterSet star = equal_likelihood_transform(truth, 1.0, 1.0);
  for (const ParamRef& ref : model_parameters(kModel)) {
    EXPECT_NEAR(star.value(kModel, ref), truth.value(kModel, ref), 1e-15) << ref.name();
  }
}

TEST(EqualLikelihoodTransform, ClosedFormUnchangedAtTruth) {
  const ParameterSet truth = dementia_simulation_truth();
  const ParameterSet star = equal_likelihood_transform(truth, 0.9, 0.9);
  CounterRng rng(11);
  for (int k = 0; k < 20; ++k) {
    const RestrictedPathTimes a = random_restricted_path_times(rng);
    const double l = restricted_path_likelihood(truth, a);
    EXPECT_NEAR(restricted_path_likelihood(star, a), l, 1e-10 * l);
  }
}

TEST(EqualLikelihoodTransform, MovesOnlyTheStatedEntries) {
  const ParameterSet truth = dementia_simulation_truth();
  const ParameterSet star = equal_likelihood_transform(truth, 0.8, 0.7);
  EXPECT_DOUBLE_EQ(star.pi[0][0], 0.56);
  EXPECT_DOUBLE_EQ(star.rate(kModel, 0, 0, 1), 2.383 / 0.8);
  EXPECT_NEAR(star.rate(kModel, 0, 0, 2), (1 - 1 / 0.8) * 2.383 + 1.191, 1e-15);
  EXPECT_DOUBLE_EQ(star.pi[1][0], 0.28);
  EXPECT_DOUBLE_EQ(star.pi[1][1], 0.21);
  EXPECT_NEAR(star.pi[1][2], 0.51, 1e-15);
  EXPECT_DOUBLE_EQ(star.rate(kModel, 1, 1, 2), 2.457 / 0.7);
  EXPECT_EQ(star.rate(kModel, 0, 1, 3), 1.787);
  EXPECT_EQ(star.rate(kModel, 1, 0, 1), 1.802);
  EXPECT_EQ(star.rate(kModel, 1, 2, 5), 2.047);
  EXPECT_EQ(star.psi, truth.psi);
}

TEST(EqualLikelihoodTransform, RangeErrorsPrintTheRange) {
  const ParameterSet truth = dementia_simulation_truth();
  try {
    equal_likelihood_transform(truth, 1.5, 0.9);
    FAIL() << "expected a range error";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1.42857)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(equal_likelihood_transform(truth, 0.9, 1.5), ModelError);
  EXPECT_THROW(equal_likelihood_transform(truth, 0.0, 0.9), ModelError);
  EXPECT_THROW(equal_likelihood_transform(truth, 0.9, -1.0), ModelError);
}

TEST(EqualLikelihoodTransform, PositivityGuardNamesTheRate) {
  const ParameterSet truth = dementia_simulation_truth();
  // (1 - 1/rho1) 2.383 + 1.191 <= 0 once rho1 <= 0.667.
  try {
    equal_likelihood_transform(truth, 0.5, 0.9);
    FAIL() << "expected a positivity error";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda1.1-3"), std::string::npos) << e.what();
  }
  try {
    equal_likelihood_transform(truth, 0.9, 0.5);
    FAIL() << "expected a positivity error";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("lambda2.2-5"), std::string::npos) << e.what();
  }
}

TEST(InvarianceCheck, TransformIsInvariantOnRestrictedPaths) {
  const ParameterSet truth = dementia_simulation_truth();
  const auto records = make_restricted_path_records(100, 5);
  const TransformReport rep = restricted_path_invariance_check(records, truth, equal_likelihood_transform(truth, 0.8, 0.7));
  EXPECT_TRUE(rep.invariant) << rep.max_abs_loglik_gap;
  EXPECT_LE(rep.max_abs_loglik_gap, 1e-8);
  EXPECT_EQ(rep.gaps.size(), 100u);
}

TEST(InvarianceCheck, SameParametersGiveZeroGap) {
  const ParameterSet truth = dementia_simulation_truth();
  const TransformReport rep = restricted_path_invariance_check(make_restricted_path_records(30, 2), truth, truth);
  EXPECT_EQ(rep.max_abs_loglik_gap, 0.0);
  EXPECT_TRUE(rep.invariant);
}

TEST(InvarianceCheck, PerturbedIdentifiedRateIsDistinguishable) {
  const ParameterSet truth = dementia_simulation_truth();
  ParameterSet other = truth;
  other.set_rate(kModel, 0, 1, 3, 1.1 * 1.787);
  const TransformReport rep = restricted_path_invariance_check(make_restricted_path_records(100, 5), truth, other);
  EXPECT_FALSE(rep.invariant);
  EXPECT_GT(rep.max_abs_loglik_gap, 1e-4);
}

TEST(InvarianceCheck, RejectsRecordsOffTheRestrictedPath) {
  const ParameterSet truth = dementia_simulation_truth();
  auto records = make_restricted_path_records(5, 1);
  records[3].end_states = {std::vector<int>{}, std::nullopt};
  EXPECT_THROW(restricted_path_invariance_check(records, truth, truth), SubjectError);
  records = make_restricted_path_records(5, 1);
  records[1].death_time.reset();
  records[1].death_state = -1;
  EXPECT_THROW(restricted_path_invariance_check(records, truth, truth), SubjectError);
}

// Property: random theta and admissible rho leave every restricted-path
// subject's log-likelihood unchanged.
TEST(InvarianceProperty, RandomThetaAndRho) {
  CounterRng rng(2024);
  const auto records = make_restricted_path_records(40, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const ParameterSet theta = testing::random_dementia_params(rng);
    const auto [lo1, hi1] = positive_rho_range(theta, 1);
    const auto [lo2, hi2] = positive_rho_range(theta, 2);
    const double rho1 = lo1 + (hi1 - lo1) * (0.05 + 0.9 * rng.uniform());
    const double rho2 = lo2 + (hi2 - lo2) * (0.05 + 0.9 * rng.uniform());
    const TransformReport rep =
        restricted_path_invariance_check(records, theta, equal_likelihood_transform(theta, rho1, rho2));
    EXPECT_TRUE(rep.invariant) << "trial " << trial << " gap " << rep.max_abs_loglik_gap;
  }
}

// Property: a 5% change in any single rate is detected on 50 records.
TEST(InvarianceProperty, EveryRatePerturbationIsDistinguishable) {
  const ParameterSet truth = dementia_simulation_truth();
  const auto records = make_restricted_path_records(50, 3);
  for (int m = 0; m < 2; ++m) {
    for (std::size_t k = 0; k < truth.rates[m].size(); ++k) {
      for (double f : {0.95, 1.05}) {
        ParameterSet other = truth;
        other.rates[m][k] *= f;
        EXPECT_FALSE(restricted_path_invariance_check(records, truth, other).invariant)
            << "component " << m << " rate " << k << " factor " << f;
      }
    }
  }
}

TEST(FlatnessScan, SinglePointIsTheCentre) {
  const Objective f = [](const Eigen::VectorXd& x) { return -x.squaredNorm(); };
  const FlatnessCurve c = flatness_scan(f, Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(1.0, 0.0), 3.0, 1);
  ASSERT_EQ(c.offsets.size(), 1u);
  EXPECT_EQ(c.offsets[0], 0.0);
  EXPECT_EQ(c.logliks[0], -5.0);
}

TEST(FlatnessScan, NonFiniteValuesAreGaps) {
  const Objective f = [](const Eigen::VectorXd& x) {
    return x[0] > 0.5 ? -std::numeric_limits<double>::infinity() : -x[0] * x[0];
  };
  const FlatnessCurve c = flatness_scan(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 1.0, 5);
  EXPECT_TRUE(std::isnan(c.logliks.back()));
  EXPECT_DOUBLE_EQ(c.logliks.front(), -1.0);
  EXPECT_THROW(flatness_scan(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1.0, 5), ModelError);
  EXPECT_THROW(flatness_scan(f, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), 1.0, 0), ModelError);
  Eigen::VectorXd bad(1);
  bad[0] = NAN;
  EXPECT_THROW(flatness_scan(f, bad, Eigen::VectorXd::Ones(1), 1.0, 3), ModelError);
}

TEST(FlatnessScan, IdentifiedRateHasCurvature) {
  const ParameterSet truth = dementia_simulation_truth();
  const auto data = simulate_dataset(kModel, truth, 500, dementia_simulation_design(4));
  const ParameterLayout layout(kModel, dementia_scenarios(truth)[1].constraints);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(layout.free_dimension());
  dir[layout.coordinate_of(ParamRef::rate(0, 1, 3))] = 1.0;
  const FlatnessCurve c = flatness_scan(free_loglik(layout, data), layout.pack(truth), dir, 0.5, 5);
  EXPECT_GE(std::min(c.drop_minus, c.drop_plus), 2.0);
}

TEST(FlatnessScan, TransformTangentIsFlatOnRestrictedPaths) {
  const ParameterSet truth = dementia_simulation_truth();
  const auto data = make_restricted_path_records(100, 8);
  const ParameterLayout layout(kModel, {});
  const double eps = 1e-5;
  const Eigen::VectorXd tangent = (layout.pack(equal_likelihood_transform(truth, 1 + eps, 1.0)) -
                                   layout.pack(equal_likelihood_transform(truth, 1 - eps, 1.0))) /
                                  (2 * eps);
  const Objective f = free_loglik(layout, data);
  const FlatnessCurve flat = flatness_scan(f, layout.pack(truth), tangent, 0.02, 5);
  Eigen::VectorXd rate_dir = Eigen::VectorXd::Zero(layout.free_dimension());
  rate_dir[layout.coordinate_of(ParamRef::rate(0, 1, 3))] = 1.0;
  const FlatnessCurve steep = flatness_scan(f, layout.pack(truth), rate_dir, 0.02, 5);
  // The invariance curve bends, so a straight tangent keeps a small
  // second-order drop.
  EXPECT_LT(std::abs(flat.drop_minus), 1e-2);
  EXPECT_LT(std::abs(flat.drop_plus), 1e-2);
  EXPECT_GT(std::abs(steep.drop_minus) + std::abs(steep.drop_plus), 50 * (std::abs(flat.drop_minus) + std::abs(flat.drop_plus)))
      << steep.drop_minus << " " << steep.drop_plus;
}

TEST(Scenarios, ConstraintsHoldAtTruth) {
  const ParameterSet truth = dementia_simulation_truth();
  const auto sc = dementia_scenarios(truth);
  ASSERT_EQ(sc.size(), 5u);
  EXPECT_TRUE(sc[0].constraints.empty());
  ASSERT_EQ(sc[1].constraints.items.size(), 1u);
  EXPECT_EQ(describe(sc[1].constraints.items[0]), "pi2.2/pi2.1=0.7499999999999999");
  const auto& s2 = std::get<FixRatio>(sc[2].constraints.items[0]);
  EXPECT_EQ(s2.param, ParamRef::rate(1, 0, 3));
  EXPECT_EQ(s2.reference, ParamRef::rate(0, 0, 2));
  EXPECT_DOUBLE_EQ(s2.ratio, 0.819 / 1.191);
  EXPECT_EQ(sc[3].constraints.items.size(), 2u);
  const auto& s4 = std::get<FixRatio>(sc[4].constraints.items[0]);
  EXPECT_EQ(s4.param, ParamRef::rate(1, 2, 5));
  EXPECT_EQ(s4.reference, ParamRef::rate(0, 1, 3));
  for (const auto& s : sc) EXPECT_NO_THROW(ParameterLayout(kModel, s.constraints).pack(truth)) << s.name;
}

// Every parameter pinned except lambda1.2-4.
Scenario one_free_rate(const ParameterSet& truth) {
  Scenario s{"one", "all but lambda1.2-4 fixed", {}};
  for (const ParamRef& ref : model_parameters(kModel)) {
    if (ref == ParamRef::rate(0, 1, 3)) continue;
    if (ref.kind != ParamRef::Kind::Rate && (ref == ParamRef::psi(0) || ref == ParamRef::pi(0, 0) || ref == ParamRef::pi(1, 0))) {
      continue;  // group remainders are implied
    }
    s.constraints.fix(ref, truth.value(kModel, ref));
  }
  return s;
}

TEST(ScenarioHarness, OneFreeParameterRunsEndToEnd) {
  const ParameterSet truth = dementia_simulation_truth();
  HarnessOptions opt;
  opt.n = 150;
  opt.replications = 1;
  opt.mle.starts = 1;
  const auto res = scenario_harness(kModel, truth, {one_free_rate(truth)}, opt);
  ASSERT_EQ(res.size(), 1u);
  EXPECT_EQ(res[0].failures, 0);
  ASSERT_TRUE(res[0].replications[0].ok) << res[0].replications[0].error;
  EXPECT_EQ(res[0].replications[0].fit.free_hat.size(), 1);
  const ParameterSummary& s = res[0].parameters[9];
  EXPECT_EQ(s.param, ParamRef::rate(0, 1, 3));
  EXPECT_GT(s.mean, 0.5);
  EXPECT_LT(s.mean, 5.0);
}

TEST(ScenarioHarness, DeterministicAcrossRunsAndThreads) {
  const ParameterSet truth = dementia_simulation_truth();
  HarnessOptions opt;
  opt.n = 100;
  opt.replications = 3;
  opt.mle.starts = 1;
  opt.seed = 77;
  const std::vector<Scenario> sc = {one_free_rate(truth)};
  const auto a = scenario_harness(kModel, truth, sc, opt);
  opt.threads = 3;
  const auto b = scenario_harness(kModel, truth, sc, opt);
  for (std::size_t k = 0; k < a[0].parameters.size(); ++k) {
    EXPECT_EQ(a[0].parameters[k].mean, b[0].parameters[k].mean);
    EXPECT_EQ(a[0].parameters[k].empirical_se, b[0].parameters[k].empirical_se);
  }
  for (int r = 0; r < 3; ++r) EXPECT_EQ(a[0].replications[r].fit.loglik, b[0].replications[r].fit.loglik);
}

TEST(ScenarioHarness, FitFailuresAreRecordedNotFatal) {
  const ParameterSet truth = dementia_simulation_truth();
  HarnessOptions opt;
  opt.n = 50;
  opt.replications = 2;
  opt.mle.starts = 0;  // fit_mle rejects this
  const auto res = scenario_harness(kModel, truth, {one_free_rate(truth)}, opt);
  EXPECT_EQ(res[0].failures, 2);
  EXPECT_FALSE(res[0].replications[0].error.empty());
  EXPECT_EQ(res[0].parameters[0].fits, 0);
}

TEST(ScenarioHarness, RejectsScenariosViolatedByTruth) {
  const ParameterSet truth = dementia_simulation_truth();
  Scenario bad{"bad", "", {}};
  bad.constraints.tie(ParamRef::pi(1, 1), ParamRef::pi(1, 0), 2.0);
  HarnessOptions opt;
  opt.replications = 1;
  EXPECT_THROW(scenario_harness(kModel, truth, {bad}, opt), ModelError);
}

}  // namespace
}  // namespace mhmm
