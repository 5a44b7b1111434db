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

#include "mhmm/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mhmm/constraints.hpp"
#include "test_support.hpp"

namespace mhmm {
namespace {

TEST(DementiaModel, EmissionRows) {
  const MixtureModelSpec model = dementia_mixture_model();
  const Matrix e1 = model.components[0].emission.matrix();
  const Matrix e2 = model.components[1].emission.matrix();
  const double expected1[4][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 1}};
  const double expected2[6][3] = {{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 1}, {0, 0, 1}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(e1(i, j), expected1[i][j]);
  }
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_EQ(e2(i, j), expected2[i][j]);
  }
  // Pathology is clinically dementia-free.
  EXPECT_EQ(model.components[1].emission.observed(1), 0);
  EXPECT_NO_THROW(model.validate());
}

TEST(EmissionMatrix, RejectsProbabilisticRows) {
  EXPECT_THROW(EmissionMatrix::from_rows({{1, 0}, {1, 1}}), ModelError);
  EXPECT_THROW(EmissionMatrix::from_rows({{1, 0}, {0, 0}}), ModelError);
  EXPECT_THROW(EmissionMatrix::from_rows({{1, 0}, {0, 2}}), ModelError);
  EXPECT_EQ(EmissionMatrix::from_rows({{0, 1}, {1, 0}}).observed(0), 1);
}

TEST(ComponentSpec, ValidationCatchesStructuralErrors) {
  MixtureModelSpec model = dementia_mixture_model();
  MixtureModelSpec cyclic = model;
  cyclic.components[0].transitions.push_back({1, 0});
  EXPECT_THROW(cyclic.validate(), ModelError);

  MixtureModelSpec bad_emission = model;
  bad_emission.components[0].emission = EmissionMatrix(3, {0, 1, 1, 2});  // absorbing state emits dementia
  EXPECT_THROW(bad_emission.validate(), ModelError);

  MixtureModelSpec absorbing_support = model;
  absorbing_support.components[0].initial_support = {0, 2};
  EXPECT_THROW(absorbing_support.validate(), ModelError);

  MixtureModelSpec undeclared = model;
  undeclared.components[0].absorbing = {2};
  EXPECT_THROW(undeclared.validate(), ModelError);
}

TEST(ComponentSpec, DownstreamClosure) {
  const auto& c = dementia_mixture_model().components[1];
  EXPECT_EQ(c.downstream_closure({1}), (std::vector<int>{1, 2, 4, 5}));
  EXPECT_EQ(c.downstream_closure({2}), (std::vector<int>{2, 5}));
}

TEST(ParamRef, NamesRoundTrip) {
  const MixtureModelSpec model = dementia_mixture_model();
  for (const ParamRef& r : model_parameters(model)) EXPECT_EQ(ParamRef::parse(r.name()), r);
  EXPECT_EQ(ParamRef::parse("pi2.2"), ParamRef::pi(1, 1));
  EXPECT_EQ(ParamRef::parse("lambda1.2-4"), ParamRef::rate(0, 1, 3));
  EXPECT_THROW(ParamRef::parse("pi2"), ModelError);
  EXPECT_THROW(ParamRef::parse("lambda1.0-2"), ModelError);
  EXPECT_THROW(ParamRef::parse("theta"), ModelError);
}

TEST(ParameterSet, TruthIsValid) {
  const MixtureModelSpec model = dementia_mixture_model();
  EXPECT_NO_THROW(dementia_simulation_truth().validate(model));
  EXPECT_NO_THROW(dementia_cohort_estimates().validate(model));
  ParameterSet bad = dementia_simulation_truth();
  bad.pi[0][2] = 0.1;
  bad.pi[0][0] = 0.6;
  EXPECT_THROW(bad.validate(model), ModelError);
}

// ---------------------------------------------------------------------------
// Free coordinates

TEST(Layout, UnconstrainedDimensionAndZeroVector) {
  const ParameterLayout layout(dementia_mixture_model(), {});
  // psi: 1, pi1: 1, pi2: 2, rates: 3 + 5.
  EXPECT_EQ(layout.free_dimension(), 12);
  const ParameterSet p = layout.unpack(Eigen::VectorXd::Zero(12));
  EXPECT_DOUBLE_EQ(p.psi[0], 0.5);
  EXPECT_DOUBLE_EQ(p.psi[1], 0.5);
  EXPECT_DOUBLE_EQ(p.pi[0][0], 0.5);
  EXPECT_DOUBLE_EQ(p.pi[1][2], 1.0 / 3.0);
  EXPECT_EQ(p.pi[1][3], 0.0);
  for (const auto& comp : p.rates) {
    for (double r : comp) EXPECT_EQ(r, 1.0);
  }
}

TEST(Layout, RateOneMapsToZero) {
  const ParameterLayout layout(dementia_mixture_model(), {});
  ParameterSet p = dementia_simulation_truth();
  p.set_rate(layout.model(), 0, 0, 1, 1.0);
  const Eigen::VectorXd x = layout.pack(p);
  EXPECT_EQ(x[layout.coordinate_of(ParamRef::rate(0, 0, 1))], 0.0);
}

TEST(Layout, RatioConstraintEliminatesCoordinate) {
  ConstraintSet s1;
  s1.tie(ParamRef::pi(1, 1), ParamRef::pi(1, 0), 0.75);
  const ParameterLayout layout(dementia_mixture_model(), s1);
  EXPECT_EQ(layout.free_dimension(), 11);
  EXPECT_EQ(layout.coordinate_of(ParamRef::pi(1, 1)), -1);
  const ParameterSet truth = dementia_simulation_truth();
  const Eigen::VectorXd x = layout.pack(truth);
  const ParameterSet back = layout.unpack(x);
  EXPECT_NEAR(back.pi[1][1], 0.3, 1e-12);
  EXPECT_NEAR(back.pi[1][0], 0.4, 1e-12);
  EXPECT_NEAR(back.pi[1][1], 0.75 * back.pi[1][0], 1e-15);
  for (int m = 0; m < 2; ++m) {
    for (std::size_t k = 0; k < truth.rates[m].size(); ++k) EXPECT_NEAR(back.rates[m][k], truth.rates[m][k], 1e-12);
  }
}

TEST(Layout, FixZeroDropsStateFromSupport) {
  ConstraintSet c;
  c.fix(ParamRef::pi(1, 1), 0.0);
  const ParameterLayout layout(dementia_mixture_model(), c);
  EXPECT_EQ(layout.free_dimension(), 11);
  EXPECT_EQ(layout.status(ParamRef::pi(1, 1)), ParameterLayout::Status::Zero);
  EXPECT_EQ(effective_support(layout, 1), (std::vector<int>{0, 2}));
  const ParameterSet est = dementia_cohort_estimates();
  const ParameterSet back = layout.unpack(layout.pack(est));
  EXPECT_EQ(back.pi[1][1], 0.0);
  EXPECT_NEAR(back.pi[1][2], 0.026, 1e-12);
}

TEST(Layout, PackRejectsViolations) {
  ConstraintSet c;
  c.tie(ParamRef::pi(1, 1), ParamRef::pi(1, 0), 0.5);
  const ParameterLayout layout(dementia_mixture_model(), c);
  EXPECT_THROW(layout.pack(dementia_simulation_truth()), ModelError);
  ConstraintSet f;
  f.fix(ParamRef::rate(0, 1, 3), 2.0);
  EXPECT_THROW(ParameterLayout(dementia_mixture_model(), f).pack(dementia_simulation_truth()), ModelError);
}

TEST(Layout, RejectsBadConstraintSets) {
  const MixtureModelSpec model = dementia_mixture_model();
  ConstraintSet cycle;
  cycle.tie(ParamRef::rate(0, 0, 1), ParamRef::rate(0, 0, 2), 2.0)
      .tie(ParamRef::rate(0, 0, 2), ParamRef::rate(0, 1, 3), 2.0)
      .tie(ParamRef::rate(0, 1, 3), ParamRef::rate(0, 0, 1), 0.25);
  EXPECT_THROW(ParameterLayout(model, cycle), ModelError);
  ConstraintSet unknown;
  unknown.fix(ParamRef::rate(0, 0, 3), 1.0);
  EXPECT_THROW(ParameterLayout(model, unknown), ModelError);
  ConstraintSet mixed;
  mixed.tie(ParamRef::pi(0, 1), ParamRef::pi(1, 1), 1.0);
  EXPECT_THROW(ParameterLayout(model, mixed), ModelError);
  ConstraintSet overfull;
  overfull.fix(ParamRef::pi(1, 0), 0.7).fix(ParamRef::pi(1, 1), 0.4);
  EXPECT_THROW(ParameterLayout(model, overfull), ModelError);
  ConstraintSet inconsistent;
  inconsistent.fix(ParamRef::rate(0, 0, 1), 1.0).fix(ParamRef::rate(0, 0, 2), 1.0).tie(
      ParamRef::rate(0, 0, 2), ParamRef::rate(0, 0, 1), 2.0);
  EXPECT_THROW(ParameterLayout(model, inconsistent), ModelError);
}

TEST(Layout, UnpackGuards) {
  const ParameterLayout layout(dementia_mixture_model(), {});
  Eigen::VectorXd x = Eigen::VectorXd::Zero(12);
  x[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(layout.unpack(x), ModelError);
  x[3] = 701.0;
  EXPECT_THROW(layout.unpack(x), ModelError);
  x[3] = 699.0;
  EXPECT_NO_THROW(layout.unpack(x));
  EXPECT_THROW(layout.unpack(Eigen::VectorXd::Zero(11)), ModelError);
}

TEST(Layout, ConstraintStringsParse) {
  const Constraint a = parse_constraint("pi2.2=0");
  ASSERT_TRUE(std::holds_alternative<FixValue>(a));
  EXPECT_EQ(std::get<FixValue>(a).param, ParamRef::pi(1, 1));
  const Constraint b = parse_constraint("pi2.2/pi2.1=0.75");
  ASSERT_TRUE(std::holds_alternative<FixRatio>(b));
  EXPECT_EQ(std::get<FixRatio>(b).reference, ParamRef::pi(1, 0));
  EXPECT_EQ(describe(b), "pi2.2/pi2.1=0.75");
  EXPECT_THROW(parse_constraint("pi2.2"), ModelError);
  EXPECT_THROW(parse_constraint("pi2.2=abc"), ModelError);
}

// Property: every free vector unpacks to a valid parameter set satisfying the
// constraints; pack inverts unpack.
TEST(LayoutProperty, RoundTripAndConstraintSatisfaction) {
  const MixtureModelSpec model = dementia_mixture_model();
  std::vector<ConstraintSet> sets(5);
  sets[1].tie(ParamRef::pi(1, 1), ParamRef::pi(1, 0), 0.75);
  sets[2].tie(ParamRef::rate(1, 0, 3), ParamRef::rate(0, 0, 2), 0.8);
  sets[3].tie(ParamRef::pi(1, 1), ParamRef::pi(1, 0), 0.75).tie(ParamRef::rate(1, 0, 3), ParamRef::rate(0, 0, 2), 0.8);
  sets[4].fix(ParamRef::pi(1, 1), 0.0).fix(ParamRef::rate(0, 1, 3), 1.5).fix(ParamRef::pi(0, 1), 0.2);
  CounterRng rng(5);
  for (const ConstraintSet& cs : sets) {
    const ParameterLayout layout(model, cs);
    for (int rep = 0; rep < 200; ++rep) {
      Eigen::VectorXd x(layout.free_dimension());
      for (auto& v : x) v = 4.0 * rng.normal();
      const ParameterSet p = layout.unpack(x);
      ASSERT_NO_THROW(p.validate(model, 1e-14));
      for (const Constraint& c : cs.items) {
        if (const auto* f = std::get_if<FixValue>(&c)) {
          EXPECT_EQ(p.value(model, f->param), f->value);
        } else {
          const auto& r = std::get<FixRatio>(c);
          const double lhs = p.value(model, r.param);
          EXPECT_NEAR(lhs, r.ratio * p.value(model, r.reference), 1e-12 * std::max(1.0, lhs));
        }
      }
      const Eigen::VectorXd back = layout.pack(p);
      EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()));
    }
  }
}

}  // namespace
}  // namespace mhmm
