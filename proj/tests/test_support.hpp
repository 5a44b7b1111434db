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

// Shared oracles and generators for the test suites.

#pragma once

#include <cmath>
#include <vector>

#include "mhmm/ctmc.hpp"
#include "mhmm/model.hpp"
#include "mhmm/rng.hpp"

namespace mhmm::testing {

/// exp(t Q) by uniformisation: sum_k Poisson(k; q t) (I + Q/q)^k with
/// q = max exit rate. Poisson weights are formed in log space.
inline Matrix uniformization_expm(const Matrix& gen, double t) {
  const auto n = gen.rows();
  double q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) q = std::max(q, -gen(i, i));
  if (q == 0.0 || t == 0.0) return Matrix::Identity(n, n);
  const Matrix step = Matrix::Identity(n, n) + gen / q;
  const double mean = q * t;
  const int terms = static_cast<int>(mean + 12.0 * std::sqrt(mean) + 60.0);
  Matrix power = Matrix::Identity(n, n);
  Matrix sum = Matrix::Zero(n, n);
  for (int k = 0; k <= terms; ++k) {
    const double w = std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
    sum += w * power;
    power = power * step;
  }
  return sum;
}

/// Random generator of dimension `dim`; each off-diagonal is present with
/// probability `density` and uniform on (0, max_rate). Some rows may be absorbing.
inline IntensityMatrix random_generator(CounterRng& rng, int dim, double max_rate, double density = 0.6) {
  Matrix q = Matrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      if (i != j && rng.uniform() < density) q(i, j) = max_rate * rng.uniform();
    }
  }
  return IntensityMatrix(q);
}

/// Random valid parameter set for the two-type dementia model.
inline ParameterSet random_dementia_params(CounterRng& rng, double lo = 0.2, double hi = 3.0) {
  const MixtureModelSpec model = dementia_mixture_model();
  ParameterSet p;
  const double psi1 = 0.1 + 0.8 * rng.uniform();
  p.psi = {psi1, 1.0 - psi1};
  const double a = 0.1 + 0.8 * rng.uniform();
  p.pi = {{a, 1.0 - a, 0.0, 0.0}, {}};
  double w[3];
  double total = 0.0;
  for (double& x : w) total += (x = 0.2 + rng.uniform());
  p.pi[1] = {w[0] / total, w[1] / total, 0.0, 0.0, 0.0, 0.0};
  p.pi[1][2] = 1.0 - p.pi[1][0] - p.pi[1][1];
  p.rates.resize(2);
  for (int m = 0; m < 2; ++m) {
    for (std::size_t k = 0; k < model.components[m].transitions.size(); ++k) {
      p.rates[m].push_back(lo + (hi - lo) * rng.uniform());
    }
  }
  return p;
}

}  // namespace mhmm::testing
