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

// Closed-form likelihood of the restricted-path subject in the two-type
// dementia model. Test oracle only; fits always use the matrix evaluator.
//
// Restricted path: followed from time 0 (a1 = 0), dementia-free visits on
// [a1, a2], dementia visits on [a3, a4], death observed at a5, no auxiliary
// information. With a_uv = a_v - a_u and (1-based rate labels)
//   k1 = l12 + l13 (type I),
//   kA = l12 + l14, kB = l23 + l25, kC = l36 (type II):
//
//   L = psi1 pi1 l12 l24 [e^{-k1 a12 - l24 (a23+a35)} - e^{-k1 (a12+a23) - l24 a35}] / (k1 - l24)
//     + psi2 { pi1 l12 l23 l36 [ e^{-kA a12 - kC (a23+a35)} / ((kA-kC)(kB-kC))
//                               + e^{-kA (a12+a23) - kC a35} / ((kA-kB)(kA-kC))
//                               - (e^{-kA a12 - kC (a23+a35)} + e^{-kB (a12+a23) - kC a35}
//                                  - e^{-kB a12 - kC (a23+a35)}) / ((kA-kB)(kB-kC)) ]
//              - pi2 l23 l36 [e^{-kB (a12+a23) - kC a35} - e^{-kB a12 - kC (a23+a35)}] / (kB - kC) }

#pragma once

#include <array>
#include <cmath>

#include "mhmm/error.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/model.hpp"

namespace mhmm {

/// Visit times a1..a5 of a restricted-path subject, a5 the death time.
using RestrictedPathTimes = std::array<double, 5>;

inline void check_restricted_path_times(const RestrictedPathTimes& a) {
  for (double t : a) {
    if (!std::isfinite(t)) throw ModelError("restricted-path times must be finite");
  }
  if (a[0] != 0.0) throw ModelError("restricted-path subject must be followed from time 0 (a1 = 0)");
  if (!(a[0] <= a[1] && a[1] < a[2] && a[2] <= a[3] && a[3] < a[4])) {
    throw ModelError("restricted-path times must satisfy a1 <= a2 < a3 <= a4 < a5");
  }
}

/// Matrix-evaluator record for the same subject: visits at the distinct
/// times among a1..a4 (dementia-free, then dementia), death at a5.
inline SubjectRecord restricted_path_record(const RestrictedPathTimes& a, std::string id = {}) {
  check_restricted_path_times(a);
  SubjectRecord r;
  r.id = std::move(id);
  r.entry_time = a[0];
  r.visit_times.push_back(a[0]);
  r.visit_states.push_back(0);
  if (a[1] > a[0]) {
    r.visit_times.push_back(a[1]);
    r.visit_states.push_back(0);
  }
  r.visit_times.push_back(a[2]);
  r.visit_states.push_back(1);
  if (a[3] > a[2]) {
    r.visit_times.push_back(a[3]);
    r.visit_states.push_back(1);
  }
  r.death_time = a[4];
  r.death_state = 2;
  return r;
}

/// Closed-form likelihood (not log) of a restricted-path subject under the
/// two-type dementia model. Throws when a rate combination in a denominator
/// is within 1e-8 of zero; use the matrix evaluator there.
inline double restricted_path_likelihood(const ParameterSet& p, const RestrictedPathTimes& a) {
  const MixtureModelSpec model = dementia_mixture_model();
  p.validate(model);
  check_restricted_path_times(a);
  const double l1_12 = p.rate(model, 0, 0, 1);
  const double l1_13 = p.rate(model, 0, 0, 2);
  const double l1_24 = p.rate(model, 0, 1, 3);
  const double l2_12 = p.rate(model, 1, 0, 1);
  const double l2_14 = p.rate(model, 1, 0, 3);
  const double l2_23 = p.rate(model, 1, 1, 2);
  const double l2_25 = p.rate(model, 1, 1, 4);
  const double l2_36 = p.rate(model, 1, 2, 5);

  const double k1 = l1_12 + l1_13;
  const double kA = l2_12 + l2_14;
  const double kB = l2_23 + l2_25;
  const double kC = l2_36;
  auto require_distinct = [](double x, double y, const char* what) {
    if (std::abs(x - y) <= 1e-8) {
      throw ModelError(std::string("closed form undefined: ") + what + " coincide; use the matrix likelihood");
    }
  };
  require_distinct(k1, l1_24, "lambda1.1-2 + lambda1.1-3 and lambda1.2-4");
  require_distinct(kA, kB, "lambda2.1-2 + lambda2.1-4 and lambda2.2-3 + lambda2.2-5");
  require_distinct(kB, kC, "lambda2.2-3 + lambda2.2-5 and lambda2.3-6");
  require_distinct(kA, kC, "lambda2.1-2 + lambda2.1-4 and lambda2.3-6");

  const double a12 = a[1] - a[0];
  const double a23 = a[2] - a[1];
  const double a35 = a[4] - a[2];

  const double type1 = p.pi[0][0] * l1_12 * l1_24 *
                       (std::exp(-k1 * a12 - l1_24 * (a23 + a35)) - std::exp(-k1 * (a12 + a23) - l1_24 * a35)) /
                       (k1 - l1_24);

  const double eA2 = std::exp(-kA * a12 - kC * (a23 + a35));
  const double eA3 = std::exp(-kA * (a12 + a23) - kC * a35);
  const double eB2 = std::exp(-kB * a12 - kC * (a23 + a35));
  const double eB3 = std::exp(-kB * (a12 + a23) - kC * a35);
  const double from_free = p.pi[1][0] * l2_12 * l2_23 * l2_36 *
                           (eA2 / ((kA - kC) * (kB - kC)) + eA3 / ((kA - kB) * (kA - kC)) -
                            (eA2 + eB3 - eB2) / ((kA - kB) * (kB - kC)));
  const double from_pathology = p.pi[1][1] * l2_23 * l2_36 * (eB3 - eB2) / (kB - kC);
  return p.psi[0] * type1 + p.psi[1] * (from_free - from_pathology);
}

}  // namespace mhmm
