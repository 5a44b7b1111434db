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

// Time-homogeneous continuous-time Markov chain primitives.
//
// Generators are small and dense (a handful of latent states per mixture
// component), so matrices use Eigen's bounded-size storage: no heap traffic in
// the likelihood hot loop, at the price of a hard cap of kMaxStates states.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mhmm/error.hpp"

namespace mhmm {

inline constexpr int kMaxStates = 16;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxStates, kMaxStates>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxStates>;
using ColVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxStates, 1>;

/// One allowed jump of a chain. States are 0-based.
struct Transition {
  int from = 0;
  int to = 0;
  double rate = 0.0;
};

/// Generator of a time-homogeneous CTMC: non-negative off-diagonal rates,
/// rows summing to zero, absorbing rows identically zero.
class IntensityMatrix {
 public:
  IntensityMatrix() = default;

  /// Validates a full generator. Off-diagonals must be finite and >= 0; the
  /// diagonal is recomputed from them.
  explicit IntensityMatrix(const Matrix& rates) : rates_(rates) {
    if (rates_.rows() != rates_.cols() || rates_.rows() < 1) {
      throw ModelError("intensity matrix must be square and non-empty");
    }
    for (int i = 0; i < dim(); ++i) {
      double exit = 0.0;
      for (int j = 0; j < dim(); ++j) {
        if (i == j) continue;
        const double r = rates_(i, j);
        if (!std::isfinite(r) || r < 0.0) {
          throw ModelError("intensity (" + std::to_string(i) + "," + std::to_string(j) +
                           ") must be finite and non-negative");
        }
        exit += r;
      }
      rates_(i, i) = -exit;
    }
  }

  int dim() const noexcept { return static_cast<int>(rates_.rows()); }
  double rate(int from, int to) const { return rates_(from, to); }
  const Matrix& matrix() const noexcept { return rates_; }
  double exit_rate(int state) const { return -rates_(state, state); }
  bool is_absorbing(int state) const { return rates_(state, state) == 0.0; }

 private:
  Matrix rates_;
};

/// Builds a generator from a transition list. States without outgoing
/// transitions are absorbing.
inline IntensityMatrix build_intensity(int dim, std::span<const Transition> transitions) {
  if (dim < 1 || dim > kMaxStates) {
    throw ModelError("chain dimension must be in 1.." + std::to_string(kMaxStates));
  }
  Matrix q = Matrix::Zero(dim, dim);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStates, kMaxStates> seen =
      decltype(seen)::Constant(dim, dim, false);
  for (const Transition& t : transitions) {
    if (t.from < 0 || t.from >= dim || t.to < 0 || t.to >= dim) {
      throw ModelError("transition state index out of range");
    }
    if (t.from == t.to) throw ModelError("transition must change state");
    if (!std::isfinite(t.rate) || t.rate < 0.0) {
      throw ModelError("transition rate must be finite and non-negative");
    }
    if (seen(t.from, t.to)) throw ModelError("duplicate transition");
    seen(t.from, t.to) = true;
    q(t.from, t.to) = t.rate;
  }
  return IntensityMatrix(q);
}

/// Row-stochastic matrix P(s, s + horizon).
class TransitionProbabilityMatrix {
 public:
  TransitionProbabilityMatrix(Matrix probs, double horizon) : probs_(std::move(probs)), horizon_(horizon) {}

  int dim() const noexcept { return static_cast<int>(probs_.rows()); }
  double horizon() const noexcept { return horizon_; }
  const Matrix& probs() const noexcept { return probs_; }
  double operator()(int i, int j) const { return probs_(i, j); }

 private:
  Matrix probs_;
  double horizon_;
};

namespace detail {

// Pade approximant pieces: exp(A) ~ (V - U)^{-1} (V + U).
inline void pade_low_order(const Matrix& a, std::span<const double> b, Matrix& u, Matrix& v) {
  const auto n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix odd = b[1] * ident;
  Matrix even = b[0] * ident;
  Matrix power = ident;
  for (std::size_t k = 2; k < b.size(); k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 < b.size()) odd += b[k + 1] * power;
  }
  u.noalias() = a * odd;
  v = even;
}

inline void pade13(const Matrix& a, Matrix& u, Matrix& v) {
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  const auto n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix inner = b[13] * a6 + b[11] * a4 + b[9] * a2;
  Matrix tmp = a6 * inner;
  tmp += b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident;
  u.noalias() = a * tmp;
  inner = b[12] * a6 + b[10] * a4 + b[8] * a2;
  v = a6 * inner;
  v += b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident;
}

}  // namespace detail

/// Matrix exponential by scaling and squaring (Higham 2005): Pade degree
/// 3/5/7/9 for small norms, degree 13 with 2^-s scaling otherwise.
inline Matrix expm(const Matrix& a) {
  static constexpr double b3[] = {120.0, 60.0, 12.0, 1.0};
  static constexpr double b5[] = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
  static constexpr double b7[] = {17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0};
  static constexpr double b9[] = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                  2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  static constexpr double theta3 = 1.495585217958292e-2;
  static constexpr double theta5 = 2.539398330063230e-1;
  static constexpr double theta7 = 9.504178996162932e-1;
  static constexpr double theta9 = 2.097847961257068e0;
  static constexpr double theta13 = 5.371920351148152e0;

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw NumericalError("matrix exponential of a non-finite matrix");
  Matrix u(a.rows(), a.cols());
  Matrix v(a.rows(), a.cols());
  int squarings = 0;
  if (norm1 <= theta3) {
    detail::pade_low_order(a, b3, u, v);
  } else if (norm1 <= theta5) {
    detail::pade_low_order(a, b5, u, v);
  } else if (norm1 <= theta7) {
    detail::pade_low_order(a, b7, u, v);
  } else if (norm1 <= theta9) {
    detail::pade_low_order(a, b9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
    detail::pade13(std::ldexp(1.0, -squarings) * a, u, v);
  }
  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

/// exp(dt * generator), with round-off cleanup: negative entries no larger
/// than 1e-12 in magnitude are clamped to zero and the row renormalised;
/// anything larger is reported as a numerical failure.
inline TransitionProbabilityMatrix transition_probability(const IntensityMatrix& generator, double dt) {
  if (!std::isfinite(dt)) throw ModelError("transition horizon must be finite");
  if (dt < 0.0) throw ModelError("transition horizon must be non-negative");
  const int n = generator.dim();
  if (dt == 0.0) return {Matrix::Identity(n, n), 0.0};

  Matrix p = expm(dt * generator.matrix());
  for (int i = 0; i < n; ++i) {
    if (generator.is_absorbing(i)) {
      p.row(i).setZero();
      p(i, i) = 1.0;
      continue;
    }
    for (int j = 0; j < n; ++j) {
      const double x = p(i, j);
      if (!std::isfinite(x) || x < -1e-12) {
        throw NumericalError("transition probability (" + std::to_string(i) + "," + std::to_string(j) +
                             ") = " + std::to_string(x) + " outside round-off tolerance");
      }
      if (x < 0.0) p(i, j) = 0.0;
    }
    const double total = p.row(i).sum();
    if (!(total > 0.0)) throw NumericalError("transition probability row has zero mass");
    p.row(i) /= total;
  }
  return {std::move(p), dt};
}

}  // namespace mhmm
