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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mhmm {

/// Invalid model, parameter, record, or option supplied by the caller.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file or command-line value; messages carry the location.
class InputError : public ModelError {
 public:
  using ModelError::ModelError;
};

/// A computation could not produce a trustworthy number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No mixture component with positive weight could have produced a sampled
/// subject (every sampling probability is zero).
class DegenerateConditioning : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Wraps a per-subject failure with the position of the subject in its dataset.
class SubjectError : public ModelError {
 public:
  SubjectError(std::size_t index, const std::string& what)
      : ModelError("subject " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace mhmm
