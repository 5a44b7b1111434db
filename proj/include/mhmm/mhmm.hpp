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

// Umbrella header.

#pragma once

#include "mhmm/closed_form.hpp"
#include "mhmm/constraints.hpp"
#include "mhmm/ctmc.hpp"
#include "mhmm/epi.hpp"
#include "mhmm/error.hpp"
#include "mhmm/estimate.hpp"
#include "mhmm/identify.hpp"
#include "mhmm/io.hpp"
#include "mhmm/likelihood.hpp"
#include "mhmm/mcmc.hpp"
#include "mhmm/model.hpp"
#include "mhmm/optimize.hpp"
#include "mhmm/parallel.hpp"
#include "mhmm/rng.hpp"
#include "mhmm/simulate.hpp"
