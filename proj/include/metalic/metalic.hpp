// Copyright 2026 The metalic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

/// Umbrella header.

#include "metalic/bandit.hpp"
#include "metalic/config.hpp"
#include "metalic/csv.hpp"
#include "metalic/error.hpp"
#include "metalic/gp.hpp"
#include "metalic/ground_truth.hpp"
#include "metalic/harness.hpp"
#include "metalic/interface.hpp"
#include "metalic/jet.hpp"
#include "metalic/linearized.hpp"
#include "metalic/mlp.hpp"
#include "metalic/optim.hpp"
#include "metalic/plot.hpp"
#include "metalic/pool.hpp"
#include "metalic/problems.hpp"
#include "metalic/rng.hpp"
#include "metalic/sampling.hpp"
#include "metalic/trainer.hpp"
