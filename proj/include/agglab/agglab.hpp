// Copyright 2026 The agglab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AGGLAB_AGGLAB_HPP_
#define AGGLAB_AGGLAB_HPP_

#include "agglab/audit.hpp"
#include "agglab/checks.hpp"
#include "agglab/csv_io.hpp"
#include "agglab/dataset.hpp"
#include "agglab/experiment.hpp"
#include "agglab/linear_model.hpp"
#include "agglab/mechanisms.hpp"
#include "agglab/mlp.hpp"
#include "agglab/rng.hpp"

#endif  // AGGLAB_AGGLAB_HPP_
