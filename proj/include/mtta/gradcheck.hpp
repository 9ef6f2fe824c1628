// Copyright 2026 The MTTA Authors
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

// Central finite-difference verification of the tape gradients.

#include <cstdint>
#include <string>
#include <vector>

namespace mtta {

struct GradCheckCase {
    std::string name;
    std::size_t coordinates = 0;  // perturbed input entries
    double max_rel_error = 0.0;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-4);

// `cases_per_op` seeded cases of every differentiable op, plus full-model
// cases of l_pri + l_aux (normal and missing-audio inputs).
std::vector<GradCheckCase> run_gradcheck(std::uint64_t seed, int cases_per_op = 3, int model_cases = 4,
                                         double step = 1e-5);

}  // namespace mtta
