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

#include "mtta/data.hpp"
#include "mtta/model.hpp"
#include "mtta/numerics.hpp"

namespace mtta {

struct LossBundle {
    double l_pri = 0.0;
    double l_hal_av = 0.0;  // visual hallucinated from audio
    double l_hal_va = 0.0;  // audio hallucinated from visual
    double l_aux = 0.0;     // l_hal_av + l_hal_va
    double l_joint = 0.0;   // l_pri + l_aux
};

// Mean binary cross-entropy over clips. `scores` must lie strictly inside
// (0, 1); targets may be graded in [0, 1].
Var primary_loss(Var scores, Var targets);

struct AuxTerms {
    Var hal_av;
    Var hal_va;
    Var aux;
};

// MSE of each hallucination against the detached self-attended stream of
// the other modality, averaged over all n x d entries.
AuxTerms aux_loss(const ForwardTrace& trace);

// Mean binary entropy of the scores.
Var entropy_loss(Var scores);

struct JointResult {
    LossBundle losses;
    GradMap grads;  // every parameter
};

// One forward pass and one backward sweep of l_pri + l_aux.
JointResult joint_loss(const ParamStore& params, const FeatureSequence& video);

}  // namespace mtta
