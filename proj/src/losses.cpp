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

#include "mtta/losses.hpp"

#include <cmath>

#include "mtta/error.hpp"

namespace mtta {

Var primary_loss(Var scores, Var targets) {
    const Array& h = scores.value();
    const Array& y = targets.value();
    if (h.shape() != y.shape()) {
        fail(ErrorKind::dimension,
             "primary loss length mismatch: " + shape_string(h.shape()) + " vs " + shape_string(y.shape()));
    }
    for (double x : h.values()) {
        if (!(x > 0.0 && x < 1.0)) fail(ErrorKind::numeric, "primary loss: score outside (0, 1)");
    }
    for (double x : y.values()) {
        if (!(x >= 0.0 && x <= 1.0)) fail(ErrorKind::contract, "primary loss: target outside [0, 1]");
    }
    // -[y ln h + (1 - y) ln(1 - h)]
    Var one_minus_h = add_scalar(scale(scores, -1.0), 1.0);
    Var one_minus_y = add_scalar(scale(targets, -1.0), 1.0);
    Var ll = add(mul(targets, log(scores)), mul(one_minus_y, log(one_minus_h)));
    return scale(mean(ll), -1.0);
}

AuxTerms aux_loss(const ForwardTrace& trace) {
    if (!trace.hallucinated_audio || !trace.hallucinated_visual) {
        fail(ErrorKind::contract, "auxiliary loss needs both hallucinated streams");
    }
    Var hal_va = mean(square(sub(*trace.hallucinated_audio, detach(trace.aa))));
    Var hal_av = mean(square(sub(*trace.hallucinated_visual, detach(trace.vv))));
    return AuxTerms{hal_av, hal_va, add(hal_av, hal_va)};
}

Var entropy_loss(Var scores) {
    for (double x : scores.value().values()) {
        if (!(x > 0.0 && x < 1.0)) fail(ErrorKind::numeric, "entropy loss: score outside (0, 1)");
    }
    Var one_minus_h = add_scalar(scale(scores, -1.0), 1.0);
    Var ent = add(mul(scores, log(scores)), mul(one_minus_h, log(one_minus_h)));
    return scale(mean(ent), -1.0);
}

JointResult joint_loss(const ParamStore& params, const FeatureSequence& video) {
    if (!video.targets) fail(ErrorKind::contract, "joint loss needs a labeled video (" + video.id + ")");
    Tape tape;
    BoundParams bound(tape, params);
    ForwardTrace trace = forward(bound, video, false);
    Var l_pri = primary_loss(trace.scores, tape.constant(*video.targets));
    AuxTerms aux = aux_loss(trace);
    Var l_joint = add(l_pri, aux.aux);
    tape.backward(l_joint);

    JointResult out;
    out.losses = LossBundle{l_pri.value().item(), aux.hal_av.value().item(), aux.hal_va.value().item(),
                            aux.aux.value().item(), l_joint.value().item()};
    out.grads = bound.gradients();
    return out;
}

}  // namespace mtta
