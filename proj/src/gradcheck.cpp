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


#include "mtta/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "mtta/losses.hpp"
#include "mtta/model.hpp"
#include "mtta/numerics.hpp"

namespace mtta {

double relative_error(double analytic, double numeric, double floor) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

namespace {

// A stop-gradient edge reads its input as a constant. The analytic sweep gets
// detach(x) there; the finite-difference side gets x frozen at the base point.
using Builder = std::function<Var(Tape&, const std::vector<Var>& inputs, const std::vector<Var>& frozen)>;

Array random_array(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Array a({rows, cols});
    for (double& x : a.values()) x = dist(rng);
    return a;
}

// Entries pushed away from zero so relu kinks stay out of the stencil.
Array away_from_zero(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    Array a = random_array(rng, rows, cols, 0.1, 1.5);
    std::bernoulli_distribution sign(0.5);
    for (double& x : a.values()) {
        if (sign(rng)) x = -x;
    }
    return a;
}

double evaluate(const Builder& build, const std::vector<Array>& inputs, const std::vector<Array>& base) {
    Tape tape;
    std::vector<Var> vars, frozen;
    for (const auto& a : inputs) vars.push_back(tape.constant(a));
    for (const auto& a : base) frozen.push_back(tape.constant(a));
    return build(tape, vars, frozen).value().item();
}

GradCheckCase check(const std::string& name, const Builder& build, std::vector<Array> inputs, double step) {
    const std::vector<Array> base = inputs;
    Tape tape;
    std::vector<Var> vars, detached;
    for (const auto& a : inputs) vars.push_back(tape.leaf(a, true));
    for (Var v : vars) detached.push_back(detach(v));
    tape.backward(build(tape, vars, detached));

    GradCheckCase result{name, 0, 0.0};
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Array analytic = tape.grad(vars[k]);
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double saved = inputs[k][i];
            inputs[k][i] = saved + step;
            const double up = evaluate(build, inputs, base);
            inputs[k][i] = saved - step;
            const double down = evaluate(build, inputs, base);
            inputs[k][i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i], numeric));
            ++result.coordinates;
        }
    }
    return result;
}

// Weighted sum so every output entry carries a distinct upstream gradient.
Var contract(Tape& tape, Var out, std::mt19937_64& rng) {
    Array w = random_array(rng, out.value().rows(), out.value().cols(), -1.0, 1.0);
    return sum(mul(out, tape.constant(std::move(w))));
}

using Inputs = std::vector<Var>;

struct OpCase {
    std::string name;
    std::function<std::vector<Array>(std::mt19937_64&)> inputs;
    std::function<Var(const Inputs& x, const Inputs& frozen)> op;
};

std::vector<OpCase> op_cases() {
    auto one = [](std::size_t r, std::size_t c) {
        return [r, c](std::mt19937_64& rng) { return std::vector<Array>{away_from_zero(rng, r, c)}; };
    };
    auto two = [](std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2) {
        return [=](std::mt19937_64& rng) {
            return std::vector<Array>{away_from_zero(rng, r1, c1), away_from_zero(rng, r2, c2)};
        };
    };
    return {
        {"matmul", two(3, 4, 4, 2), [](const Inputs& x, const Inputs&) { return matmul(x[0], x[1]); }},
        {"transpose", one(3, 2), [](const Inputs& x, const Inputs&) { return transpose(x[0]); }},
        {"add", two(3, 3, 3, 3), [](const Inputs& x, const Inputs&) { return add(x[0], x[1]); }},
        {"sub", two(2, 4, 2, 4), [](const Inputs& x, const Inputs&) { return sub(x[0], x[1]); }},
        {"mul", two(3, 2, 3, 2), [](const Inputs& x, const Inputs&) { return mul(x[0], x[1]); }},
        {"scale", one(3, 3), [](const Inputs& x, const Inputs&) { return scale(x[0], -1.7); }},
        {"add_scalar", one(2, 3), [](const Inputs& x, const Inputs&) { return add_scalar(x[0], 0.3); }},
        {"add_row", two(4, 3, 1, 3), [](const Inputs& x, const Inputs&) { return add_row(x[0], x[1]); }},
        {"scale_by", two(3, 2, 1, 1), [](const Inputs& x, const Inputs&) { return scale_by(x[0], x[1]); }},
        {"pick", one(3, 3), [](const Inputs& x, const Inputs&) { return pick(x[0], 1, 2); }},
        {"softmax_rows", one(3, 4), [](const Inputs& x, const Inputs&) { return softmax_rows(x[0]); }},
        {"sigmoid", one(4, 2), [](const Inputs& x, const Inputs&) { return sigmoid(x[0]); }},
        {"relu", one(4, 3), [](const Inputs& x, const Inputs&) { return relu(x[0]); }},
        {"log",
         [](std::mt19937_64& rng) { return std::vector<Array>{random_array(rng, 3, 3, 0.2, 2.0)}; },
         [](const Inputs& x, const Inputs&) { return log(x[0]); }},
        {"square", one(3, 2), [](const Inputs& x, const Inputs&) { return square(x[0]); }},
        {"sum", one(3, 4), [](const Inputs& x, const Inputs&) { return sum(x[0]); }},
        {"mean", one(4, 2), [](const Inputs& x, const Inputs&) { return mean(x[0]); }},
        {"detach", two(3, 2, 3, 2),
         [](const Inputs& x, const Inputs& frozen) { return add(mul(frozen[0], x[1]), square(x[0])); }},
        {"attention",
         [](std::mt19937_64& rng) {
             return std::vector<Array>{away_from_zero(rng, 4, 3), away_from_zero(rng, 3, 3), away_from_zero(rng, 3, 3),
                                       away_from_zero(rng, 3, 3)};
         },
         [](const Inputs& x, const Inputs&) {
             return self_attention(x[0], AttentionWeights{x[1], x[2], x[3], std::nullopt});
         }},
    };
}

FeatureSequence random_video(std::mt19937_64& rng, const ModelConfig& cfg, std::size_t n, bool with_audio) {
    FeatureSequence v;
    v.id = "gradcheck";
    v.visual = random_array(rng, n, cfg.d_v, -1.0, 1.0);
    if (with_audio) v.audio = random_array(rng, n, cfg.d_a, -1.0, 1.0);
    Array y({n, 1});
    std::bernoulli_distribution coin(0.4);
    for (double& t : y.values()) t = coin(rng) ? 1.0 : 0.0;
    v.targets = std::move(y);
    return v;
}

// Detached streams of the base point.
struct Frozen {
    Array vv;
    Array aa;
};

Var mse(Var a, Var b) { return mean(square(sub(a, b))); }

// l_pri plus every auxiliary term present, rebuilt from the layer functions
// with the detached streams held at their base values.
double frozen_loss(const ParamStore& params, const FeatureSequence& video, const Frozen& frozen) {
    Tape tape;
    BoundParams p(tape, params, [](const std::string&, Partition) { return false; });
    Var vv = self_attention(tape.constant(video.visual), attention_weights(p, "sa_v"));
    Var hal_audio = hallucinate(vv, hallucination_weights(p, "hal_va"));
    Var aux = mse(hal_audio, tape.constant(frozen.aa));
    Var aa = tape.constant(frozen.aa);
    if (video.has_audio()) {
        aa = self_attention(tape.constant(*video.audio), attention_weights(p, "sa_a"));
        aux = add(aux, mse(hallucinate(aa, hallucination_weights(p, "hal_av")), tape.constant(frozen.vv)));
    }
    Var va = bimodal_attention(vv, aa, attention_weights(p, "bma_va"));
    Var av = bimodal_attention(aa, vv, attention_weights(p, "bma_av"));
    Var scores = score_regressor(vv, va, aa, av, score_weights(p));
    return add(primary_loss(scores, tape.constant(*video.targets)), aux).value().item();
}

GradCheckCase check_model(const std::string& name, const ParamStore& base, const FeatureSequence& video, double step) {
    const bool missing = !video.has_audio();
    Tape tape;
    BoundParams bound(tape, base, [](const std::string&, Partition) { return true; });
    ForwardTrace trace = forward(bound, video, missing);
    Var loss = primary_loss(trace.scores, tape.constant(*video.targets));
    if (missing) {
        loss = add(loss, mse(*trace.hallucinated_audio, detach(trace.aa)));
    } else {
        loss = add(loss, aux_loss(trace).aux);
    }
    tape.backward(loss);
    const GradMap analytic = bound.gradients();
    const Frozen frozen{trace.vv.value(), trace.aa.value()};

    ParamStore work = base;
    GradCheckCase result{name, 0, 0.0};
    for (const auto& [pname, grad] : analytic) {
        Array& p = work.value(pname);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p[i];
            p[i] = saved + step;
            const double up = frozen_loss(work, video, frozen);
            p[i] = saved - step;
            const double down = frozen_loss(work, video, frozen);
            p[i] = saved;
            result.max_rel_error = std::max(result.max_rel_error, relative_error(grad[i], (up - down) / (2.0 * step)));
            ++result.coordinates;
        }
    }
    return result;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck(std::uint64_t seed, int cases_per_op, int model_cases, double step) {
    std::mt19937_64 rng(seed);
    std::vector<GradCheckCase> out;
    for (const auto& op : op_cases()) {
        for (int c = 0; c < cases_per_op; ++c) {
            std::vector<Array> inputs = op.inputs(rng);
            const std::uint64_t weight_seed = rng();
            Builder build = [&op, weight_seed](Tape& tape, const Inputs& x, const Inputs& frozen) {
                std::mt19937_64 wrng(weight_seed);
                return contract(tape, op.op(x, frozen), wrng);
            };
            out.push_back(check(op.name + "#" + std::to_string(c), build, std::move(inputs), step));
        }
    }
    for (int c = 0; c < model_cases; ++c) {
        ModelConfig cfg{4, 3, 4, 3, rng()};
        ParamStore params = init_params(cfg);
        // Non-zero logits and biases so every path carries gradient.
        for (const auto& name : params.names()) {
            for (double& x : params.value(name).values()) x += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
        }
        const bool with_audio = c % 2 == 0;
        FeatureSequence video = random_video(rng, cfg, 3 + static_cast<std::size_t>(c % 3), with_audio);
        out.push_back(check_model(std::string(with_audio ? "joint_loss" : "joint_loss_missing_audio") + "#" +
                                      std::to_string(c),
                                  params, video, step));
    }
    return out;
}

}  // namespace mtta
