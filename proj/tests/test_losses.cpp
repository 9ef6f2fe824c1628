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


#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mtta/error.hpp"
#include "mtta/losses.hpp"
#include "mtta/training.hpp"
#include "test_support.hpp"

namespace mtta {
namespace {

using testing::central_difference;
using testing::jittered_params;
using testing::random_array;
using testing::random_video;
using testing::rel_err;
using testing::tiny_config;

double bce(const Array& h, const Array& y) {
    Tape tape;
    return primary_loss(tape.constant(h), tape.constant(y)).value().item();
}

TEST(PrimaryLoss, SymmetricHalfIsLn2) {
    EXPECT_NEAR(bce(Array::filled(5, 1, 0.5), Array::filled(5, 1, 0.5)), 0.693147, 1e-6);
    EXPECT_DOUBLE_EQ(bce(Array::filled(5, 1, 0.5), Array::filled(5, 1, 0.5)), std::log(2.0));
}

TEST(PrimaryLoss, HandComputedPair) {
    const double l = bce(Array::column(std::vector<double>{0.9, 0.1}), Array::column(std::vector<double>{1.0, 0.0}));
    EXPECT_NEAR(l, 0.10536, 1e-5);
    EXPECT_NEAR(l, -(std::log(0.9) + std::log(0.9)) / 2.0, 1e-15);
}

TEST(PrimaryLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(1);
    Array h = random_array(rng, 6, 1, 0.1, 0.9);
    const Array y = random_array(rng, 6, 1, 0.0, 1.0);
    Tape tape;
    Var vh = tape.leaf(h, true);
    tape.backward(primary_loss(vh, tape.constant(y)));
    const Array g = tape.grad(vh);
    for (std::size_t i = 0; i < h.size(); ++i) {
        EXPECT_LT(rel_err(g[i], central_difference([&] { return bce(h, y); }, h[i], 1e-6)), 1e-6);
    }
}

TEST(PrimaryLoss, SaturatedScoreIsNumericError) {
    try {
        bce(Array::column(std::vector<double>{1.0, 0.2}), Array::column(std::vector<double>{1.0, 0.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(PrimaryLoss, LengthMismatchIsDimensionError) {
    try {
        bce(Array::column(std::vector<double>{0.3, 0.2}), Array::column(std::vector<double>{1.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::dimension);
    }
}

TEST(AuxLoss, PerfectHallucinationIsZero) {
    std::mt19937_64 rng(2);
    Tape tape;
    ForwardTrace t;
    t.vv = tape.leaf(random_array(rng, 4, 3), true);
    t.aa = tape.leaf(random_array(rng, 4, 3), true);
    t.hallucinated_audio = tape.constant(t.aa.value());
    t.hallucinated_visual = tape.constant(t.vv.value());
    const AuxTerms terms = aux_loss(t);
    EXPECT_EQ(terms.aux.value().item(), 0.0);
    EXPECT_EQ(terms.hal_va.value().item(), 0.0);
    EXPECT_EQ(terms.hal_av.value().item(), 0.0);
}

TEST(AuxLoss, MissingHallucinationIsContractError) {
    Tape tape;
    ForwardTrace t;
    t.vv = tape.constant(Array({2, 2}));
    t.aa = tape.constant(Array({2, 2}));
    t.hallucinated_audio = tape.constant(Array({2, 2}));
    try {
        aux_loss(t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::contract);
    }
}

GradMap gradients_of(const ParamStore& p, const FeatureSequence& v,
                     const std::function<Var(const ForwardTrace&, Tape&)>& loss) {
    Tape tape;
    BoundParams b(tape, p);
    ForwardTrace t = forward(b, v, false);
    tape.backward(loss(t, tape));
    return b.gradients();
}

bool all_zero(const Array& a) {
    for (double x : a.values()) {
        if (x != 0.0) return false;
    }
    return true;
}

TEST(AuxLoss, GradientRoutingFollowsThePartitions) {
    const ParamStore p = jittered_params(ModelConfig{}, 3);
    std::mt19937_64 rng(4);
    const FeatureSequence v = random_video(rng, 8, 16, 12);
    const GradMap aux = gradients_of(p, v, [](const ForwardTrace& t, Tape&) { return aux_loss(t).aux; });
    const GradMap hal_va = gradients_of(p, v, [](const ForwardTrace& t, Tape&) { return aux_loss(t).hal_va; });
    const GradMap hal_av = gradients_of(p, v, [](const ForwardTrace& t, Tape&) { return aux_loss(t).hal_av; });
    const GradMap pri = gradients_of(
        p, v, [&](const ForwardTrace& t, Tape& tape) { return primary_loss(t.scores, tape.constant(*v.targets)); });

    bool sa_a_moves = false;
    for (const auto& [name, g] : aux) {
        const Partition part = p.partition(name);
        if (part == Partition::primary) EXPECT_TRUE(all_zero(g)) << name;
        if (name.rfind("sa_a.", 0) == 0) {
            EXPECT_TRUE(all_zero(hal_va.at(name))) << name;
            sa_a_moves = sa_a_moves || !all_zero(g);
        }
        if (name.rfind("sa_v.", 0) == 0) EXPECT_TRUE(all_zero(hal_av.at(name))) << name;
        if (part == Partition::aux) EXPECT_TRUE(all_zero(pri.at(name))) << name;
    }
    EXPECT_TRUE(sa_a_moves);
}

TEST(JointLoss, BundleIdentitiesHoldExactly) {
    const ParamStore p = jittered_params(ModelConfig{}, 5);
    std::mt19937_64 rng(6);
    const JointResult r = joint_loss(p, random_video(rng, 9, 16, 12));
    EXPECT_EQ(r.losses.l_aux, r.losses.l_hal_av + r.losses.l_hal_va);
    EXPECT_EQ(r.losses.l_joint, r.losses.l_pri + r.losses.l_aux);
    EXPECT_EQ(r.grads.size(), p.params().size());
}

TEST(JointLoss, UnlabeledVideoIsContractError) {
    std::mt19937_64 rng(7);
    EXPECT_THROW(joint_loss(init_params(ModelConfig{}), random_video(rng, 4, 16, 12, false)), Error);
}

TEST(JointTraining, ZeroInformationInstanceMovesTowardHalf) {
    FeatureSequence v;
    v.id = "flat";
    v.visual = Array::filled(6, 16, 0.3);
    v.audio = Array::filled(6, 12, -0.2);
    v.targets = Array::filled(6, 1, 0.5);
    Dataset d;
    d.videos = {v};
    d.d_v = 16;
    d.d_a = 12;
    d.split = "flat";
    ModelConfig mc;
    mc.seed = 8;
    ParamStore p = init_params(mc);
    p.value("score.fc2.b")[0] = 2.0;  // start far from 0.5
    TrainConfig tc;
    tc.joint_lr = 1e-2;
    tc.joint_epochs = 200;
    tc.batch_size = 1;
    train_joint(p, d, tc);
    double dev = 0.0;
    for (double h : predict(p, v)) dev += std::abs(h - 0.5);
    EXPECT_LT(dev / 6.0, 0.05);
}

TEST(JointTraining, LossTrendsDownOverFiftySteps) {
    const SynthSplits s = generate_synthetic(testing::small_synth(9));
    ModelConfig mc;
    mc.seed = 9;
    ParamStore p = init_params(mc);
    OptimizerState adam = OptimizerState::make_adam(1e-3);
    const auto names = p.names();
    std::vector<double> losses;
    for (int step = 0; step < 50; ++step) {
        GradMap total;
        double l = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            JointResult r = joint_loss(p, s.train.videos[i]);
            l += r.losses.l_joint / 4.0;
            for (auto& [name, g] : r.grads) {
                auto [it, fresh] = total.try_emplace(name, Array(g.shape()));
                for (std::size_t k = 0; k < g.size(); ++k) it->second[k] += g[k] / 4.0;
            }
        }
        losses.push_back(l);
        adam_step(adam, p, total, names);
    }
    int violations = 0;
    for (std::size_t i = 1; i < losses.size(); ++i) violations += losses[i] > losses[i - 1];
    EXPECT_LE(violations, 5);
    EXPECT_LT(losses.back(), losses.front());
}

}  // namespace
}  // namespace mtta
