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

#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtta/data.hpp"
#include "mtta/losses.hpp"
#include "mtta/model.hpp"

namespace mtta {

enum class OptimizerKind { sgd, adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::map<std::string, Array> first_moment;   // adam only
    std::map<std::string, Array> second_moment;  // adam only

    static OptimizerState make_sgd(double lr);
    static OptimizerState make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
};

// p <- p - lr * g for every name in `subset`.
void sgd_step(ParamStore& params, const GradMap& grads, std::span<const std::string> subset, double lr);

// Bias-corrected Adam over `subset`; moments are created lazily per name.
void adam_step(OptimizerState& state, ParamStore& params, const GradMap& grads, std::span<const std::string> subset);

// Dispatches on state.kind (sgd steps also advance the step counter).
void optimizer_step(OptimizerState& state, ParamStore& params, const GradMap& grads,
                    std::span<const std::string> subset);

// How the auxiliary update of each batch element is committed to the model.
enum class Line7Mode {
    sequential,  // the K-step aux update is applied per video, inside the batch loop
    batch_mean,  // one step with the batch-mean aux gradient after the loop
};

struct TrainConfig {
    double inner_lr = 1e-1;  // lambda
    double meta_lr = 5e-5;   // gamma, outer loop
    double joint_lr = 5e-5;  // Adam learning rate of joint training
    int inner_steps = 3;     // K
    std::size_t batch_size = 8;
    int joint_epochs = 30;
    int meta_epochs = 10;
    std::uint64_t seed = 0;
    OptimizerKind outer_optimizer = OptimizerKind::adam;
    Line7Mode line7_mode = Line7Mode::sequential;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
    int epoch = 0;
    double l_pri = 0.0;
    double l_aux = 0.0;
    double l_joint = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

void write_history_csv(std::ostream& out, const TrainHistory& history);

// Mean loss bundle over a labeled dataset, no parameter updates.
LossBundle evaluate_losses(const ParamStore& params, const Dataset& dataset);

// Adam(joint_lr) on l_pri + l_aux over every parameter, seeded shuffled
// mini-batches, batch gradient = mean over videos.
TrainHistory train_joint(ParamStore& params, const Dataset& dataset, const TrainConfig& cfg);

struct InnerResult {
    ParamStore adapted;              // shared and aux replaced by omega, primary untouched
    std::vector<double> trajectory;  // l_aux before each step, then after the last (K + 1 values)
    GradMap first_grads;             // aux gradient at the entry parameters
};

// K plain SGD steps on l_aux over the shared and aux partitions of a copy.
// Never reads targets.
InnerResult inner_adapt(const ParamStore& params, const FeatureSequence& video, double lr, int steps,
                        bool record_final = true);

enum class UpdateKind { aux, outer };

// Receives the parameter state around every committed update of train_meta.
struct MetaObserver {
    std::function<void(UpdateKind, const ParamStore& before, const ParamStore& after)> on_update;
};

// Meta-auxiliary training with the first-order approximation of the outer
// gradient: grad of l_pri at (omega_s, theta_p) is applied to theta_s.
TrainHistory train_meta(ParamStore& params, const Dataset& dataset, const TrainConfig& cfg,
                        const MetaObserver* observer = nullptr);

}  // namespace mtta
