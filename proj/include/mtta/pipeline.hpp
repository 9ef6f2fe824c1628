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

// Experiment orchestration behind the command-line tool. Every run resolves
// one RunConfig, persists it as config.json next to its outputs, and can be
// replayed from that file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtta/adapt.hpp"
#include "mtta/data.hpp"
#include "mtta/eval.hpp"
#include "mtta/model.hpp"
#include "mtta/training.hpp"

namespace mtta {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct AblationConfig {
    std::vector<int> updates{1, 2, 3};
    std::vector<double> noise{0.0, 0.1, 0.3, 0.5};
    std::vector<double> drop_audio{0.0, 0.25, 0.5};
    std::vector<double> drop_train{0.0, 0.1, 0.25};
    SynthConfig cross_family;  // family B of the cross-dataset study
};

struct RunConfig {
    std::string command;  // gen-synth | train | adapt-eval | ablate | shift-score | gradcheck
    std::uint64_t seed = 0;
    int threads = 1;
    bool timing = false;  // wall-clock fields in adapt.jsonl (breaks byte-exact replays)

    std::string data_dir;       // holds train.avhf, test_iid.avhf, test_shifted.avhf
    std::string test_split = "test_shifted";
    std::string checkpoint;     // input checkpoint (meta stage, adapt-eval, ablate)
    std::string output_dir;

    std::string stage = "joint";  // train
    std::string study = "updates";  // ablate

    SynthConfig synth;
    ModelConfig model;
    TrainConfig train;
    AdaptStrategy strategy;
    AblationConfig ablation;

    // Copies `seed` into every seeded sub-config.
    void propagate_seed();
    void validate() const;
};

void to_json(nlohmann::json& j, const AblationConfig& c);
void from_json(const nlohmann::json& j, AblationConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Desk-scale settings of the synthetic benchmark (see README).
RunConfig benchmark_config(std::uint64_t seed);

// Family B of the cross-dataset study: same dimensions, different latent
// dynamics, noise and clip counts.
SynthConfig cross_family(const SynthConfig& a);

// Pipelines. Each writes into cfg.output_dir and returns nothing; errors are
// thrown as mtta::Error.
void run_gen_synth(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_adapt_eval(const RunConfig& cfg);
void run_ablate(const RunConfig& cfg);
void run_shift_score(const RunConfig& cfg);
// Returns the largest relative error found.
double run_gradcheck_pipeline(const RunConfig& cfg);

void run_command(const RunConfig& cfg);

// Pieces shared by the pipelines and the acceptance suite.
struct TrainedModels {
    ParamStore joint;
    ParamStore meta;
};

ParamStore train_joint_model(const RunConfig& cfg, const Dataset& train, TrainHistory* history = nullptr);
ParamStore train_meta_model(const RunConfig& cfg, const ParamStore& joint, const Dataset& train,
                            TrainHistory* history = nullptr);

struct FidRow {
    std::string split_a;
    std::string split_b;
    double fid = 0.0;
};

// FID(p1, p2), FID(p1, test), FID(p2, test) for seeded training halves.
std::vector<FidRow> shift_scores(const Dataset& train, const Dataset& test, std::uint64_t seed);

}  // namespace mtta
