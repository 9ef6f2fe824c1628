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

// Per-video test-time adaptation. Every strategy starts from the same base
// parameters and discards its updates after predicting.

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtta/data.hpp"
#include "mtta/eval.hpp"
#include "mtta/model.hpp"

namespace mtta {

enum class StrategyKind {
    hallucination,  // SGD on l_aux over shared + aux, predict with {omega_s, theta_p}
    entropy,        // SGD on mean binary entropy of the scores over shared only
    pseudo_label,   // rounds of confident-clip BCE over shared + primary
    none,
};

std::string_view to_string(StrategyKind kind) noexcept;
StrategyKind strategy_from_string(std::string_view name);  // accepts "halluc" and "pseudo" as short names

struct AdaptStrategy {
    StrategyKind kind = StrategyKind::hallucination;
    double lr = 1e-1;
    int steps = 3;
    double tau_lo = 0.2;
    double tau_hi = 0.8;

    void validate() const;
};

void to_json(nlohmann::json& j, const AdaptStrategy& s);
void from_json(const nlohmann::json& j, AdaptStrategy& s);

struct AdaptationReport {
    std::string video_id;
    std::vector<double> losses;  // surrogate loss before each step and after the last
    std::vector<double> pre;     // scores of the base parameters
    std::vector<double> post;    // scores after adaptation
    double millis = 0.0;
    bool missing_audio = false;
    bool skipped = false;             // no adaptation signal (hallucination without audio)
    std::vector<int> idle_rounds;     // pseudo-label rounds without confident clips
};

struct AdaptOutcome {
    std::vector<double> scores;
    AdaptationReport report;
    ParamStore adapted;  // the per-video parameters that produced `scores`
};

// Never reads video.targets.
AdaptOutcome adapt_and_predict(const ParamStore& params, const FeatureSequence& video, const AdaptStrategy& strategy);

struct SplitResult {
    MetricSummary summary;
    std::vector<AdaptationReport> reports;  // in dataset order
    std::vector<VideoPrediction> predictions;
};

// Independent adaptation of every video from the same base parameters. The
// result does not depend on `threads`.
SplitResult evaluate_split(const ParamStore& params, const Dataset& dataset, const AdaptStrategy& strategy,
                           int threads = 1, BinarizeRule rule = {});

nlohmann::json report_to_json(const AdaptationReport& report, bool include_timing = true);
void write_reports_jsonl(std::ostream& out, const std::vector<AdaptationReport>& reports, bool include_timing = true);

}  // namespace mtta
