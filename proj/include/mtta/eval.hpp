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

// Ranking metrics and the Frechet-distance shift diagnostic.
//
// Ranking is by descending score; ties are broken by ascending clip index.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mtta/data.hpp"
#include "mtta/numerics.hpp"

namespace mtta {

// Clip indices ordered best first.
std::vector<std::size_t> rank_clips(std::span<const double> scores);

// Mean over positives of precision at their rank; nullopt without positives.
std::optional<double> average_precision(std::span<const double> scores, const std::vector<bool>& positives);

// AP restricted to the `depth` top-ranked clips, normalized by
// min(depth, #positives); nullopt without positives.
std::optional<double> truncated_average_precision(std::span<const double> scores, const std::vector<bool>& positives,
                                                  std::size_t depth);

struct VideoPrediction {
    std::vector<double> scores;
    std::vector<bool> positives;
};

// Means over videos with at least one positive.
double mean_average_precision(std::span<const VideoPrediction> videos);
double top5_map(std::span<const VideoPrediction> videos);
// Fraction of all videos whose top-ranked clip is positive.
double hit_at_1(std::span<const VideoPrediction> videos);

struct BinarizeRule {
    enum class Kind { threshold, top_fraction };
    Kind kind = Kind::threshold;
    double value = 0.5;

    static BinarizeRule threshold(double t) { return {Kind::threshold, t}; }
    static BinarizeRule top_fraction(double q) { return {Kind::top_fraction, q}; }
};

// threshold(t): y >= t. top_fraction(q): the round(q * n) highest targets,
// ties by ascending index.
std::vector<bool> binarize_targets(std::span<const double> targets, BinarizeRule rule = {});

struct MetricSummary {
    double map = 0.0;
    double top5_map = 0.0;
    double hit_at_1 = 0.0;
    double mean_l_pri = 0.0;
    std::size_t n_videos = 0;
    std::size_t n_skipped = 0;  // videos without positives, excluded from the AP means
};

MetricSummary summarize(std::span<const VideoPrediction> videos, double mean_l_pri);
void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricSummary>>& rows);

struct ShiftScore {
    double fid = 0.0;
    std::size_t dims = 0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    double epsilon = 0.0;
};

// Frechet distance between Gaussian fits (unbiased covariance, eps * I
// regularization) of the rows of two sample matrices.
ShiftScore fid_shift(const Array& set_a, const Array& set_b, double epsilon = 1e-6);

// One row per video: mean-pooled visual features followed by mean-pooled
// audio features.
Array video_embeddings(const Dataset& dataset);

}  // namespace mtta
