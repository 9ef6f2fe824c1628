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


#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mtta/error.hpp"
#include "mtta/eval.hpp"

namespace mtta {
namespace {

// Rank of clip i (1-based): clips with a higher score, or an equal score
// and a lower index, come first.
std::size_t brute_rank(const std::vector<double>& s, std::size_t i) {
    std::size_t r = 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
    }
    return r;
}

// Precision terms of the positives within `depth`, in rank order.
std::optional<double> brute_ap(const std::vector<double>& s, const std::vector<bool>& pos, std::size_t depth,
                               bool truncated) {
    std::vector<std::size_t> ranks;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (pos[i]) ranks.push_back(brute_rank(s, i));
    }
    if (ranks.empty()) return std::nullopt;
    std::sort(ranks.begin(), ranks.end());
    double total = 0.0;
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        if (ranks[k] > depth) break;
        total += static_cast<double>(k + 1) / static_cast<double>(ranks[k]);
    }
    const std::size_t denom = truncated ? std::min(depth, ranks.size()) : ranks.size();
    return total / static_cast<double>(denom);
}

struct Case {
    std::vector<double> scores;
    std::vector<bool> positives;
};

Case random_case(std::mt19937_64& rng, std::size_t max_n) {
    std::uniform_int_distribution<std::size_t> size(1, max_n);
    std::uniform_int_distribution<int> level(0, 4);  // coarse levels create ties
    std::bernoulli_distribution coin(0.4);
    Case c;
    const std::size_t n = size(rng);
    for (std::size_t i = 0; i < n; ++i) {
        c.scores.push_back(level(rng) * 0.25);
        c.positives.push_back(coin(rng));
    }
    return c;
}

TEST(AveragePrecision, HandRankedCase) {
    const std::vector<double> s{0.9, 0.8, 0.1};
    const auto ap = average_precision(s, {true, false, true});
    ASSERT_TRUE(ap);
    EXPECT_NEAR(*ap, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
    EXPECT_NEAR(*ap, 0.8333, 1e-4);
}

TEST(AveragePrecision, AllPositiveIsOne) {
    const std::vector<double> s{0.1, 0.7, 0.3, 0.3};
    EXPECT_EQ(*average_precision(s, {true, true, true, true}), 1.0);
}

TEST(AveragePrecision, NoPositivesIsUndefined) {
    const std::vector<double> s{0.1, 0.7};
    EXPECT_FALSE(average_precision(s, {false, false}));
}

TEST(AveragePrecision, TiesBreakByAscendingIndex) {
    const std::vector<double> s{0.5, 0.5, 0.5};
    EXPECT_EQ(rank_clips(s), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_NEAR(*average_precision(s, {false, false, true}), 1.0 / 3.0, 1e-15);
}

TEST(AveragePrecision, MatchesBruteForceOnRandomSmallCases) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const Case c = random_case(rng, 6);
        EXPECT_EQ(average_precision(c.scores, c.positives), brute_ap(c.scores, c.positives, c.scores.size(), false));
        EXPECT_EQ(truncated_average_precision(c.scores, c.positives, 5), brute_ap(c.scores, c.positives, 5, true));
    }
}

TEST(TopFive, TenClipCaseMatchesBruteForce) {
    const std::vector<double> s{0.9, 0.1, 0.8, 0.7, 0.2, 0.6, 0.3, 0.5, 0.4, 0.05};
    const std::vector<bool> pos{false, true, true, false, true, true, false, true, false, true};
    // Ranked: 0(-) 2(+) 3(-) 5(+) 7(+) | 8 6 4(+) 1(+) 9(+)
    const double expected = (1.0 / 2.0 + 2.0 / 4.0 + 3.0 / 5.0) / 5.0;
    EXPECT_NEAR(*truncated_average_precision(s, pos, 5), expected, 1e-15);
    EXPECT_EQ(truncated_average_precision(s, pos, 5), brute_ap(s, pos, 5, true));
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const Case c = random_case(rng, 10);
        EXPECT_EQ(truncated_average_precision(c.scores, c.positives, 5), brute_ap(c.scores, c.positives, 5, true));
    }
}

TEST(Summary, MapOfTwoVideos) {
    std::vector<VideoPrediction> v{{{0.9, 0.1}, {true, false}}, {{0.9, 0.1}, {false, true}}};
    EXPECT_DOUBLE_EQ(mean_average_precision(v), 0.75);
    EXPECT_DOUBLE_EQ(hit_at_1(v), 0.5);
}

TEST(Summary, HitAtOneSingleVideo) {
    std::vector<VideoPrediction> v{{{0.2, 0.9, 0.4}, {false, true, false}}};
    EXPECT_EQ(hit_at_1(v), 1.0);
}

TEST(Summary, VideosWithoutPositivesAreSkippedForAp) {
    std::vector<VideoPrediction> v{{{0.9, 0.1}, {true, false}}, {{0.9, 0.1}, {false, false}}};
    const MetricSummary s = summarize(v, 0.3);
    EXPECT_EQ(s.map, 1.0);
    EXPECT_EQ(s.n_videos, 2u);
    EXPECT_EQ(s.n_skipped, 1u);
    EXPECT_EQ(s.hit_at_1, 0.5);
}

TEST(Summary, MatchesBruteForceAggregation) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<VideoPrediction> videos;
        double ap_sum = 0.0, top_sum = 0.0, hits = 0.0;
        int counted = 0;
        for (int k = 0; k < 5; ++k) {
            Case c = random_case(rng, 6);
            const auto ap = brute_ap(c.scores, c.positives, c.scores.size(), false);
            if (ap) {
                ap_sum += *ap;
                top_sum += *brute_ap(c.scores, c.positives, 5, true);
                ++counted;
            }
            std::size_t best = 0;
            for (std::size_t i = 0; i < c.scores.size(); ++i) {
                if (brute_rank(c.scores, i) == 1) best = i;
            }
            hits += c.positives[best] ? 1.0 : 0.0;
            videos.push_back({c.scores, c.positives});
        }
        const MetricSummary s = summarize(videos, 0.0);
        if (counted > 0) {
            EXPECT_EQ(s.map, ap_sum / counted);
            EXPECT_EQ(s.top5_map, top_sum / counted);
        }
        EXPECT_EQ(s.hit_at_1, hits / 5.0);
    }
}

TEST(Binarize, ThresholdMatchesComparison) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> y(50);
    for (double& x : y) x = u(rng);
    const auto b = binarize_targets(y, BinarizeRule::threshold(0.37));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(b[i], y[i] >= 0.37);
    const std::vector<double> binary{1, 0, 0, 1, 1};
    const auto same = binarize_targets(binary, BinarizeRule::threshold(0.5));
    for (std::size_t i = 0; i < binary.size(); ++i) EXPECT_EQ(same[i], binary[i] == 1.0);
}

TEST(Binarize, TopFractionCountsWithIndexTies) {
    const std::vector<double> y(10, 0.5);
    const auto b = binarize_targets(y, BinarizeRule::top_fraction(0.2));
    EXPECT_EQ(std::count(b.begin(), b.end(), true), 2);
    EXPECT_TRUE(b[0] && b[1]);
}

TEST(MetricsCsv, HeaderAndRow) {
    std::ostringstream os;
    MetricSummary s;
    s.map = 0.5;
    s.n_videos = 3;
    write_metrics_csv(os, {{"x", s}});
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "name,map,top5_map,hit_at_1,mean_l_pri,n_videos,n_skipped");
}

Array gaussian(std::mt19937_64& rng, std::size_t m, const std::vector<double>& mean) {
    std::normal_distribution<double> n(0.0, 1.0);
    Array a({m, mean.size()});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < mean.size(); ++c) a.at(r, c) = mean[c] + n(rng);
    return a;
}

TEST(Fid, IdenticalSetsGiveZero) {
    std::mt19937_64 rng(5);
    const Array a = gaussian(rng, 50, {0, 1, 2});
    EXPECT_NEAR(fid_shift(a, a).fid, 0.0, 1e-8);
}

TEST(Fid, GaussianMeanShiftApproachesSquaredDistance) {
    std::mt19937_64 rng(6);
    const std::vector<double> mu{1.0, -0.5, 0.25, 2.0};
    double mu2 = 0.0;
    for (double x : mu) mu2 += x * x;
    const Array a = gaussian(rng, 5000, {0, 0, 0, 0});
    const Array b = gaussian(rng, 5000, mu);
    EXPECT_LT(std::abs(fid_shift(a, b).fid - mu2), 0.1);
}

TEST(Fid, DiagonalCovarianceClosedForm) {
    // Cross designs give exactly diagonal unbiased covariances:
    // {+-a e1, +-b e2} around a centre -> diag(2a^2/3, 2b^2/3).
    auto cross = [](double a, double b, double cx, double cy) {
        return Array::from_rows({{cx + a, cy}, {cx - a, cy}, {cx, cy + b}, {cx, cy - b}});
    };
    const double eps = 1e-6;
    const Array s1 = cross(1.0, 2.0, 0.0, 0.0);
    const Array s2 = cross(3.0, 0.5, 1.0, -2.0);
    auto var = [&](double a) { return 2.0 * a * a / 3.0 + eps; };
    const double expected = std::pow(std::sqrt(var(1.0)) - std::sqrt(var(3.0)), 2) +
                            std::pow(std::sqrt(var(2.0)) - std::sqrt(var(0.5)), 2) + 1.0 + 4.0;
    const ShiftScore s = fid_shift(s1, s2, eps);
    EXPECT_NEAR(s.fid, expected, 1e-9);
    EXPECT_EQ(s.dims, 2u);
    EXPECT_EQ(s.n_a, 4u);
}

TEST(Fid, Symmetric) {
    std::mt19937_64 rng(7);
    const Array a = gaussian(rng, 40, {0, 0, 0});
    Array b = gaussian(rng, 60, {1, 0, -1});
    for (std::size_t r = 0; r < b.rows(); ++r) b.at(r, 0) *= 2.0;
    EXPECT_NEAR(fid_shift(a, b).fid, fid_shift(b, a).fid, 1e-9);
    EXPECT_GT(fid_shift(a, b).fid, 0.0);
}

TEST(Fid, NeedsTwoSamplesPerSet) {
    EXPECT_THROW(fid_shift(Array::from_rows({{1.0, 2.0}}), Array::from_rows({{1.0, 2.0}, {0.0, 1.0}})), Error);
}

TEST(Embeddings, MeanPooledVisualThenAudio) {
    Dataset d;
    d.d_v = 2;
    d.d_a = 1;
    FeatureSequence v;
    v.id = "a";
    v.visual = Array::from_rows({{1, 2}, {3, 4}});
    v.audio = Array::from_rows({{5}, {7}});
    d.videos = {v};
    const Array e = video_embeddings(d);
    EXPECT_EQ(e, Array::from_rows({{2, 3, 6}}));
    d.videos[0].audio.reset();
    EXPECT_THROW(video_embeddings(d), Error);
}

}  // namespace
}  // namespace mtta
