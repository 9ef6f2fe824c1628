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

#include "mtta/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "mtta/error.hpp"

namespace mtta {

std::vector<std::size_t> rank_clips(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

namespace {

void require_same_length(std::span<const double> scores, const std::vector<bool>& positives) {
    if (scores.size() != positives.size()) {
        fail(ErrorKind::dimension, "scores (" + std::to_string(scores.size()) + ") and labels (" +
                                       std::to_string(positives.size()) + ") differ in length");
    }
}

}  // namespace

std::optional<double> average_precision(std::span<const double> scores, const std::vector<bool>& positives) {
    return truncated_average_precision(scores, positives, scores.size());
}

std::optional<double> truncated_average_precision(std::span<const double> scores, const std::vector<bool>& positives,
                                                  std::size_t depth) {
    require_same_length(scores, positives);
    const auto total_pos = static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
    if (total_pos == 0 || depth == 0) return std::nullopt;
    const auto order = rank_clips(scores);
    const std::size_t limit = std::min(depth, order.size());
    double precision_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t rank = 0; rank < limit; ++rank) {
        if (positives[order[rank]]) {
            ++hits;
            precision_sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
        }
    }
    return precision_sum / static_cast<double>(std::min(depth, total_pos));
}

namespace {

template <typename F>
double mean_over_defined(std::span<const VideoPrediction> videos, F ap) {
    if (videos.empty()) fail(ErrorKind::contract, "metric over an empty set of videos");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& v : videos) {
        if (auto value = ap(v)) {
            total += *value;
            ++count;
        }
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace

double mean_average_precision(std::span<const VideoPrediction> videos) {
    return mean_over_defined(videos, [](const VideoPrediction& v) { return average_precision(v.scores, v.positives); });
}

double top5_map(std::span<const VideoPrediction> videos) {
    return mean_over_defined(
        videos, [](const VideoPrediction& v) { return truncated_average_precision(v.scores, v.positives, 5); });
}

double hit_at_1(std::span<const VideoPrediction> videos) {
    if (videos.empty()) fail(ErrorKind::contract, "metric over an empty set of videos");
    std::size_t hits = 0;
    for (const auto& v : videos) {
        require_same_length(v.scores, v.positives);
        if (v.scores.empty()) continue;
        if (v.positives[rank_clips(v.scores).front()]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(videos.size());
}

std::vector<bool> binarize_targets(std::span<const double> targets, BinarizeRule rule) {
    std::vector<bool> out(targets.size(), false);
    if (rule.kind == BinarizeRule::Kind::threshold) {
        for (std::size_t i = 0; i < targets.size(); ++i) out[i] = targets[i] >= rule.value;
        return out;
    }
    const auto order = rank_clips(targets);
    const std::size_t k = std::min(targets.size(), fraction_count(rule.value, targets.size()));
    for (std::size_t i = 0; i < k; ++i) out[order[i]] = true;
    return out;
}

MetricSummary summarize(std::span<const VideoPrediction> videos, double mean_l_pri) {
    MetricSummary s;
    s.map = mean_average_precision(videos);
    s.top5_map = top5_map(videos);
    s.hit_at_1 = hit_at_1(videos);
    s.mean_l_pri = mean_l_pri;
    s.n_videos = videos.size();
    for (const auto& v : videos) {
        if (std::none_of(v.positives.begin(), v.positives.end(), [](bool b) { return b; })) ++s.n_skipped;
    }
    return s;
}

void write_metrics_csv(std::ostream& out, const std::vector<std::pair<std::string, MetricSummary>>& rows) {
    out << "name,map,top5_map,hit_at_1,mean_l_pri,n_videos,n_skipped\n";
    out.precision(17);
    for (const auto& [name, s] : rows) {
        out << name << ',' << s.map << ',' << s.top5_map << ',' << s.hit_at_1 << ',' << s.mean_l_pri << ','
            << s.n_videos << ',' << s.n_skipped << '\n';
    }
}

// ---------------------------------------------------------------------------
// FID

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix to_matrix(const Array& a) {
    Matrix m(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a.at(i, j);
    return m;
}

void fit_gaussian(const Matrix& x, double epsilon, Vector& mu, Matrix& sigma) {
    mu = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mu.transpose();
    sigma = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    sigma.diagonal().array() += epsilon;
    if (!sigma.allFinite()) fail(ErrorKind::numeric, "non-finite covariance");
}

// Eigenvalues of a symmetric matrix, negative ones clamped to zero.
Matrix symmetric_sqrt(const Matrix& m) {
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) fail(ErrorKind::numeric, "eigendecomposition failed");
    const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

double trace_sqrt(const Matrix& m) {
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) fail(ErrorKind::numeric, "eigendecomposition failed");
    return eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

}  // namespace

ShiftScore fid_shift(const Array& set_a, const Array& set_b, double epsilon) {
    if (set_a.rank() != 2 || set_b.rank() != 2 || set_a.cols() != set_b.cols()) {
        fail(ErrorKind::dimension, "FID sample sets differ in width: " + shape_string(set_a.shape()) + " vs " +
                                       shape_string(set_b.shape()));
    }
    if (set_a.rows() < 2 || set_b.rows() < 2) fail(ErrorKind::numeric, "FID needs at least two samples per set");
    if (!set_a.all_finite() || !set_b.all_finite()) fail(ErrorKind::numeric, "FID samples are not finite");

    Vector mu_a, mu_b;
    Matrix sigma_a, sigma_b;
    fit_gaussian(to_matrix(set_a), epsilon, mu_a, sigma_a);
    fit_gaussian(to_matrix(set_b), epsilon, mu_b, sigma_b);

    const Matrix root_a = symmetric_sqrt(sigma_a);
    const double cross = trace_sqrt(root_a * sigma_b * root_a);
    const double fid = (mu_a - mu_b).squaredNorm() + sigma_a.trace() + sigma_b.trace() - 2.0 * cross;
    return ShiftScore{std::max(0.0, fid), set_a.cols(), set_a.rows(), set_b.rows(), epsilon};
}

Array video_embeddings(const Dataset& dataset) {
    if (dataset.empty()) fail(ErrorKind::contract, "embedding an empty dataset");
    const std::size_t width = dataset.d_v + dataset.d_a;
    Array out = Array::zeros(dataset.size(), width);
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const auto& video = dataset.videos[r];
        if (!video.audio) fail(ErrorKind::contract, "video " + video.id + " has no audio to embed");
        const double n = static_cast<double>(video.clips());
        for (std::size_t i = 0; i < video.clips(); ++i) {
            for (std::size_t j = 0; j < dataset.d_v; ++j) out.at(r, j) += video.visual.at(i, j) / n;
            for (std::size_t j = 0; j < dataset.d_a; ++j) out.at(r, dataset.d_v + j) += video.audio->at(i, j) / n;
        }
    }
    return out;
}

}  // namespace mtta
