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

#include "mtta/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mtta/error.hpp"
#include "mtta/eval.hpp"

namespace mtta {

void FeatureSequence::validate() const {
    if (visual.rank() != 2) fail(ErrorKind::dimension, "video " + id + ": visual features must be n x d_v");
    const std::size_t n = visual.rows();
    if (!visual.all_finite()) fail(ErrorKind::numeric, "video " + id + ": non-finite visual features");
    if (audio) {
        if (audio->rank() != 2 || audio->rows() != n) {
            fail(ErrorKind::dimension, "video " + id + ": audio has shape " + shape_string(audio->shape()) +
                                           " but video has " + std::to_string(n) + " clips");
        }
        if (!audio->all_finite()) fail(ErrorKind::numeric, "video " + id + ": non-finite audio features");
    }
    if (targets) {
        if (targets->shape() != Shape{n, 1}) {
            fail(ErrorKind::dimension, "video " + id + ": targets have shape " + shape_string(targets->shape()));
        }
        for (double y : targets->values()) {
            if (!(y >= 0.0 && y <= 1.0)) fail(ErrorKind::numeric, "video " + id + ": target outside [0, 1]");
        }
    }
}

void Dataset::validate() const {
    for (const auto& v : videos) {
        v.validate();
        if (v.visual.cols() != d_v || (v.audio && v.audio->cols() != d_a)) {
            fail(ErrorKind::dimension, "video " + v.id + " does not match dataset dims " + std::to_string(d_v) + "/" +
                                           std::to_string(d_a));
        }
    }
}

void SynthConfig::validate() const {
    if (!(rho >= 0.0 && rho < 1.0)) fail(ErrorKind::config, "rho must lie in [0, 1)");
    if (!(highlight_quantile > 0.0 && highlight_quantile < 1.0)) {
        fail(ErrorKind::config, "highlight_quantile must lie in (0, 1)");
    }
    if (min_clips < 2 || max_clips < min_clips) fail(ErrorKind::config, "need 2 <= min_clips <= max_clips");
    if (d_z < 1 || d_v < 1 || d_a < 1) fail(ErrorKind::config, "synthetic dimensions must be >= 1");
    if (sigma_v < 0.0 || sigma_a < 0.0) fail(ErrorKind::config, "noise scales must be >= 0");
    for (const ModalityShift* s : {&audio_shift, &visual_shift}) {
        if (s->offset < 0.0 || s->noise < 0.0) fail(ErrorKind::config, "shift scales must be >= 0");
    }
}

void to_json(nlohmann::json& j, const ModalityShift& s) {
    j = nlohmann::json{{"mix", s.mix}, {"offset", s.offset}, {"noise", s.noise}};
}

void from_json(const nlohmann::json& j, ModalityShift& s) {
    s.mix = j.value("mix", s.mix);
    s.offset = j.value("offset", s.offset);
    s.noise = j.value("noise", s.noise);
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
    j = nlohmann::json{{"n_train", c.n_train},
                       {"n_test_iid", c.n_test_iid},
                       {"n_test_shifted", c.n_test_shifted},
                       {"min_clips", c.min_clips},
                       {"max_clips", c.max_clips},
                       {"d_z", c.d_z},
                       {"d_v", c.d_v},
                       {"d_a", c.d_a},
                       {"rho", c.rho},
                       {"sigma_v", c.sigma_v},
                       {"sigma_a", c.sigma_a},
                       {"highlight_quantile", c.highlight_quantile},
                       {"mixing_seed", c.mixing_seed},
                       {"seed", c.seed},
                       {"audio_shift", c.audio_shift},
                       {"visual_shift", c.visual_shift},
                       {"float32_storage", c.float32_storage}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
    c.n_train = j.value("n_train", c.n_train);
    c.n_test_iid = j.value("n_test_iid", c.n_test_iid);
    c.n_test_shifted = j.value("n_test_shifted", c.n_test_shifted);
    c.min_clips = j.value("min_clips", c.min_clips);
    c.max_clips = j.value("max_clips", c.max_clips);
    c.d_z = j.value("d_z", c.d_z);
    c.d_v = j.value("d_v", c.d_v);
    c.d_a = j.value("d_a", c.d_a);
    c.rho = j.value("rho", c.rho);
    c.sigma_v = j.value("sigma_v", c.sigma_v);
    c.sigma_a = j.value("sigma_a", c.sigma_a);
    c.highlight_quantile = j.value("highlight_quantile", c.highlight_quantile);
    c.mixing_seed = j.value("mixing_seed", c.mixing_seed);
    c.seed = j.value("seed", c.seed);
    if (j.contains("audio_shift")) from_json(j.at("audio_shift"), c.audio_shift);
    if (j.contains("visual_shift")) from_json(j.at("visual_shift"), c.visual_shift);
    c.float32_storage = j.value("float32_storage", c.float32_storage);
}

std::size_t fraction_count(double fraction, std::size_t count) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 0.5));
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Array gaussian_matrix(std::size_t rows, std::size_t cols, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Array m = Array::zeros(rows, cols);
    for (double& x : m.values()) x = scale * normal(rng);
    return m;
}

// Gram-Schmidt on a Gaussian matrix.
Array random_rotation(std::size_t d, std::mt19937_64& rng) {
    Array q = gaussian_matrix(d, d, 1.0, rng);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t r = 0; r < d; ++r) dot += q.at(r, c) * q.at(r, prev);
            for (std::size_t r = 0; r < d; ++r) q.at(r, c) -= dot * q.at(r, prev);
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < d; ++r) norm += q.at(r, c) * q.at(r, c);
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < d; ++r) q.at(r, c) /= norm;
    }
    return q;
}

struct AffineShift {
    Array matrix;  // d x d, applied as row * matrix^T
    std::vector<double> offset;
    double noise = 0.0;
};

AffineShift make_shift(const ModalityShift& spec, std::size_t d, std::mt19937_64& rng) {
    AffineShift s{random_rotation(d, rng), std::vector<double>(d, 0.0), spec.noise};
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            s.matrix.at(i, j) = spec.mix * s.matrix.at(i, j) + (i == j ? 1.0 - spec.mix : 0.0);
        }
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& b : s.offset) b = spec.offset * normal(rng);
    return s;
}

Array apply_shift(const Array& x, const AffineShift& s, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Array out = matmul(x, transpose(s.matrix));
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) += s.offset[j] + s.noise * normal(rng);
    }
    return out;
}

void round_to_f32(Array& a) {
    for (double& x : a.values()) x = static_cast<double>(static_cast<float>(x));
}

struct Generator {
    const SynthConfig& cfg;
    Array mix_v;  // d_v x d_z
    Array mix_a;  // d_a x d_z
    std::vector<double> w_star;
    AffineShift shift_v;
    AffineShift shift_a;

    explicit Generator(const SynthConfig& c) : cfg(c) {
        std::mt19937_64 rng(c.mixing_seed);
        const double scale = 1.0 / std::sqrt(static_cast<double>(c.d_z));
        mix_v = gaussian_matrix(c.d_v, c.d_z, scale, rng);
        mix_a = gaussian_matrix(c.d_a, c.d_z, scale, rng);
        std::normal_distribution<double> normal(0.0, 1.0);
        w_star.resize(c.d_z);
        double norm = 0.0;
        for (double& w : w_star) {
            w = normal(rng);
            norm += w * w;
        }
        for (double& w : w_star) w /= std::sqrt(norm);
        shift_a = make_shift(c.audio_shift, c.d_a, rng);
        shift_v = make_shift(c.visual_shift, c.d_v, rng);
    }

    FeatureSequence video(const std::string& id, std::uint64_t video_seed, bool shifted) const {
        std::mt19937_64 rng(video_seed);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> length(cfg.min_clips, cfg.max_clips);
        const std::size_t n = length(rng);

        Array z = Array::zeros(n, cfg.d_z);
        const double innovation = std::sqrt(1.0 - cfg.rho * cfg.rho);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < cfg.d_z; ++k) {
                z.at(i, k) = (i == 0 ? 0.0 : cfg.rho * z.at(i - 1, k)) + (i == 0 ? 1.0 : innovation) * normal(rng);
            }
        }
        Array visual = matmul(z, transpose(mix_v));
        Array audio = matmul(z, transpose(mix_a));
        for (double& x : visual.values()) x += cfg.sigma_v * normal(rng);
        for (double& x : audio.values()) x += cfg.sigma_a * normal(rng);

        std::vector<double> salience(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < cfg.d_z; ++k) salience[i] += w_star[k] * z.at(i, k);
        const std::size_t positives = std::clamp<std::size_t>(fraction_count(cfg.highlight_quantile, n), 1, n - 1);
        const auto order = rank_clips(salience);
        Array targets = Array::zeros(n, 1);
        for (std::size_t r = 0; r < positives; ++r) targets[order[r]] = 1.0;

        if (shifted) {
            if (cfg.visual_shift.active()) visual = apply_shift(visual, shift_v, rng);
            if (cfg.audio_shift.active()) audio = apply_shift(audio, shift_a, rng);
        }
        if (cfg.float32_storage) {
            round_to_f32(visual);
            round_to_f32(audio);
        }
        return FeatureSequence{id, std::move(visual), std::move(audio), std::move(targets)};
    }

    Dataset split(const std::string& name, std::size_t count, std::uint64_t stream, bool shifted) const {
        Dataset d;
        d.split = name;
        d.d_v = cfg.d_v;
        d.d_a = cfg.d_a;
        d.provenance = {{"generator", "synthetic"}, {"config", cfg}};
        d.videos.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint64_t video_seed = mix_seed(mix_seed(cfg.seed, stream), i);
            d.videos.push_back(video(name + "-" + std::to_string(i), video_seed, shifted));
        }
        return d;
    }
};

}  // namespace

SynthSplits generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Generator gen(cfg);
    return SynthSplits{gen.split("train", cfg.n_train, 1, false), gen.split("test_iid", cfg.n_test_iid, 2, false),
                       gen.split("test_shifted", cfg.n_test_shifted, 3, true)};
}

// ---------------------------------------------------------------------------
// Transforms

Dataset corrupt_gaussian(const Dataset& dataset, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) fail(ErrorKind::config, "noise sigma must be >= 0");
    Dataset out = dataset;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (auto& v : out.videos) {
        for (double& x : v.visual.values()) x += normal(rng);
        if (v.audio) {
            for (double& x : v.audio->values()) x += normal(rng);
        }
    }
    out.provenance["gaussian_noise"] = {{"sigma", sigma}, {"seed", seed}};
    return out;
}

namespace {

std::vector<std::size_t> seeded_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

void require_fraction(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) fail(ErrorKind::config, "fraction must lie in [0, 1]");
}

}  // namespace

Dataset drop_audio(const Dataset& dataset, double fraction, std::uint64_t seed) {
    require_fraction(fraction);
    Dataset out = dataset;
    for (std::size_t i : seeded_subset(out.size(), fraction_count(fraction, out.size()), seed)) {
        out.videos[i].audio.reset();
    }
    out.provenance["drop_audio"] = {{"fraction", fraction}, {"seed", seed}};
    return out;
}

Dataset drop_train_fraction(const Dataset& dataset, double fraction, std::uint64_t seed) {
    require_fraction(fraction);
    const auto removed = seeded_subset(dataset.size(), fraction_count(fraction, dataset.size()), seed);
    Dataset out = dataset;
    out.videos.clear();
    for (std::size_t i = 0, r = 0; i < dataset.size(); ++i) {
        if (r < removed.size() && removed[r] == i) {
            ++r;
            continue;
        }
        out.videos.push_back(dataset.videos[i]);
    }
    out.provenance["drop_train_fraction"] = {{"fraction", fraction}, {"seed", seed}};
    return out;
}

std::pair<Dataset, Dataset> split_halves(const Dataset& dataset, std::uint64_t seed) {
    const auto first = seeded_subset(dataset.size(), dataset.size() / 2, seed);
    Dataset a = dataset, b = dataset;
    a.videos.clear();
    b.videos.clear();
    a.split += "-p1";
    b.split += "-p2";
    for (std::size_t i = 0, r = 0; i < dataset.size(); ++i) {
        if (r < first.size() && first[r] == i) {
            a.videos.push_back(dataset.videos[i]);
            ++r;
        } else {
            b.videos.push_back(dataset.videos[i]);
        }
    }
    return {std::move(a), std::move(b)};
}

}  // namespace mtta
