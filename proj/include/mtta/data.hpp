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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtta/numerics.hpp"

namespace mtta {

// One video: n clips of visual (n x d_v) and optional audio (n x d_a)
// features plus optional per-clip highlight targets in [0, 1] (n x 1).
struct FeatureSequence {
    std::string id;
    Array visual;
    std::optional<Array> audio;
    std::optional<Array> targets;

    std::size_t clips() const { return visual.rows(); }
    bool has_audio() const noexcept { return audio.has_value(); }
    bool labeled() const noexcept { return targets.has_value(); }

    // Throws ErrorKind::dimension / numeric when the invariants do not hold.
    void validate() const;
};

struct Dataset {
    std::vector<FeatureSequence> videos;
    std::string split;
    std::size_t d_v = 0;
    std::size_t d_a = 0;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t size() const noexcept { return videos.size(); }
    bool empty() const noexcept { return videos.empty(); }
    void validate() const;
};

// Affine corruption a' = S a + b + N(0, noise^2) applied per modality.
// S = (1 - mix) I + mix R with R a seeded random rotation, b ~ N(0, offset^2).
struct ModalityShift {
    double mix = 0.0;
    double offset = 0.0;
    double noise = 0.0;

    bool active() const noexcept { return mix != 0.0 || offset != 0.0 || noise != 0.0; }
};

struct SynthConfig {
    std::size_t n_train = 120;
    std::size_t n_test_iid = 40;
    std::size_t n_test_shifted = 40;
    std::size_t min_clips = 20;
    std::size_t max_clips = 40;
    std::size_t d_z = 6;
    std::size_t d_v = 16;
    std::size_t d_a = 12;
    double rho = 0.7;
    double sigma_v = 0.5;
    double sigma_a = 0.5;
    double highlight_quantile = 0.25;
    std::uint64_t mixing_seed = 7;  // M_v, M_a, w* and the shift rotation
    std::uint64_t seed = 0;         // per-video sampling
    ModalityShift audio_shift{0.6, 0.6, 0.3};
    ModalityShift visual_shift{};
    bool float32_storage = true;  // round features to float so AVHF round trips are exact

    void validate() const;
};

void to_json(nlohmann::json& j, const ModalityShift& s);
void from_json(const nlohmann::json& j, ModalityShift& s);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct SynthSplits {
    Dataset train;
    Dataset test_iid;
    Dataset test_shifted;
};

// Latent AR(1) factors drive both modalities and the highlight labels; the
// shifted test split applies the configured affine shifts to the features.
SynthSplits generate_synthetic(const SynthConfig& cfg);

// Ablation transforms. All are pure and deterministic in `seed`.
Dataset corrupt_gaussian(const Dataset& dataset, double sigma, std::uint64_t seed);
Dataset drop_audio(const Dataset& dataset, double fraction, std::uint64_t seed);
Dataset drop_train_fraction(const Dataset& dataset, double fraction, std::uint64_t seed);

// Seeded random partition into two halves (sizes floor(N/2), ceil(N/2)).
std::pair<Dataset, Dataset> split_halves(const Dataset& dataset, std::uint64_t seed);

// Number of items selected by a fraction: round-half-up of fraction * count.
std::size_t fraction_count(double fraction, std::size_t count);

// AVHF container.
inline constexpr std::uint32_t kAvhfVersion = 1;
void write_avhf(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_avhf(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_avhf(const Dataset& dataset);
Dataset decode_avhf(const std::vector<std::uint8_t>& bytes);

}  // namespace mtta
