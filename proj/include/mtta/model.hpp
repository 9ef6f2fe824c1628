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

// Audio-visual highlight network.
//
//   V --SA_vv--> vv --Hal_va--> hallucinated audio
//   A --SA_aa--> aa --Hal_av--> hallucinated visual
//   (vv, aa) --BMA_va--> va      (visual queries over audio keys/values)
//   (aa, vv) --BMA_av--> av
//   softmax-weighted sum of {vv, va, aa, av} --FC-relu-FC-sigmoid--> h
//
// No positional encoding is used anywhere, so scores are equivariant under
// clip permutations.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtta/data.hpp"
#include "mtta/numerics.hpp"

namespace mtta {

struct ModelConfig {
    std::size_t d_v = 16;
    std::size_t d_a = 12;
    std::size_t d = 32;    // shared hidden width
    std::size_t d_h = 16;  // hallucination bottleneck
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class Partition : std::uint8_t { shared = 0, primary = 1, aux = 2 };

std::string_view to_string(Partition p) noexcept;

struct Param {
    Array value;
    Partition partition = Partition::shared;
};

using GradMap = std::map<std::string, Array>;

// Named parameter arrays, each tagged with exactly one partition. Copies are
// snapshots.
class ParamStore {
public:
    ParamStore() = default;
    explicit ParamStore(ModelConfig config) : config_(config) {}

    const ModelConfig& config() const noexcept { return config_; }

    void add(const std::string& name, Array value, Partition partition);
    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    const Array& value(const std::string& name) const;
    Array& value(const std::string& name);
    Partition partition(const std::string& name) const;

    const std::map<std::string, Param>& params() const noexcept { return params_; }
    std::vector<std::string> names() const;
    std::vector<std::string> names_in(std::initializer_list<Partition> partitions) const;
    std::size_t parameter_count() const;

    // Hash of every parameter in the given partition (names, shapes, bits).
    std::uint64_t hash(Partition partition) const;
    std::uint64_t hash() const;

    friend bool bit_equal(const ParamStore& a, const ParamStore& b);

private:
    ModelConfig config_;
    std::map<std::string, Param> params_;
};

// Glorot-uniform weights, zero biases and zero combination logits.
ParamStore init_params(const ModelConfig& cfg);

// Parameters placed on a tape. Only names selected by `trainable` become
// gradient-tracking leaves.
class BoundParams {
public:
    BoundParams(Tape& tape, const ParamStore& store,
                const std::function<bool(const std::string&, Partition)>& trainable = {});

    Var operator[](const std::string& name) const;
    bool contains(const std::string& name) const { return vars_.count(name) != 0; }
    const std::map<std::string, Var>& vars() const noexcept { return vars_; }
    Tape& tape() const noexcept { return *tape_; }

    // Gradients of the last backward sweep for every trainable parameter.
    GradMap gradients() const;

private:
    Tape* tape_;
    std::map<std::string, Var> vars_;
    std::map<std::string, bool> tracked_;
};

struct AttentionWeights {
    Var query;
    Var key;
    Var value;
    std::optional<Var> skip;  // learned residual projection
};

struct HallucinationWeights {
    Var fc1_w, fc1_b;
    AttentionWeights attention;  // no skip projection; z is added directly
    Var fc2_w, fc2_b;
};

struct ScoreWeights {
    Var logits;  // 1 x 4, order {vv, va, aa, av}
    Var fc1_w, fc1_b, fc2_w, fc2_b;
};

// softmax((xWq)(xWk)^T / sqrt(d)) (xWv) + x Wskip
Var self_attention(Var x, const AttentionWeights& w);

// softmax((q Wq)(k Wk)^T / sqrt(d)) (k Wv) + q
Var bimodal_attention(Var query_src, Var kv_src, const AttentionWeights& w);

// z = relu(src W1 + b1); u = z + SA(z); out = u W2 + b2
Var hallucinate(Var src, const HallucinationWeights& w);

// Returns n x 1 scores in (0, 1).
Var score_regressor(Var vv, Var va, Var aa, Var av, const ScoreWeights& w);

AttentionWeights attention_weights(const BoundParams& p, const std::string& prefix);
HallucinationWeights hallucination_weights(const BoundParams& p, const std::string& prefix);
ScoreWeights score_weights(const BoundParams& p);

struct ForwardTrace {
    Var vv;
    Var aa;
    std::optional<Var> hallucinated_audio;   // Hal_va(vv)
    std::optional<Var> hallucinated_visual;  // Hal_av(aa); absent in missing-audio mode
    Var va;
    Var av;
    Var scores;  // n x 1
    bool missing_audio = false;
};

// Missing-audio mode never touches video.audio: SA_aa is skipped and the
// audio stream is replaced by a detached copy of the hallucinated audio.
ForwardTrace forward(const BoundParams& params, const FeatureSequence& video, bool missing_audio);

// Missing-audio mode is selected automatically when the video has no audio.
std::vector<double> predict(const ParamStore& params, const FeatureSequence& video);

// Checkpoint container ("MTTA" magic).
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params);
ParamStore decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace mtta
