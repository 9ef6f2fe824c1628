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

#include "mtta/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mtta/error.hpp"

namespace mtta {

void ModelConfig::validate() const {
    if (d_v < 1 || d_a < 1 || d < 1 || d_h < 1) {
        fail(ErrorKind::config, "model dimensions must be >= 1");
    }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"d_v", c.d_v}, {"d_a", c.d_a}, {"d", c.d}, {"d_h", c.d_h}, {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d_v = j.value("d_v", c.d_v);
    c.d_a = j.value("d_a", c.d_a);
    c.d = j.value("d", c.d);
    c.d_h = j.value("d_h", c.d_h);
    c.seed = j.value("seed", c.seed);
}

std::string_view to_string(Partition p) noexcept {
    switch (p) {
        case Partition::shared: return "shared";
        case Partition::primary: return "primary";
        case Partition::aux: return "aux";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// ParamStore

void ParamStore::add(const std::string& name, Array value, Partition partition) {
    if (!params_.emplace(name, Param{std::move(value), partition}).second) {
        fail(ErrorKind::contract, "duplicate parameter " + name);
    }
}

const Array& ParamStore::value(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorKind::contract, "unknown parameter " + name);
    return it->second.value;
}

Array& ParamStore::value(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorKind::contract, "unknown parameter " + name);
    return it->second.value;
}

Partition ParamStore::partition(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) fail(ErrorKind::contract, "unknown parameter " + name);
    return it->second.partition;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
}

std::vector<std::string> ParamStore::names_in(std::initializer_list<Partition> partitions) const {
    std::vector<std::string> out;
    for (const auto& [name, p] : params_) {
        for (Partition want : partitions) {
            if (p.partition == want) {
                out.push_back(name);
                break;
            }
        }
    }
    return out;
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
}

std::uint64_t ParamStore::hash(Partition partition) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, p] : params_) {
        if (p.partition != partition) continue;
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h = hash_array(p.value, h);
    }
    return h;
}

std::uint64_t ParamStore::hash() const {
    std::uint64_t h = hash(Partition::shared);
    h = h * 31 + hash(Partition::primary);
    return h * 31 + hash(Partition::aux);
}

bool bit_equal(const ParamStore& a, const ParamStore& b) {
    if (!(a.config_ == b.config_) || a.params_.size() != b.params_.size()) return false;
    auto it = b.params_.begin();
    for (const auto& [name, p] : a.params_) {
        if (name != it->first || p.partition != it->second.partition || !bit_equal(p.value, it->second.value)) {
            return false;
        }
        ++it;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Initialization

ParamStore init_params(const ModelConfig& cfg) {
    cfg.validate();
    struct Spec {
        std::string name;
        std::size_t rows, cols;
        Partition partition;
        bool weight;  // false: zero initialized
    };
    const auto S = Partition::shared, P = Partition::primary, A = Partition::aux;
    std::vector<Spec> specs;
    auto attention = [&](const std::string& prefix, std::size_t d_in, std::size_t d_out, Partition part, bool skip) {
        specs.push_back({prefix + ".query", d_in, d_out, part, true});
        specs.push_back({prefix + ".key", d_in, d_out, part, true});
        specs.push_back({prefix + ".value", d_in, d_out, part, true});
        if (skip) specs.push_back({prefix + ".skip", d_in, d_out, part, true});
    };
    auto hallucination = [&](const std::string& prefix) {
        specs.push_back({prefix + ".fc1.w", cfg.d, cfg.d_h, A, true});
        specs.push_back({prefix + ".fc1.b", 1, cfg.d_h, A, false});
        attention(prefix + ".attn", cfg.d_h, cfg.d_h, A, false);
        specs.push_back({prefix + ".fc2.w", cfg.d_h, cfg.d, A, true});
        specs.push_back({prefix + ".fc2.b", 1, cfg.d, A, false});
    };
    attention("sa_v", cfg.d_v, cfg.d, S, true);
    attention("sa_a", cfg.d_a, cfg.d, S, true);
    hallucination("hal_va");
    hallucination("hal_av");
    attention("bma_va", cfg.d, cfg.d, P, false);
    attention("bma_av", cfg.d, cfg.d, P, false);
    specs.push_back({"score.logits", 1, 4, P, false});
    specs.push_back({"score.fc1.w", cfg.d, cfg.d, P, true});
    specs.push_back({"score.fc1.b", 1, cfg.d, P, false});
    specs.push_back({"score.fc2.w", cfg.d, 1, P, true});
    specs.push_back({"score.fc2.b", 1, 1, P, false});

    std::sort(specs.begin(), specs.end(), [](const Spec& a, const Spec& b) { return a.name < b.name; });

    std::mt19937_64 rng(cfg.seed);
    ParamStore store(cfg);
    for (const Spec& s : specs) {
        Array a = Array::zeros(s.rows, s.cols);
        if (s.weight) {
            const double bound = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& x : a.values()) x = dist(rng);
        }
        store.add(s.name, std::move(a), s.partition);
    }
    return store;
}

// ---------------------------------------------------------------------------
// Binding

BoundParams::BoundParams(Tape& tape, const ParamStore& store,
                         const std::function<bool(const std::string&, Partition)>& trainable)
    : tape_(&tape) {
    for (const auto& [name, p] : store.params()) {
        const bool track = !trainable || trainable(name, p.partition);
        vars_.emplace(name, tape.leaf(p.value, track));
        tracked_.emplace(name, track);
    }
}

Var BoundParams::operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) fail(ErrorKind::contract, "parameter not bound: " + name);
    return it->second;
}

GradMap BoundParams::gradients() const {
    GradMap out;
    for (const auto& [name, var] : vars_) {
        if (tracked_.at(name)) out.emplace(name, tape_->grad(var));
    }
    return out;
}

AttentionWeights attention_weights(const BoundParams& p, const std::string& prefix) {
    AttentionWeights w{p[prefix + ".query"], p[prefix + ".key"], p[prefix + ".value"], std::nullopt};
    if (p.contains(prefix + ".skip")) w.skip = p[prefix + ".skip"];
    return w;
}

HallucinationWeights hallucination_weights(const BoundParams& p, const std::string& prefix) {
    return HallucinationWeights{p[prefix + ".fc1.w"], p[prefix + ".fc1.b"], attention_weights(p, prefix + ".attn"),
                                p[prefix + ".fc2.w"], p[prefix + ".fc2.b"]};
}

ScoreWeights score_weights(const BoundParams& p) {
    return ScoreWeights{p["score.logits"], p["score.fc1.w"], p["score.fc1.b"], p["score.fc2.w"], p["score.fc2.b"]};
}

// ---------------------------------------------------------------------------
// Layers

namespace {

void require_cols(Var x, Var w, const char* what) {
    if (x.value().cols() != w.value().rows()) {
        fail(ErrorKind::dimension, std::string(what) + ": input " + shape_string(x.value().shape()) +
                                       " does not match weight " + shape_string(w.value().shape()));
    }
}

Var attend(Var q_src, Var kv_src, const AttentionWeights& w) {
    require_cols(q_src, w.query, "attention query");
    require_cols(kv_src, w.key, "attention key");
    require_cols(kv_src, w.value, "attention value");
    Var q = matmul(q_src, w.query);
    Var k = matmul(kv_src, w.key);
    Var v = matmul(kv_src, w.value);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
    Var weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
    return matmul(weights, v);
}

}  // namespace

Var self_attention(Var x, const AttentionWeights& w) {
    Var out = attend(x, x, w);
    if (w.skip) {
        require_cols(x, *w.skip, "attention skip");
        out = add(out, matmul(x, *w.skip));
    }
    return out;
}

Var bimodal_attention(Var query_src, Var kv_src, const AttentionWeights& w) {
    if (query_src.value().shape() != kv_src.value().shape()) {
        fail(ErrorKind::dimension, "bimodal attention inputs differ: " + shape_string(query_src.value().shape()) +
                                       " vs " + shape_string(kv_src.value().shape()));
    }
    return add(attend(query_src, kv_src, w), query_src);
}

Var hallucinate(Var src, const HallucinationWeights& w) {
    require_cols(src, w.fc1_w, "hallucination fc1");
    Var z = relu(add_row(matmul(src, w.fc1_w), w.fc1_b));
    Var u = add(z, attend(z, z, w.attention));
    require_cols(u, w.fc2_w, "hallucination fc2");
    return add_row(matmul(u, w.fc2_w), w.fc2_b);
}

Var score_regressor(Var vv, Var va, Var aa, Var av, const ScoreWeights& w) {
    const Shape& shape = vv.value().shape();
    for (Var s : {va, aa, av}) {
        if (s.value().shape() != shape) {
            fail(ErrorKind::dimension, "score regressor streams differ: " + shape_string(shape) + " vs " +
                                           shape_string(s.value().shape()));
        }
    }
    if (w.logits.value().size() != 4) fail(ErrorKind::dimension, "score regressor needs 4 combination logits");
    Var mix = softmax_rows(w.logits);
    Var fused = scale_by(vv, pick(mix, 0, 0));
    fused = add(fused, scale_by(va, pick(mix, 0, 1)));
    fused = add(fused, scale_by(aa, pick(mix, 0, 2)));
    fused = add(fused, scale_by(av, pick(mix, 0, 3)));
    require_cols(fused, w.fc1_w, "score fc1");
    Var hidden = relu(add_row(matmul(fused, w.fc1_w), w.fc1_b));
    require_cols(hidden, w.fc2_w, "score fc2");
    return sigmoid(add_row(matmul(hidden, w.fc2_w), w.fc2_b));
}

ForwardTrace forward(const BoundParams& params, const FeatureSequence& video, bool missing_audio) {
    Tape& tape = params.tape();
    const std::size_t d_v = params["sa_v.query"].value().rows();
    if (video.visual.rank() != 2 || video.visual.cols() != d_v) {
        fail(ErrorKind::dimension, "visual features " + shape_string(video.visual.shape()) + " do not match d_v=" +
                                       std::to_string(d_v));
    }
    if (!params.contains("hal_va.fc1.w")) {
        fail(ErrorKind::contract, "model has no audio hallucination weights");
    }

    ForwardTrace trace;
    trace.missing_audio = missing_audio;
    trace.vv = self_attention(tape.constant(video.visual), attention_weights(params, "sa_v"));
    trace.hallucinated_audio = hallucinate(trace.vv, hallucination_weights(params, "hal_va"));

    if (missing_audio) {
        trace.aa = detach(*trace.hallucinated_audio);
    } else {
        if (!video.audio) fail(ErrorKind::dimension, "video " + video.id + " has no audio; use missing-audio mode");
        const std::size_t d_a = params["sa_a.query"].value().rows();
        if (video.audio->rank() != 2 || video.audio->cols() != d_a || video.audio->rows() != video.visual.rows()) {
            fail(ErrorKind::dimension, "audio features " + shape_string(video.audio->shape()) + " do not match " +
                                           std::to_string(video.visual.rows()) + "x" + std::to_string(d_a));
        }
        trace.aa = self_attention(tape.constant(*video.audio), attention_weights(params, "sa_a"));
        trace.hallucinated_visual = hallucinate(trace.aa, hallucination_weights(params, "hal_av"));
    }

    trace.va = bimodal_attention(trace.vv, trace.aa, attention_weights(params, "bma_va"));
    trace.av = bimodal_attention(trace.aa, trace.vv, attention_weights(params, "bma_av"));
    trace.scores = score_regressor(trace.vv, trace.va, trace.aa, trace.av, score_weights(params));
    return trace;
}

std::vector<double> predict(const ParamStore& params, const FeatureSequence& video) {
    Tape tape;
    BoundParams bound(tape, params, [](const std::string&, Partition) { return false; });
    ForwardTrace trace = forward(bound, video, !video.has_audio());
    auto v = trace.scores.value().values();
    return {v.begin(), v.end()};
}

}  // namespace mtta
