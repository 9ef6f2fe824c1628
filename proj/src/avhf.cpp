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

// AVHF layout (little-endian):
//   41 56 48 46 | u32 version | u32 manifest length | manifest JSON |
//   per video in manifest order: visual f32[n*d_v], audio f32[n*d_a] (if
//   has_audio), targets f32[n] (if has_targets)
//
// The manifest carries d_v, d_a, split, provenance and one
// {id, n, has_audio, has_targets} record per video.

#include <cmath>

#include "bytes.hpp"
#include "mtta/data.hpp"
#include "mtta/error.hpp"

namespace mtta {

namespace {

constexpr char kMagic[] = "AVHF";
constexpr std::size_t kMaxDim = 1u << 20;

void put_floats(bytes::Writer& w, const Array& a) {
    for (double x : a.values()) w.f32(static_cast<float>(x));
}

Array get_floats(bytes::Reader& r, std::size_t rows, std::size_t cols, const char* what) {
    // rows and cols are bounded, so the product cannot overflow.
    if (rows * cols > r.remaining() / 4) {
        fail(ErrorKind::format_truncated, std::string("payload too short for ") + what);
    }
    std::vector<double> values(rows * cols);
    for (double& x : values) {
        x = static_cast<double>(r.f32(what));
        if (!std::isfinite(x)) fail(ErrorKind::format_inconsistent, std::string("non-finite value in ") + what);
    }
    return Array({rows, cols}, std::move(values));
}

}  // namespace

std::vector<std::uint8_t> encode_avhf(const Dataset& dataset) {
    dataset.validate();
    nlohmann::json manifest{{"d_v", dataset.d_v},
                            {"d_a", dataset.d_a},
                            {"split", dataset.split},
                            {"provenance", dataset.provenance},
                            {"videos", nlohmann::json::array()}};
    for (const auto& v : dataset.videos) {
        manifest["videos"].push_back(
            {{"id", v.id}, {"n", v.clips()}, {"has_audio", v.has_audio()}, {"has_targets", v.labeled()}});
    }
    bytes::Writer w;
    w.raw(std::string_view(kMagic, 4));
    w.u32(kAvhfVersion);
    w.string(manifest.dump());
    for (const auto& v : dataset.videos) {
        put_floats(w, v.visual);
        if (v.audio) put_floats(w, *v.audio);
        if (v.targets) put_floats(w, *v.targets);
    }
    return w.take();
}

Dataset decode_avhf(const std::vector<std::uint8_t>& data) {
    bytes::Reader r(data);
    if (r.remaining() < 4 || r.raw(4, "magic") != std::string_view(kMagic, 4)) {
        fail(ErrorKind::format_magic, "not an AVHF file (bad magic)");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kAvhfVersion) fail(ErrorKind::format_inconsistent, "unsupported AVHF version " + std::to_string(version));
    const std::string manifest_text = r.string("manifest");

    Dataset out;
    struct Entry {
        std::string id;
        std::size_t n;
        bool has_audio;
        bool has_targets;
    };
    std::vector<Entry> entries;
    try {
        const auto manifest = nlohmann::json::parse(manifest_text);
        out.d_v = manifest.at("d_v").get<std::size_t>();
        out.d_a = manifest.at("d_a").get<std::size_t>();
        out.split = manifest.value("split", std::string{});
        out.provenance = manifest.value("provenance", nlohmann::json::object());
        for (const auto& e : manifest.at("videos")) {
            entries.push_back(Entry{e.at("id").get<std::string>(), e.at("n").get<std::size_t>(),
                                    e.at("has_audio").get<bool>(), e.at("has_targets").get<bool>()});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format_inconsistent, std::string("malformed AVHF manifest: ") + e.what());
    }
    if (out.d_v == 0 || out.d_a == 0 || out.d_v > kMaxDim || out.d_a > kMaxDim) {
        fail(ErrorKind::format_inconsistent, "manifest dimensions out of range");
    }

    out.videos.reserve(entries.size());
    for (const Entry& e : entries) {
        if (e.n == 0 || e.n > kMaxDim) fail(ErrorKind::format_inconsistent, "video " + e.id + " has invalid clip count");
        FeatureSequence v;
        v.id = e.id;
        v.visual = get_floats(r, e.n, out.d_v, "visual features");
        if (e.has_audio) v.audio = get_floats(r, e.n, out.d_a, "audio features");
        if (e.has_targets) {
            v.targets = get_floats(r, e.n, 1, "targets");
            for (double y : v.targets->values()) {
                if (!(y >= 0.0 && y <= 1.0)) fail(ErrorKind::format_inconsistent, "target outside [0, 1] in " + e.id);
            }
        }
        out.videos.push_back(std::move(v));
    }
    if (r.remaining() != 0) {
        fail(ErrorKind::format_inconsistent,
             std::to_string(r.remaining()) + " payload bytes beyond what the manifest declares");
    }
    return out;
}

void write_avhf(const Dataset& dataset, const std::filesystem::path& path) {
    bytes::write_file(path, encode_avhf(dataset));
}

Dataset read_avhf(const std::filesystem::path& path) { return decode_avhf(bytes::read_file(path)); }

}  // namespace mtta
