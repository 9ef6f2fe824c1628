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

// Layout (all integers little-endian):
//   "MTTA" | u32 version | u32 len + config JSON | u32 count |
//   count x { u32 len + name | u8 partition | u32 rank | rank x u32 dim | f64 values }
// Parameters are written in name order.

#include "bytes.hpp"
#include "mtta/error.hpp"
#include "mtta/model.hpp"

namespace mtta {

std::vector<std::uint8_t> encode_checkpoint(const ParamStore& params) {
    bytes::Writer w;
    w.raw("MTTA");
    w.u32(kCheckpointVersion);
    w.string(nlohmann::json(params.config()).dump());
    w.u32(static_cast<std::uint32_t>(params.params().size()));
    for (const auto& [name, p] : params.params()) {
        w.string(name);
        w.u8(static_cast<std::uint8_t>(p.partition));
        w.u32(static_cast<std::uint32_t>(p.value.rank()));
        for (auto d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double x : p.value.values()) w.f64(x);
    }
    return w.take();
}

ParamStore decode_checkpoint(const std::vector<std::uint8_t>& data) {
    bytes::Reader r(data);
    if (r.remaining() < 4 || r.raw(4, "magic") != "MTTA") fail(ErrorKind::format_magic, "not an MTTA checkpoint");
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        fail(ErrorKind::format_inconsistent, "unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig cfg;
    try {
        cfg = nlohmann::json::parse(r.string("config")).get<ModelConfig>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format_inconsistent, std::string("bad checkpoint config: ") + e.what());
    }
    ParamStore store(cfg);
    const std::uint32_t count = r.u32("parameter count");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.string("parameter name");
        const std::uint8_t part = r.u8("partition");
        if (part > 2) fail(ErrorKind::format_inconsistent, "bad partition tag for " + name);
        const std::uint32_t rank = r.u32("rank");
        if (rank == 0 || rank > 8) fail(ErrorKind::format_inconsistent, "bad rank for " + name);
        Shape shape;
        std::size_t n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const std::uint32_t dim = r.u32("dimension");
            if (dim == 0) fail(ErrorKind::format_inconsistent, "zero dimension for " + name);
            shape.push_back(dim);
            n *= dim;
            if (n > r.remaining() / 8) fail(ErrorKind::format_truncated, "payload too short for " + name);
        }
        std::vector<double> values(n);
        for (double& x : values) x = r.f64("parameter values");
        if (store.contains(name)) fail(ErrorKind::format_inconsistent, "duplicate parameter " + name);
        store.add(name, Array(std::move(shape), std::move(values)), static_cast<Partition>(part));
    }
    if (r.remaining() != 0) fail(ErrorKind::format_inconsistent, "trailing bytes after checkpoint");
    return store;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
    bytes::write_file(path, encode_checkpoint(params));
}

ParamStore load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(bytes::read_file(path)); }

}  // namespace mtta
