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
#include <filesystem>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mtta/data.hpp"
#include "mtta/error.hpp"
#include "test_support.hpp"

namespace mtta {
namespace {

using testing::small_synth;

bool same_dataset(const Dataset& a, const Dataset& b) {
    if (a.size() != b.size() || a.d_v != b.d_v || a.d_a != b.d_a || a.split != b.split) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.videos[i];
        const auto& y = b.videos[i];
        if (x.id != y.id || !bit_equal(x.visual, y.visual)) return false;
        if (x.has_audio() != y.has_audio() || (x.audio && !bit_equal(*x.audio, *y.audio))) return false;
        if (x.labeled() != y.labeled() || (x.targets && !bit_equal(*x.targets, *y.targets))) return false;
    }
    return true;
}

std::size_t audio_less(const Dataset& d) {
    return static_cast<std::size_t>(std::count_if(d.videos.begin(), d.videos.end(), [](const auto& v) { return !v.has_audio(); }));
}

TEST(Avhf, RoundTripIsBitIdentical) {
    SynthSplits s = generate_synthetic(small_synth(1));
    Dataset mixed = drop_audio(s.test_shifted, 0.5, 3);
    mixed.videos[0].targets.reset();
    for (const Dataset* d : {&s.train, &mixed}) {
        EXPECT_TRUE(same_dataset(decode_avhf(encode_avhf(*d)), *d));
    }
    const auto path = std::filesystem::temp_directory_path() / "mtta_test_roundtrip.avhf";
    write_avhf(s.train, path);
    const Dataset back = read_avhf(path);
    EXPECT_TRUE(same_dataset(back, s.train));
    EXPECT_EQ(back.provenance, s.train.provenance);
    std::filesystem::remove(path);
}

TEST(Avhf, HeaderLayout) {
    const auto bytes = encode_avhf(generate_synthetic(small_synth(2)).test_iid);
    ASSERT_GE(bytes.size(), 12u);
    EXPECT_EQ(bytes[0], 0x41);
    EXPECT_EQ(bytes[1], 0x56);
    EXPECT_EQ(bytes[2], 0x48);
    EXPECT_EQ(bytes[3], 0x46);
    EXPECT_EQ(bytes[4], kAvhfVersion);
    EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
}

ErrorKind kind_of(const std::vector<std::uint8_t>& b) {
    try {
        decode_avhf(b);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::io;  // sentinel: accepted
}

TEST(Avhf, CorruptionsAreDistinctErrors) {
    const auto bytes = encode_avhf(generate_synthetic(small_synth(3)).test_iid);
    auto magic = bytes;
    magic[1] = 'X';
    EXPECT_EQ(kind_of(magic), ErrorKind::format_magic);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    EXPECT_EQ(kind_of(truncated), ErrorKind::format_truncated);
    auto extra = bytes;
    extra.insert(extra.end(), {0, 0, 0, 0});
    EXPECT_EQ(kind_of(extra), ErrorKind::format_inconsistent);
    EXPECT_EQ(kind_of({}), ErrorKind::format_magic);
}

TEST(Avhf, FuzzedFilesAreRejectedOrRoundTrip) {
    Dataset d = generate_synthetic(small_synth(4)).test_iid;
    d.videos.resize(3);
    const auto bytes = encode_avhf(d);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
    std::uniform_int_distribution<int> bit(0, 7);
    int rejected = 0, accepted = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        auto m = bytes;
        const int flips = 1 + trial % 4;
        for (int f = 0; f < flips; ++f) m[pos(rng)] ^= static_cast<std::uint8_t>(1u << bit(rng));
        if (trial % 7 == 0) m.resize(pos(rng));
        try {
            const Dataset back = decode_avhf(m);
            // Accepted mutations must describe a dataset that survives
            // another round trip unchanged.
            EXPECT_TRUE(same_dataset(decode_avhf(encode_avhf(back)), back));
            ++accepted;
        } catch (const Error&) {
            ++rejected;
        }
    }
    EXPECT_GT(rejected, 0);
    EXPECT_EQ(rejected + accepted, 3000);
}

TEST(Synthetic, QuantileCountingAndBothClasses) {
    SynthConfig c = small_synth(6);
    c.min_clips = c.max_clips = 10;
    c.highlight_quantile = 0.2;
    for (const auto& v : generate_synthetic(c).train.videos) {
        const auto y = v.targets->values();
        EXPECT_EQ(std::count(y.begin(), y.end(), 1.0), 2);
    }
    c = small_synth(7);
    c.min_clips = 2;
    c.max_clips = 4;
    c.highlight_quantile = 0.05;
    for (const auto& v : generate_synthetic(c).train.videos) {
        const auto y = v.targets->values();
        EXPECT_GE(std::count(y.begin(), y.end(), 1.0), 1);
        EXPECT_GE(std::count(y.begin(), y.end(), 0.0), 1);
    }
}

TEST(Synthetic, SameSeedIsBitIdentical) {
    const SynthSplits a = generate_synthetic(small_synth(8));
    const SynthSplits b = generate_synthetic(small_synth(8));
    EXPECT_TRUE(same_dataset(a.train, b.train));
    EXPECT_TRUE(same_dataset(a.test_shifted, b.test_shifted));
    EXPECT_FALSE(same_dataset(a.train, generate_synthetic(small_synth(9)).train));
}

TEST(Synthetic, NoiselessAudioIsLinearInVisual) {
    SynthConfig c = small_synth(10);
    c.sigma_v = 0.0;
    c.sigma_a = 0.0;
    c.float32_storage = false;
    const Dataset d = generate_synthetic(c).train;
    std::size_t rows = 0;
    for (const auto& v : d.videos) rows += v.clips();
    Eigen::MatrixXd V(rows, c.d_v), A(rows, c.d_a);
    std::size_t r = 0;
    for (const auto& v : d.videos) {
        for (std::size_t i = 0; i < v.clips(); ++i, ++r) {
            for (std::size_t j = 0; j < c.d_v; ++j) V(r, j) = v.visual.at(i, j);
            for (std::size_t j = 0; j < c.d_a; ++j) A(r, j) = v.audio->at(i, j);
        }
    }
    const Eigen::MatrixXd W = V.completeOrthogonalDecomposition().solve(A);
    const double residual = (V * W - A).norm() / std::sqrt(static_cast<double>(A.size()));
    EXPECT_LT(residual, 1e-9);

    c.sigma_a = 0.5;
    const Dataset noisy = generate_synthetic(c).train;
    r = 0;
    for (const auto& v : noisy.videos) {
        for (std::size_t i = 0; i < v.clips(); ++i, ++r) {
            for (std::size_t j = 0; j < c.d_a; ++j) A(r, j) = v.audio->at(i, j);
        }
    }
    const Eigen::MatrixXd W2 = V.completeOrthogonalDecomposition().solve(A);
    EXPECT_GT((V * W2 - A).norm() / std::sqrt(static_cast<double>(A.size())), 0.1);
}

TEST(Synthetic, ShiftTouchesOnlyShiftedAudio) {
    SynthConfig c = small_synth(11);
    const SynthSplits shifted = generate_synthetic(c);
    c.audio_shift = ModalityShift{};
    const SynthSplits clean = generate_synthetic(c);
    EXPECT_TRUE(same_dataset(shifted.train, clean.train));
    EXPECT_TRUE(same_dataset(shifted.test_iid, clean.test_iid));
    for (std::size_t i = 0; i < clean.test_shifted.size(); ++i) {
        const auto& a = shifted.test_shifted.videos[i];
        const auto& b = clean.test_shifted.videos[i];
        EXPECT_TRUE(bit_equal(a.visual, b.visual));
        EXPECT_TRUE(bit_equal(*a.targets, *b.targets));
        EXPECT_FALSE(bit_equal(*a.audio, *b.audio));
    }
}

TEST(Synthetic, InvalidConfigIsRejected) {
    SynthConfig c;
    c.rho = 1.0;
    EXPECT_THROW(generate_synthetic(c), Error);
    c = SynthConfig{};
    c.highlight_quantile = 0.0;
    EXPECT_THROW(generate_synthetic(c), Error);
}

TEST(GaussianNoise, ZeroIsIdentityAndTargetsStay) {
    const Dataset d = generate_synthetic(small_synth(12)).test_iid;
    EXPECT_TRUE(same_dataset(corrupt_gaussian(d, 0.0, 1), d));
    const Dataset n = corrupt_gaussian(d, 0.3, 1);
    for (std::size_t i = 0; i < d.size(); ++i) EXPECT_TRUE(bit_equal(*n.videos[i].targets, *d.videos[i].targets));
    EXPECT_TRUE(same_dataset(corrupt_gaussian(d, 0.3, 1), n));
}

TEST(GaussianNoise, EmpiricalStdWithinTwoPercent) {
    SynthConfig c = small_synth(13);
    c.n_test_iid = 200;
    c.min_clips = c.max_clips = 20;
    c.float32_storage = false;
    const Dataset d = generate_synthetic(c).test_iid;  // 200 * 20 * 28 = 112000 entries
    const double sigma = 0.7;
    const Dataset n = corrupt_gaussian(d, sigma, 14);
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto diff = [&](const Array& a, const Array& b) {
            for (std::size_t k = 0; k < a.size(); ++k) {
                const double x = a[k] - b[k];
                sum += x;
                sq += x * x;
                ++count;
            }
        };
        diff(n.videos[i].visual, d.videos[i].visual);
        diff(*n.videos[i].audio, *d.videos[i].audio);
    }
    ASSERT_GE(count, 100000u);
    const double mean = sum / count;
    const double sd = std::sqrt(sq / count - mean * mean);
    EXPECT_LT(std::abs(sd - sigma) / sigma, 0.02);
}

TEST(DropAudio, CountsAndExtremes) {
    SynthConfig c = small_synth(15);
    c.n_test_iid = 100;
    const Dataset d = generate_synthetic(c).test_iid;
    EXPECT_TRUE(same_dataset(drop_audio(d, 0.0, 1), d));
    EXPECT_EQ(audio_less(drop_audio(d, 1.0, 1)), 100u);
    const Dataset q = drop_audio(d, 0.25, 1);
    EXPECT_EQ(audio_less(q), 25u);
    EXPECT_TRUE(same_dataset(drop_audio(d, 0.25, 1), q));
    EXPECT_EQ(audio_less(d), 0u);  // input untouched
    EXPECT_THROW(drop_audio(d, 1.5, 1), Error);
}

TEST(DropTrain, CountsAndReproducibility) {
    SynthConfig c = small_synth(16);
    c.n_train = 50;
    const Dataset d = generate_synthetic(c).train;
    EXPECT_TRUE(same_dataset(drop_train_fraction(d, 0.0, 2), d));
    const Dataset k = drop_train_fraction(d, 0.1, 2);
    EXPECT_EQ(k.size(), 45u);
    EXPECT_TRUE(same_dataset(drop_train_fraction(d, 0.1, 2), k));
    std::set<std::string> ids;
    for (const auto& v : k.videos) ids.insert(v.id);
    EXPECT_EQ(ids.size(), 45u);
    EXPECT_EQ(d.size(), 50u);
}

TEST(SplitHalves, PartitionsTheVideos) {
    const Dataset d = generate_synthetic(small_synth(17)).train;
    const auto [a, b] = split_halves(d, 3);
    EXPECT_EQ(a.size(), d.size() / 2);
    EXPECT_EQ(a.size() + b.size(), d.size());
    std::set<std::string> ids;
    for (const auto& v : a.videos) ids.insert(v.id);
    for (const auto& v : b.videos) ids.insert(v.id);
    EXPECT_EQ(ids.size(), d.size());
}

TEST(FractionCount, RoundsHalfUp) {
    EXPECT_EQ(fraction_count(0.25, 100), 25u);
    EXPECT_EQ(fraction_count(0.25, 10), 3u);
    EXPECT_EQ(fraction_count(0.2, 10), 2u);
}

}  // namespace
}  // namespace mtta
