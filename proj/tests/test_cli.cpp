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


// Runs the mtta binary end to end on a tiny configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "mtta/model.hpp"
#include "mtta/pipeline.hpp"

namespace mtta {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct CliResult {
    int code = -1;
    std::string err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() /
                ("mtta_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        nlohmann::json cfg{
            {"synth",
             {{"n_train", 10}, {"n_test_iid", 4}, {"n_test_shifted", 4}, {"min_clips", 5}, {"max_clips", 7},
              {"d_v", 6}, {"d_a", 5}}},
            {"model", {{"d", 6}, {"d_h", 4}}},
            {"train", {{"joint_epochs", 1}, {"meta_epochs", 1}, {"batch_size", 4}, {"inner_lr", 0.05}}},
            {"strategy", {{"lr", 0.05}}},
            {"ablation", {{"updates", {1, 2, 3}}}},
        };
        std::ofstream(root_ / "small.json") << cfg.dump(2);
    }
    void TearDown() override { fs::remove_all(root_); }

    // Arguments are passed through the shell unquoted; keep them simple.
    CliResult run(const std::string& args, const std::string& env = "") const {
        const fs::path err = root_ / "stderr.txt";
        const std::string cmd =
            env + " \"" MTTA_CLI_PATH "\" " + args + " > \"" + (root_ / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
        const int status = std::system(cmd.c_str());
        CliResult r;
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.err = slurp(err);
        return r;
    }

    std::string small() const { return "--config " + (root_ / "small.json").string(); }
    fs::path dir(const std::string& name) const { return root_ / name; }

    fs::path root_;
};

nlohmann::json json_of(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

TEST_F(CliTest, ZeroEpochCheckpointEqualsInitialization) {
    ASSERT_EQ(run("gen-synth " + small() + " --seed 3 --out " + dir("data").string()).code, 0);
    for (const char* f : {"train.avhf", "test_iid.avhf", "test_shifted.avhf", "config.json", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir("data") / f)) << f;
    }
    ASSERT_EQ(run("train " + small() + " --seed 3 --epochs 0 --data " + dir("data").string() + " --out " +
                  dir("joint").string())
                  .code,
              0);
    const ParamStore trained = load_checkpoint(dir("joint") / "joint.ckpt");
    ModelConfig mc = trained.config();
    EXPECT_EQ(mc.d_v, 6u);
    EXPECT_EQ(mc.seed, 3u);
    EXPECT_TRUE(bit_equal(trained, init_params(mc)));
}

TEST_F(CliTest, TrainAndAdaptWriteTheArtifacts) {
    ASSERT_EQ(run("train " + small() + " --seed 4 --out " + dir("joint").string()).code, 0);
    for (const char* f : {"joint.ckpt", "history.csv", "metrics.csv", "adapt.jsonl", "config.json", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir("joint") / f)) << f;
    }
    const auto manifest = json_of(dir("joint") / "manifest.json");
    EXPECT_EQ(manifest.at("artifact_version"), kArtifactVersion);
    EXPECT_EQ(manifest.at("command"), "train");
    bool listed = false;
    for (const auto& f : manifest.at("files")) listed = listed || f.at("name") == "joint.ckpt";
    EXPECT_TRUE(listed);

    const std::string ckpt = (dir("joint") / "joint.ckpt").string();
    ASSERT_EQ(run("train " + small() + " --seed 4 --stage meta --checkpoint " + ckpt + " --out " + dir("meta").string())
                  .code,
              0);
    EXPECT_TRUE(fs::exists(dir("meta") / "meta.ckpt"));

    for (const char* name : {"a", "b"}) {
        ASSERT_EQ(run("adapt-eval " + small() + " --seed 4 --strategy none --checkpoint " + ckpt + " --out " +
                      dir(name).string())
                      .code,
                  0);
    }
    EXPECT_EQ(slurp(dir("a") / "metrics.csv"), slurp(dir("b") / "metrics.csv"));
    EXPECT_EQ(slurp(dir("a") / "adapt.jsonl"), slurp(dir("b") / "adapt.jsonl"));
    EXPECT_EQ(slurp(dir("a") / "metrics.csv").rfind("name,map,top5_map,hit_at_1,", 0), 0u);

    const std::string meta = (dir("meta") / "meta.ckpt").string();
    ASSERT_EQ(run("adapt-eval " + small() + " --seed 4 --strategy halluc --timing --checkpoint " + meta + " --out " +
                  dir("h").string())
                  .code,
              0);
    std::istringstream lines(slurp(dir("h") / "adapt.jsonl"));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("losses").size(), 4u);
        EXPECT_TRUE(j.contains("millis"));
        ++count;
    }
    EXPECT_EQ(count, 4);
}

TEST_F(CliTest, AblateUpdatesWritesOneRowPerSetting) {
    ASSERT_EQ(run("ablate " + small() + " --seed 5 --study updates --out " + dir("ab").string()).code, 0);
    std::istringstream csv(slurp(dir("ab") / "metrics.csv"));
    std::string header, row;
    std::getline(csv, header);
    EXPECT_EQ(header.rfind("updates,", 0), 0u);
    int rows = 0;
    while (std::getline(csv, row)) {
        if (!row.empty()) ++rows;
    }
    EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, ShiftScoreAndGradcheck) {
    ASSERT_EQ(run("shift-score " + small() + " --seed 6 --out " + dir("fid").string()).code, 0);
    EXPECT_EQ(slurp(dir("fid") / "metrics.csv").rfind("split_a,split_b,fid\n", 0), 0u);
    ASSERT_EQ(run("gradcheck --seed 6 --out " + dir("gc").string()).code, 0);
    EXPECT_EQ(slurp(dir("gc") / "metrics.csv").rfind("case,coordinates,max_rel_error\n", 0), 0u);
}

TEST_F(CliTest, ExitCodesAndErrorLine) {
    CliResult r = run("frobnicate");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: kind=usage message=\"", 0), 0u) << r.err;

    r = run("train " + small() + " --stage meta --out " + dir("x").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("error: kind=config message=\"", 0), 0u) << r.err;

    r = run("adapt-eval " + small() + " --out " + dir("w").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("error: kind=config message=\"", 0), 0u) << r.err;

    std::ofstream(root_ / "bad.json") << "{\"train\": {\"inner_steps\": 0}}";
    r = run("train --config " + (root_ / "bad.json").string() + " --out " + dir("y").string());
    EXPECT_EQ(r.code, 3);

    std::ofstream(root_ / "broken.ckpt") << "not a checkpoint";
    r = run("adapt-eval " + small() + " --checkpoint " + (root_ / "broken.ckpt").string() + " --out " +
            dir("z").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: kind=format_magic", 0), 0u) << r.err;
}

TEST_F(CliTest, SeedPriority) {
    ASSERT_EQ(run("gen-synth " + small() + " --out " + dir("env").string(), "MTTA_SEED=11").code, 0);
    EXPECT_EQ(json_of(dir("env") / "config.json").at("seed"), 11);
    ASSERT_EQ(run("gen-synth " + small() + " --seed 12 --out " + dir("flag").string(), "MTTA_SEED=11").code, 0);
    EXPECT_EQ(json_of(dir("flag") / "config.json").at("seed"), 12);

    nlohmann::json with_seed = json_of(root_ / "small.json");
    with_seed["seed"] = 13;
    std::ofstream(root_ / "seeded.json") << with_seed.dump();
    ASSERT_EQ(run("gen-synth --config " + (root_ / "seeded.json").string() + " --out " + dir("file").string(),
                  "MTTA_SEED=11")
                  .code,
              0);
    const auto cfg = json_of(dir("file") / "config.json");
    EXPECT_EQ(cfg.at("seed"), 13);
    EXPECT_EQ(cfg.at("synth").at("seed"), 13);
    EXPECT_EQ(cfg.at("model").at("seed"), 13);

    ASSERT_EQ(run("gen-synth " + small() + " --out " + dir("none").string(), "env -u MTTA_SEED").code, 0);
    EXPECT_EQ(json_of(dir("none") / "config.json").at("seed"), 0);

    EXPECT_EQ(run("gen-synth " + small() + " --out " + dir("bad").string(), "MTTA_SEED=abc").code, 3);
}

TEST_F(CliTest, ReplayFromPersistedConfigIsBitExact) {
    ASSERT_EQ(run("train " + small() + " --seed 8 --stage joint --out " + dir("first").string()).code, 0);
    ASSERT_EQ(run("train --config " + (dir("first") / "config.json").string() + " --out " + dir("second").string())
                  .code,
              0);
    for (const char* f : {"joint.ckpt", "history.csv", "metrics.csv", "adapt.jsonl"}) {
        EXPECT_EQ(slurp(dir("first") / f), slurp(dir("second") / f)) << f;
    }
    // Only config.json may differ, and only in its output directory.
    auto a = json_of(dir("first") / "manifest.json").at("files");
    auto b = json_of(dir("second") / "manifest.json").at("files");
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].at("name") != "config.json") EXPECT_EQ(a[i], b[i]);
    }
    auto ca = json_of(dir("first") / "config.json");
    auto cb = json_of(dir("second") / "config.json");
    ca.erase("output_dir");
    cb.erase("output_dir");
    EXPECT_EQ(ca, cb);
}

}  // namespace
}  // namespace mtta
