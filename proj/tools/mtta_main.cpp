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


// mtta: command-line front end of the meta-auxiliary TTA library.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtta/adapt.hpp"
#include "mtta/error.hpp"
#include "mtta/pipeline.hpp"

namespace {

enum ExitCode { ok = 0, failure = 1, usage = 2, config_error = 3, numeric_error = 4 };

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += (c == '\n') ? ' ' : c;
    }
    return out;
}

int report(const std::string& kind, const std::string& message, int code) {
    std::cerr << "error: kind=" << kind << " message=\"" << escape(message) << "\"\n";
    return code;
}

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out, data, checkpoint, split, stage, strategy, study;
    std::optional<int> epochs, steps;
    std::optional<double> lr;
    bool timing = false;
};

std::uint64_t parse_seed(const std::string& text, const char* origin) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        mtta::fail(mtta::ErrorKind::config, std::string(origin) + " is not an unsigned integer: '" + text + "'");
    }
    return v;
}

// Defaults, then the config file, then flags. The seed falls back to
// MTTA_SEED only when neither a flag nor the file sets it.
mtta::RunConfig resolve(const std::string& command, const Flags& f) {
    nlohmann::json file = nlohmann::json::object();
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) mtta::fail(mtta::ErrorKind::io, "cannot open config " + f.config_path);
        try {
            file = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            mtta::fail(mtta::ErrorKind::config, "config " + f.config_path + " is not valid JSON: " + e.what());
        }
        if (!file.is_object()) mtta::fail(mtta::ErrorKind::config, "config must be a JSON object");
    }

    std::uint64_t seed = 0;
    if (f.seed) {
        seed = *f.seed;
    } else if (file.contains("seed")) {
        seed = file.at("seed").get<std::uint64_t>();
    } else if (const char* env = std::getenv("MTTA_SEED")) {
        seed = parse_seed(env, "MTTA_SEED");
    }

    mtta::RunConfig cfg = mtta::benchmark_config(seed);
    mtta::from_json(file, cfg);
    cfg.command = command;
    cfg.seed = seed;
    cfg.propagate_seed();

    if (f.threads) cfg.threads = *f.threads;
    if (f.out) cfg.output_dir = *f.out;
    if (f.data) cfg.data_dir = *f.data;
    if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
    if (f.split) cfg.test_split = *f.split;
    if (f.stage) cfg.stage = *f.stage;
    if (f.study) cfg.study = *f.study;
    if (f.strategy) cfg.strategy.kind = mtta::strategy_from_string(*f.strategy);
    if (f.lr) cfg.strategy.lr = *f.lr;
    if (f.steps) cfg.strategy.steps = *f.steps;
    if (f.timing) cfg.timing = true;
    if (f.epochs) {
        if (cfg.stage == "meta") {
            cfg.train.meta_epochs = *f.epochs;
        } else {
            cfg.train.joint_epochs = *f.epochs;
        }
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-auxiliary test-time adaptation for audio-visual highlight detection"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config_path, "JSON run configuration");
        sub->add_option("--seed", f.seed, "master seed (overrides the config and MTTA_SEED)");
        sub->add_option("--threads", f.threads, "per-video worker threads (default 1)");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--data", f.data, "directory with train/test_iid/test_shifted .avhf files");
        sub->add_option("--split", f.split, "evaluation split: train, test_iid or test_shifted");
    };

    auto* gen = app.add_subcommand("gen-synth", "generate the synthetic audio-visual benchmark");
    common(gen);

    auto* train = app.add_subcommand("train", "joint or meta-auxiliary training");
    common(train);
    train->add_option("--stage", f.stage, "joint or meta")->check(CLI::IsMember({"joint", "meta"}));
    train->add_option("--epochs", f.epochs, "epochs of the selected stage");
    train->add_option("--checkpoint", f.checkpoint, "joint checkpoint to start meta training from");

    auto* adapt = app.add_subcommand("adapt-eval", "per-video test-time adaptation and evaluation");
    common(adapt);
    adapt->add_option("--checkpoint", f.checkpoint, "model checkpoint (required unless set in the config)");
    adapt->add_option("--strategy", f.strategy, "halluc, entropy, pseudo or none")
        ->check(CLI::IsMember({"halluc", "hallucination", "entropy", "pseudo", "pseudo_label", "none"}));
    adapt->add_option("--lr", f.lr, "adaptation learning rate");
    adapt->add_option("--steps", f.steps, "adaptation steps");
    adapt->add_flag("--timing", f.timing, "record per-video wall-clock time");

    auto* ablate = app.add_subcommand("ablate", "ablation sweeps");
    common(ablate);
    ablate->add_option("--study", f.study, "updates, noise, drop-audio, drop-train or cross-dataset")
        ->check(CLI::IsMember({"updates", "noise", "drop-audio", "drop-train", "cross-dataset"}));
    ablate->add_option("--checkpoint", f.checkpoint, "joint checkpoint (trained from scratch if absent)");
    ablate->add_flag("--timing", f.timing, "record per-video wall-clock time");

    auto* shift = app.add_subcommand("shift-score", "FID between training halves and a test split");
    common(shift);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
    common(grad);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report("usage", e.what(), usage);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const mtta::RunConfig cfg = resolve(command, f);
        if (command == "gradcheck") {
            const double worst = mtta::run_gradcheck_pipeline(cfg);
            std::cout << "gradcheck max_rel_error=" << worst << '\n';
            return worst < 1e-4 ? ok : numeric_error;
        }
        mtta::run_command(cfg);
        std::cout << command << " done: " << cfg.output_dir << '\n';
        return ok;
    } catch (const mtta::Error& e) {
        const int code = e.kind() == mtta::ErrorKind::config    ? config_error
                         : e.kind() == mtta::ErrorKind::numeric ? numeric_error
                                                                : failure;
        return report(std::string(mtta::to_string(e.kind())), e.what(), code);
    } catch (const nlohmann::json::exception& e) {
        return report("config", e.what(), config_error);
    } catch (const std::exception& e) {
        return report("internal", e.what(), failure);
    }
}
