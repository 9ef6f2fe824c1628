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


#include "mtta/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bytes.hpp"
#include "mtta/error.hpp"
#include "mtta/gradcheck.hpp"

namespace mtta {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const AblationConfig& c) {
    j = nlohmann::json{{"updates", c.updates},
                       {"noise", c.noise},
                       {"drop_audio", c.drop_audio},
                       {"drop_train", c.drop_train},
                       {"cross_family", c.cross_family}};
}

void from_json(const nlohmann::json& j, AblationConfig& c) {
    c.updates = j.value("updates", c.updates);
    c.noise = j.value("noise", c.noise);
    c.drop_audio = j.value("drop_audio", c.drop_audio);
    c.drop_train = j.value("drop_train", c.drop_train);
    if (j.contains("cross_family")) from_json(j.at("cross_family"), c.cross_family);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"command", c.command},
                       {"seed", c.seed},
                       {"threads", c.threads},
                       {"timing", c.timing},
                       {"data_dir", c.data_dir},
                       {"test_split", c.test_split},
                       {"checkpoint", c.checkpoint},
                       {"output_dir", c.output_dir},
                       {"stage", c.stage},
                       {"study", c.study},
                       {"synth", c.synth},
                       {"model", c.model},
                       {"train", c.train},
                       {"strategy", c.strategy},
                       {"ablation", c.ablation}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    c.command = j.value("command", c.command);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.timing = j.value("timing", c.timing);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.test_split = j.value("test_split", c.test_split);
    c.checkpoint = j.value("checkpoint", c.checkpoint);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.stage = j.value("stage", c.stage);
    c.study = j.value("study", c.study);
    // Sections are merged into the current values, so partial files work.
    if (j.contains("synth")) {
        from_json(j.at("synth"), c.synth);
        c.ablation.cross_family = cross_family(c.synth);
    }
    if (j.contains("model")) from_json(j.at("model"), c.model);
    if (j.contains("train")) from_json(j.at("train"), c.train);
    if (j.contains("strategy")) from_json(j.at("strategy"), c.strategy);
    if (j.contains("ablation")) from_json(j.at("ablation"), c.ablation);
}

void RunConfig::propagate_seed() {
    synth.seed = seed;
    model.seed = seed;
    train.seed = seed;
}

void RunConfig::validate() const {
    static const std::vector<std::string> commands{"gen-synth", "train", "adapt-eval", "ablate", "shift-score",
                                                   "gradcheck"};
    if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
        fail(ErrorKind::config, "unknown command '" + command + "'");
    }
    if (threads < 1) fail(ErrorKind::config, "threads must be >= 1");
    if (command != "gradcheck" && output_dir.empty()) fail(ErrorKind::config, "no output directory given");
    if (command == "train" && stage != "joint" && stage != "meta") {
        fail(ErrorKind::config, "stage must be joint or meta, got '" + stage + "'");
    }
    if (command == "train" && stage == "meta" && checkpoint.empty()) {
        fail(ErrorKind::config, "meta training starts from a joint checkpoint (--checkpoint)");
    }
    if (command == "adapt-eval" && checkpoint.empty()) fail(ErrorKind::config, "adapt-eval needs --checkpoint");
    static const std::vector<std::string> studies{"updates", "noise", "drop-audio", "drop-train", "cross-dataset"};
    if (command == "ablate" && std::find(studies.begin(), studies.end(), study) == studies.end()) {
        fail(ErrorKind::config, "unknown study '" + study + "'");
    }
    static const std::vector<std::string> splits{"train", "test_iid", "test_shifted"};
    if (std::find(splits.begin(), splits.end(), test_split) == splits.end()) {
        fail(ErrorKind::config, "unknown split '" + test_split + "'");
    }
    synth.validate();
    model.validate();
    train.validate();
    strategy.validate();
    for (int k : ablation.updates) {
        if (k < 1) fail(ErrorKind::config, "ablation update counts must be >= 1");
    }
    for (double f : ablation.drop_audio) {
        if (!(f >= 0.0 && f <= 1.0)) fail(ErrorKind::config, "drop fractions must lie in [0, 1]");
    }
    for (double f : ablation.drop_train) {
        if (!(f >= 0.0 && f < 1.0)) fail(ErrorKind::config, "train drop fractions must lie in [0, 1)");
    }
    for (double s : ablation.noise) {
        if (!(s >= 0.0)) fail(ErrorKind::config, "noise levels must be >= 0");
    }
    ablation.cross_family.validate();
}

RunConfig benchmark_config(std::uint64_t seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.train.joint_lr = 1e-3;
    cfg.train.meta_lr = 1e-3;
    cfg.train.inner_lr = 0.25;
    cfg.synth.audio_shift = ModalityShift{1.0, 0.0, 0.0};
    cfg.strategy.kind = StrategyKind::hallucination;
    cfg.strategy.lr = cfg.train.inner_lr;
    cfg.strategy.steps = cfg.train.inner_steps;
    cfg.ablation.cross_family = cross_family(cfg.synth);
    cfg.propagate_seed();
    return cfg;
}

SynthConfig cross_family(const SynthConfig& a) {
    SynthConfig b = a;
    b.rho = 0.4;
    b.sigma_v = a.sigma_v * 1.5;
    b.sigma_a = a.sigma_a * 1.5;
    b.min_clips = 10;
    b.max_clips = 30;
    b.mixing_seed = a.mixing_seed + 1000;
    return b;
}

namespace {

fs::path split_path(const std::string& dir, const std::string& split) { return fs::path(dir) / (split + ".avhf"); }

SynthSplits load_or_generate(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) return generate_synthetic(cfg.synth);
    SynthSplits s;
    s.train = read_avhf(split_path(cfg.data_dir, "train"));
    s.test_iid = read_avhf(split_path(cfg.data_dir, "test_iid"));
    s.test_shifted = read_avhf(split_path(cfg.data_dir, "test_shifted"));
    return s;
}

const Dataset& pick_split(const SynthSplits& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "test_iid") return s.test_iid;
    return s.test_shifted;
}

std::string text_of(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text(const fs::path& path, const std::string& text) {
    bytes::write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Collects artifacts and writes the manifest last.
class OutputDir {
public:
    explicit OutputDir(const RunConfig& cfg) : cfg_(cfg), root_(cfg.output_dir) {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) fail(ErrorKind::io, "cannot create output directory " + root_.string() + ": " + ec.message());
        add_text("config.json", text_of(nlohmann::json(cfg)));
    }

    void add_bytes(const std::string& name, const std::vector<std::uint8_t>& data) {
        bytes::write_file(root_ / name, data);
        files_.push_back({{"name", name}, {"bytes", data.size()}, {"fnv1a64", hash_hex(data)}});
    }

    void add_text(const std::string& name, const std::string& text) {
        add_bytes(name, std::vector<std::uint8_t>(text.begin(), text.end()));
    }

    void finish() {
        nlohmann::json m{{"artifact_version", kArtifactVersion},
                         {"command", cfg_.command},
                         {"seed", cfg_.seed},
                         {"seeds",
                          {{"synth", cfg_.synth.seed},
                           {"mixing", cfg_.synth.mixing_seed},
                           {"model", cfg_.model.seed},
                           {"train", cfg_.train.seed}}},
                         {"files", files_}};
        write_text(root_ / "manifest.json", text_of(m));
    }

private:
    static std::string hash_hex(const std::vector<std::uint8_t>& data) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::uint8_t b : data) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
        std::ostringstream os;
        os << std::hex << std::setw(16) << std::setfill('0') << h;
        return os.str();
    }

    const RunConfig& cfg_;
    fs::path root_;
    nlohmann::json files_ = nlohmann::json::array();
};

std::string metrics_text(const std::vector<std::pair<std::string, MetricSummary>>& rows) {
    std::ostringstream os;
    write_metrics_csv(os, rows);
    return os.str();
}

std::string reports_text(const std::vector<AdaptationReport>& reports, bool timing) {
    std::ostringstream os;
    write_reports_jsonl(os, reports, timing);
    return os.str();
}

std::string history_text(const TrainHistory& h) {
    std::ostringstream os;
    write_history_csv(os, h);
    return os.str();
}

// Model dimensions follow the data.
RunConfig with_data_dims(RunConfig cfg, const Dataset& data) {
    cfg.model.d_v = data.d_v;
    cfg.model.d_a = data.d_a;
    return cfg;
}

ParamStore load_matching(const RunConfig& cfg, const Dataset& data) {
    ParamStore p = load_checkpoint(cfg.checkpoint);
    if (p.config().d_v != data.d_v || p.config().d_a != data.d_a) {
        fail(ErrorKind::dimension, "checkpoint dimensions (" + std::to_string(p.config().d_v) + ", " +
                                       std::to_string(p.config().d_a) + ") do not match the data (" +
                                       std::to_string(data.d_v) + ", " + std::to_string(data.d_a) + ")");
    }
    return p;
}

AdaptStrategy none_strategy() {
    AdaptStrategy s;
    s.kind = StrategyKind::none;
    return s;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

}  // namespace

ParamStore train_joint_model(const RunConfig& cfg, const Dataset& train, TrainHistory* history) {
    ModelConfig mc = cfg.model;
    mc.d_v = train.d_v;
    mc.d_a = train.d_a;
    ParamStore params = init_params(mc);
    TrainHistory h = train_joint(params, train, cfg.train);
    if (history) *history = std::move(h);
    return params;
}

ParamStore train_meta_model(const RunConfig& cfg, const ParamStore& joint, const Dataset& train,
                            TrainHistory* history) {
    ParamStore params = joint;
    TrainHistory h = train_meta(params, train, cfg.train);
    if (history) *history = std::move(h);
    return params;
}

std::vector<FidRow> shift_scores(const Dataset& train, const Dataset& test, std::uint64_t seed) {
    auto [p1, p2] = split_halves(train, seed);
    const Array e1 = video_embeddings(p1);
    const Array e2 = video_embeddings(p2);
    const Array et = video_embeddings(test);
    return {{"train_p1", "train_p2", fid_shift(e1, e2).fid},
            {"train_p1", test.split, fid_shift(e1, et).fid},
            {"train_p2", test.split, fid_shift(e2, et).fid}};
}

void run_gen_synth(const RunConfig& cfg) {
    SynthSplits s = generate_synthetic(cfg.synth);
    OutputDir out(cfg);
    out.add_bytes("train.avhf", encode_avhf(s.train));
    out.add_bytes("test_iid.avhf", encode_avhf(s.test_iid));
    out.add_bytes("test_shifted.avhf", encode_avhf(s.test_shifted));
    out.finish();
}

void run_train(const RunConfig& in) {
    SynthSplits s = load_or_generate(in);
    const RunConfig cfg = with_data_dims(in, s.train);
    cfg.validate();
    TrainHistory history;
    ParamStore params;
    if (cfg.stage == "joint") {
        params = train_joint_model(cfg, s.train, &history);
    } else {
        params = train_meta_model(cfg, load_matching(cfg, s.train), s.train, &history);
    }
    OutputDir out(cfg);
    out.add_bytes(cfg.stage + ".ckpt", encode_checkpoint(params));
    out.add_text("history.csv", history_text(history));
    const Dataset& test = pick_split(s, cfg.test_split);
    SplitResult on_train = evaluate_split(params, s.train, none_strategy(), cfg.threads);
    SplitResult on_test = evaluate_split(params, test, none_strategy(), cfg.threads);
    out.add_text("metrics.csv", metrics_text({{"train", on_train.summary}, {test.split, on_test.summary}}));
    out.add_text("adapt.jsonl", reports_text(on_test.reports, cfg.timing));
    out.finish();
}

void run_adapt_eval(const RunConfig& in) {
    SynthSplits s = load_or_generate(in);
    const RunConfig cfg = with_data_dims(in, s.train);
    cfg.validate();
    const ParamStore params = load_matching(cfg, s.train);
    const Dataset& test = pick_split(s, cfg.test_split);
    SplitResult r = evaluate_split(params, test, cfg.strategy, cfg.threads);
    OutputDir out(cfg);
    out.add_bytes("model.ckpt", encode_checkpoint(params));
    out.add_text("metrics.csv",
                 metrics_text({{test.split + "/" + std::string(to_string(cfg.strategy.kind)), r.summary}}));
    out.add_text("adapt.jsonl", reports_text(r.reports, cfg.timing));
    out.finish();
}

void run_ablate(const RunConfig& in) {
    SynthSplits s = load_or_generate(in);
    const RunConfig cfg = with_data_dims(in, s.train);
    cfg.validate();
    OutputDir out(cfg);

    const ParamStore joint = cfg.checkpoint.empty() ? train_joint_model(cfg, s.train) : load_matching(cfg, s.train);
    out.add_bytes("joint.ckpt", encode_checkpoint(joint));
    const Dataset& test = pick_split(s, cfg.test_split);
    const AdaptStrategy none = none_strategy();

    std::ostringstream table;
    std::vector<AdaptationReport> reports;
    nlohmann::json tagged = nlohmann::json::array();
    auto keep = [&](const std::string& setting, const SplitResult& r) {
        for (const auto& rep : r.reports) {
            nlohmann::json j = report_to_json(rep, cfg.timing);
            j["setting"] = setting;
            tagged.push_back(std::move(j));
        }
    };
    auto evaluate = [&](const ParamStore& p, const Dataset& d, const AdaptStrategy& st) {
        return evaluate_split(p, d, st, cfg.threads);
    };

    if (cfg.study == "updates") {
        table << "updates,map,top5_map,hit_at_1\n";
        for (int k : cfg.ablation.updates) {
            RunConfig c = cfg;
            c.train.inner_steps = k;
            ParamStore meta = train_meta_model(c, joint, s.train);
            out.add_bytes("meta_k" + std::to_string(k) + ".ckpt", encode_checkpoint(meta));
            AdaptStrategy st = cfg.strategy;
            st.steps = k;
            SplitResult r = evaluate(meta, test, st);
            keep("updates=" + std::to_string(k), r);
            table << k << ',' << fmt(r.summary.map) << ',' << fmt(r.summary.top5_map) << ','
                  << fmt(r.summary.hit_at_1) << '\n';
        }
    } else if (cfg.study == "drop-train") {
        table << "fraction,n_train,meta_tta_map\n";
        for (double f : cfg.ablation.drop_train) {
            Dataset reduced = drop_train_fraction(s.train, f, cfg.seed);
            ParamStore meta = train_meta_model(cfg, joint, reduced);
            SplitResult r = evaluate(meta, test, cfg.strategy);
            keep("drop_train=" + fmt(f), r);
            table << fmt(f) << ',' << reduced.size() << ',' << fmt(r.summary.map) << '\n';
        }
    } else {
        const ParamStore meta = train_meta_model(cfg, joint, s.train);
        out.add_bytes("meta.ckpt", encode_checkpoint(meta));
        if (cfg.study == "noise") {
            table << "sigma,joint_map,joint_tta_map,meta_tta_map\n";
            for (double sigma : cfg.ablation.noise) {
                Dataset noisy = corrupt_gaussian(test, sigma, cfg.seed);
                SplitResult j = evaluate(joint, noisy, none);
                SplitResult jt = evaluate(joint, noisy, cfg.strategy);
                SplitResult mt = evaluate(meta, noisy, cfg.strategy);
                keep("noise=" + fmt(sigma), mt);
                table << fmt(sigma) << ',' << fmt(j.summary.map) << ',' << fmt(jt.summary.map) << ','
                      << fmt(mt.summary.map) << '\n';
            }
        } else if (cfg.study == "drop-audio") {
            table << "fraction,joint_map,meta_tta_map\n";
            for (double f : cfg.ablation.drop_audio) {
                Dataset dropped = drop_audio(test, f, cfg.seed);
                SplitResult j = evaluate(joint, dropped, none);
                SplitResult mt = evaluate(meta, dropped, cfg.strategy);
                keep("drop_audio=" + fmt(f), mt);
                table << fmt(f) << ',' << fmt(j.summary.map) << ',' << fmt(mt.summary.map) << '\n';
            }
        } else {
            SynthConfig family_b = cfg.ablation.cross_family;
            family_b.seed = cfg.seed;
            family_b.d_v = s.train.d_v;
            family_b.d_a = s.train.d_a;
            SynthSplits b = generate_synthetic(family_b);
            table << "train_family,test_family,joint_map,joint_tta_map,meta_tta_map\n";
            const std::pair<const char*, const Dataset*> targets[] = {{"A", &test}, {"B", &pick_split(b, cfg.test_split)}};
            for (const auto& [family, data] : targets) {
                SplitResult j = evaluate(joint, *data, none);
                SplitResult jt = evaluate(joint, *data, cfg.strategy);
                SplitResult mt = evaluate(meta, *data, cfg.strategy);
                keep(std::string("test_family=") + family, mt);
                table << "A," << family << ',' << fmt(j.summary.map) << ',' << fmt(jt.summary.map) << ','
                      << fmt(mt.summary.map) << '\n';
            }
        }
    }
    out.add_text("metrics.csv", table.str());
    std::string jsonl;
    for (const auto& j : tagged) jsonl += j.dump() + "\n";
    out.add_text("adapt.jsonl", jsonl);
    out.finish();
}

void run_shift_score(const RunConfig& in) {
    SynthSplits s = load_or_generate(in);
    const RunConfig cfg = with_data_dims(in, s.train);
    cfg.validate();
    std::ostringstream table;
    table << "split_a,split_b,fid\n";
    for (const auto& row : shift_scores(s.train, pick_split(s, cfg.test_split), cfg.seed)) {
        table << row.split_a << ',' << row.split_b << ',' << fmt(row.fid) << '\n';
    }
    OutputDir out(cfg);
    out.add_text("metrics.csv", table.str());
    out.finish();
}

double run_gradcheck_pipeline(const RunConfig& cfg) {
    const auto cases = run_gradcheck(cfg.seed);
    std::ostringstream table;
    table << "case,coordinates,max_rel_error\n";
    double worst = 0.0;
    for (const auto& c : cases) {
        table << c.name << ',' << c.coordinates << ',' << fmt(c.max_rel_error) << '\n';
        worst = std::max(worst, c.max_rel_error);
    }
    if (!cfg.output_dir.empty()) {
        OutputDir out(cfg);
        out.add_text("metrics.csv", table.str());
        out.finish();
    }
    return worst;
}

void run_command(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.command == "gen-synth") return run_gen_synth(cfg);
    if (cfg.command == "train") return run_train(cfg);
    if (cfg.command == "adapt-eval") return run_adapt_eval(cfg);
    if (cfg.command == "ablate") return run_ablate(cfg);
    if (cfg.command == "shift-score") return run_shift_score(cfg);
    run_gradcheck_pipeline(cfg);
}

}  // namespace mtta
