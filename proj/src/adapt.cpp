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

#include "mtta/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "mtta/error.hpp"
#include "mtta/losses.hpp"
#include "mtta/training.hpp"

namespace mtta {

std::string_view to_string(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::hallucination: return "hallucination";
        case StrategyKind::entropy: return "entropy";
        case StrategyKind::pseudo_label: return "pseudo_label";
        case StrategyKind::none: return "none";
    }
    return "unknown";
}

StrategyKind strategy_from_string(std::string_view name) {
    if (name == "hallucination" || name == "halluc") return StrategyKind::hallucination;
    if (name == "entropy") return StrategyKind::entropy;
    if (name == "pseudo_label" || name == "pseudo") return StrategyKind::pseudo_label;
    if (name == "none") return StrategyKind::none;
    fail(ErrorKind::config, "unknown adaptation strategy '" + std::string(name) + "'");
}

void AdaptStrategy::validate() const {
    if (kind == StrategyKind::none) return;
    if (steps < 1) fail(ErrorKind::config, "adaptation needs at least one step");
    if (!(lr >= 0.0)) fail(ErrorKind::config, "adaptation learning rate must be >= 0");
    if (kind == StrategyKind::pseudo_label && !(tau_lo < tau_hi)) {
        fail(ErrorKind::config, "pseudo-label thresholds need tau_lo < tau_hi");
    }
}

void to_json(nlohmann::json& j, const AdaptStrategy& s) {
    j = nlohmann::json{{"kind", std::string(to_string(s.kind))},
                       {"lr", s.lr},
                       {"steps", s.steps},
                       {"tau_lo", s.tau_lo},
                       {"tau_hi", s.tau_hi}};
}

void from_json(const nlohmann::json& j, AdaptStrategy& s) {
    if (j.contains("kind")) s.kind = strategy_from_string(j.at("kind").get<std::string>());
    s.lr = j.value("lr", s.lr);
    s.steps = j.value("steps", s.steps);
    s.tau_lo = j.value("tau_lo", s.tau_lo);
    s.tau_hi = j.value("tau_hi", s.tau_hi);
}

namespace {

using Trainable = std::function<bool(const std::string&, Partition)>;

// Mean BCE over the clips with mask 1.
Var masked_bce(Var scores, const Array& labels, const Array& mask, std::size_t count) {
    Tape& tape = scores.tape();
    Var y = tape.constant(labels);
    Var one_minus_y = tape.constant([&] {
        Array a = labels;
        for (double& x : a.values()) x = 1.0 - x;
        return a;
    }());
    Var ll = add(mul(y, log(scores)), mul(one_minus_y, log(add_scalar(scale(scores, -1.0), 1.0))));
    return scale(sum(mul(tape.constant(mask), ll)), -1.0 / static_cast<double>(count));
}

struct PseudoLabels {
    Array labels;
    Array mask;
    std::size_t count = 0;
};

PseudoLabels pseudo_labels(const Array& scores, double tau_lo, double tau_hi) {
    PseudoLabels p{Array(scores.shape()), Array(scores.shape()), 0};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] >= tau_hi) {
            p.labels[i] = 1.0;
            p.mask[i] = 1.0;
            ++p.count;
        } else if (scores[i] <= tau_lo) {
            p.mask[i] = 1.0;
            ++p.count;
        }
    }
    return p;
}

// Shared loop of the label-free surrogate strategies. `surrogate` builds the
// loss from a forward trace and returns an unbound Var when the round has
// nothing to learn from.
template <typename Surrogate>
void descend(ParamStore& params, const FeatureSequence& video, const AdaptStrategy& s, const Trainable& trainable,
             Surrogate surrogate, AdaptationReport& report) {
    const bool missing = !video.has_audio();
    std::vector<std::string> subset;
    for (const auto& [name, p] : params.params()) {
        if (trainable(name, p.partition)) subset.push_back(name);
    }
    for (int k = 0; k <= s.steps; ++k) {
        Tape tape;
        BoundParams bound(tape, params, trainable);
        ForwardTrace trace = forward(bound, video, missing);
        Var loss = surrogate(trace);
        if (!loss.valid()) {
            report.losses.push_back(0.0);
            if (k < s.steps) report.idle_rounds.push_back(k);
            continue;
        }
        report.losses.push_back(loss.value().item());
        if (k == s.steps) break;
        tape.backward(loss);
        sgd_step(params, bound.gradients(), subset, s.lr);
    }
}

bool in_set(Partition p, std::initializer_list<Partition> set) {
    return std::find(set.begin(), set.end(), p) != set.end();
}

}  // namespace

AdaptOutcome adapt_and_predict(const ParamStore& params, const FeatureSequence& video, const AdaptStrategy& strategy) {
    strategy.validate();
    const auto start = std::chrono::steady_clock::now();

    // Adaptation works on a label-free copy.
    const FeatureSequence unlabeled{video.id, video.visual, video.audio, std::nullopt};

    AdaptOutcome out;
    AdaptationReport& report = out.report;
    report.video_id = video.id;
    report.missing_audio = !video.has_audio();
    report.pre = predict(params, unlabeled);

    switch (strategy.kind) {
        case StrategyKind::none:
            report.post = report.pre;
            out.adapted = params;
            break;
        case StrategyKind::hallucination:
            if (!unlabeled.has_audio()) {
                // Without audio there is no hallucination target to adapt to.
                report.skipped = true;
                report.post = report.pre;
                out.adapted = params;
            } else {
                InnerResult inner = inner_adapt(params, unlabeled, strategy.lr, strategy.steps);
                report.losses = std::move(inner.trajectory);
                report.post = predict(inner.adapted, unlabeled);
                out.adapted = std::move(inner.adapted);
            }
            break;
        case StrategyKind::entropy: {
            ParamStore work = params;
            descend(
                work, unlabeled, strategy, [](const std::string&, Partition p) { return p == Partition::shared; },
                [](const ForwardTrace& t) { return entropy_loss(t.scores); }, report);
            report.post = predict(work, unlabeled);
            out.adapted = std::move(work);
            break;
        }
        case StrategyKind::pseudo_label: {
            ParamStore work = params;
            descend(
                work, unlabeled, strategy,
                [](const std::string&, Partition p) { return in_set(p, {Partition::shared, Partition::primary}); },
                [&](const ForwardTrace& t) {
                    PseudoLabels p = pseudo_labels(t.scores.value(), strategy.tau_lo, strategy.tau_hi);
                    if (p.count == 0) return Var{};
                    return masked_bce(t.scores, p.labels, p.mask, p.count);
                },
                report);
            report.post = predict(work, unlabeled);
            out.adapted = std::move(work);
            break;
        }
    }
    out.scores = report.post;
    report.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return out;
}

SplitResult evaluate_split(const ParamStore& params, const Dataset& dataset, const AdaptStrategy& strategy,
                           int threads, BinarizeRule rule) {
    if (dataset.empty()) fail(ErrorKind::contract, "evaluating an empty split");
    strategy.validate();
    for (const auto& v : dataset.videos) {
        if (!v.labeled()) fail(ErrorKind::contract, "evaluation video " + v.id + " has no targets");
    }

    const std::size_t n = dataset.size();
    std::vector<AdaptOutcome> outcomes(n);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            outcomes[i] = adapt_and_predict(params, dataset.videos[i], strategy);
        }
    };
    const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, 256));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                try {
                    work(t, workers);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    SplitResult result;
    double l_pri_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& video = dataset.videos[i];
        const auto targets = video.targets->values();
        const auto& h = outcomes[i].scores;
        double bce = 0.0;
        for (std::size_t c = 0; c < h.size(); ++c) {
            bce -= targets[c] * std::log(h[c]) + (1.0 - targets[c]) * std::log(1.0 - h[c]);
        }
        l_pri_total += bce / static_cast<double>(h.size());
        result.predictions.push_back(VideoPrediction{h, binarize_targets(targets, rule)});
        result.reports.push_back(std::move(outcomes[i].report));
    }
    result.summary = summarize(result.predictions, l_pri_total / static_cast<double>(n));
    return result;
}

nlohmann::json report_to_json(const AdaptationReport& r, bool include_timing) {
    nlohmann::json j{{"id", r.video_id}, {"losses", r.losses}, {"pre", r.pre}, {"post", r.post}};
    if (include_timing) j["millis"] = r.millis;
    if (r.missing_audio) j["missing_audio"] = true;
    if (r.skipped) j["skipped"] = true;
    if (!r.idle_rounds.empty()) j["idle_rounds"] = r.idle_rounds;
    return j;
}

void write_reports_jsonl(std::ostream& out, const std::vector<AdaptationReport>& reports, bool include_timing) {
    for (const auto& r : reports) out << report_to_json(r, include_timing).dump() << '\n';
}

}  // namespace mtta
