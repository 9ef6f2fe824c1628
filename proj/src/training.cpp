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

#include "mtta/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mtta/error.hpp"

namespace mtta {

OptimizerState OptimizerState::make_sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::sgd;
    s.lr = lr;
    return s;
}

OptimizerState OptimizerState::make_adam(double lr, double beta1, double beta2, double epsilon) {
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

namespace {

const Array& grad_for(const GradMap& grads, const std::string& name, const Array& param) {
    auto it = grads.find(name);
    if (it == grads.end()) fail(ErrorKind::contract, "missing gradient for " + name);
    if (it->second.shape() != param.shape()) {
        fail(ErrorKind::dimension, "gradient shape " + shape_string(it->second.shape()) + " does not match " + name);
    }
    return it->second;
}

}  // namespace

void sgd_step(ParamStore& params, const GradMap& grads, std::span<const std::string> subset, double lr) {
    for (const std::string& name : subset) {
        Array& p = params.value(name);
        const Array& g = grad_for(grads, name, p);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
}

void adam_step(OptimizerState& state, ParamStore& params, const GradMap& grads, std::span<const std::string> subset) {
    if (state.kind != OptimizerKind::adam) fail(ErrorKind::contract, "adam_step on a non-Adam optimizer state");
    for (const std::string& name : subset) grad_for(grads, name, params.value(name));
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (const std::string& name : subset) {
        Array& p = params.value(name);
        const Array& g = grads.at(name);
        auto [m_it, m_new] = state.first_moment.try_emplace(name, Array(p.shape()));
        auto [v_it, v_new] = state.second_moment.try_emplace(name, Array(p.shape()));
        Array& m = m_it->second;
        Array& v = v_it->second;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

void optimizer_step(OptimizerState& state, ParamStore& params, const GradMap& grads,
                    std::span<const std::string> subset) {
    if (state.kind == OptimizerKind::adam) {
        adam_step(state, params, grads, subset);
    } else {
        sgd_step(params, grads, subset, state.lr);
        ++state.step;
    }
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
    if (!(inner_lr >= 0.0) || !(meta_lr >= 0.0) || !(joint_lr >= 0.0)) {
        fail(ErrorKind::config, "learning rates must be non-negative");
    }
    if (inner_steps < 1) fail(ErrorKind::config, "inner_steps must be >= 1");
    if (batch_size < 1) fail(ErrorKind::config, "batch_size must be >= 1");
    if (joint_epochs < 0 || meta_epochs < 0) fail(ErrorKind::config, "epoch counts must be >= 0");
}

NLOHMANN_JSON_SERIALIZE_ENUM(OptimizerKind, {{OptimizerKind::sgd, "sgd"}, {OptimizerKind::adam, "adam"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Line7Mode, {{Line7Mode::sequential, "sequential"}, {Line7Mode::batch_mean, "batch_mean"}})

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"inner_lr", c.inner_lr},
                       {"meta_lr", c.meta_lr},
                       {"joint_lr", c.joint_lr},
                       {"inner_steps", c.inner_steps},
                       {"batch_size", c.batch_size},
                       {"joint_epochs", c.joint_epochs},
                       {"meta_epochs", c.meta_epochs},
                       {"seed", c.seed},
                       {"outer_optimizer", c.outer_optimizer},
                       {"line7_mode", c.line7_mode}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.inner_lr = j.value("inner_lr", c.inner_lr);
    c.meta_lr = j.value("meta_lr", c.meta_lr);
    c.joint_lr = j.value("joint_lr", c.joint_lr);
    c.inner_steps = j.value("inner_steps", c.inner_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.joint_epochs = j.value("joint_epochs", c.joint_epochs);
    c.meta_epochs = j.value("meta_epochs", c.meta_epochs);
    c.seed = j.value("seed", c.seed);
    c.outer_optimizer = j.value("outer_optimizer", c.outer_optimizer);
    c.line7_mode = j.value("line7_mode", c.line7_mode);
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
    out << "epoch,l_pri,l_aux,l_joint\n";
    out.precision(17);
    for (const EpochRecord& r : history) {
        out << r.epoch << ',' << r.l_pri << ',' << r.l_aux << ',' << r.l_joint << '\n';
    }
}

// ---------------------------------------------------------------------------
// Joint training

namespace {

void require_labeled(const Dataset& dataset) {
    if (dataset.empty()) fail(ErrorKind::contract, "training needs a non-empty dataset");
    for (const auto& v : dataset.videos) {
        if (!v.labeled()) fail(ErrorKind::contract, "training video " + v.id + " has no targets");
        if (!v.has_audio()) fail(ErrorKind::contract, "training video " + v.id + " has no audio");
    }
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

void add_into(GradMap& acc, const GradMap& grads, double weight = 1.0) {
    for (const auto& [name, g] : grads) {
        auto [it, inserted] = acc.try_emplace(name, Array(g.shape()));
        Array& a = it->second;
        for (std::size_t i = 0; i < g.size(); ++i) a[i] += weight * g[i];
    }
}

bool in_partition(Partition p, std::initializer_list<Partition> set) {
    return std::find(set.begin(), set.end(), p) != set.end();
}

}  // namespace

LossBundle evaluate_losses(const ParamStore& params, const Dataset& dataset) {
    require_labeled(dataset);
    LossBundle total;
    for (const auto& video : dataset.videos) {
        Tape tape;
        BoundParams bound(tape, params, [](const std::string&, Partition) { return false; });
        ForwardTrace trace = forward(bound, video, false);
        const double l_pri = primary_loss(trace.scores, tape.constant(*video.targets)).value().item();
        AuxTerms aux = aux_loss(trace);
        total.l_pri += l_pri;
        total.l_hal_av += aux.hal_av.value().item();
        total.l_hal_va += aux.hal_va.value().item();
    }
    const double n = static_cast<double>(dataset.size());
    total.l_pri /= n;
    total.l_hal_av /= n;
    total.l_hal_va /= n;
    total.l_aux = total.l_hal_av + total.l_hal_va;
    total.l_joint = total.l_pri + total.l_aux;
    return total;
}

TrainHistory train_joint(ParamStore& params, const Dataset& dataset, const TrainConfig& cfg) {
    cfg.validate();
    require_labeled(dataset);
    TrainHistory history;
    if (cfg.joint_epochs == 0) return history;

    std::mt19937_64 rng(cfg.seed ^ 0x6a6f696e74ULL);
    OptimizerState adam = OptimizerState::make_adam(cfg.joint_lr);
    const std::vector<std::string> all = params.names();

    for (int epoch = 1; epoch <= cfg.joint_epochs; ++epoch) {
        const auto order = shuffled_order(dataset.size(), rng);
        EpochRecord record{epoch};
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double weight = 1.0 / static_cast<double>(end - start);
            GradMap acc;
            for (std::size_t i = start; i < end; ++i) {
                JointResult r = joint_loss(params, dataset.videos[order[i]]);
                add_into(acc, r.grads, weight);
                record.l_pri += r.losses.l_pri;
                record.l_aux += r.losses.l_aux;
            }
            adam_step(adam, params, acc, all);
        }
        record.l_pri /= static_cast<double>(dataset.size());
        record.l_aux /= static_cast<double>(dataset.size());
        record.l_joint = record.l_pri + record.l_aux;
        history.push_back(record);
    }
    return history;
}

// ---------------------------------------------------------------------------
// Meta-auxiliary training

InnerResult inner_adapt(const ParamStore& params, const FeatureSequence& video, double lr, int steps,
                        bool record_final) {
    if (steps < 1) fail(ErrorKind::config, "inner adaptation needs at least one step");
    if (!video.has_audio()) fail(ErrorKind::contract, "inner adaptation needs audio (" + video.id + ")");

    // Strip labels so nothing on this path can read them.
    FeatureSequence unlabeled{video.id, video.visual, video.audio, std::nullopt};

    InnerResult out{params, {}, {}};
    const std::vector<std::string> subset = params.names_in({Partition::shared, Partition::aux});
    auto trainable = [](const std::string&, Partition p) {
        return in_partition(p, {Partition::shared, Partition::aux});
    };
    for (int k = 0; k < steps; ++k) {
        Tape tape;
        BoundParams bound(tape, out.adapted, trainable);
        AuxTerms aux = aux_loss(forward(bound, unlabeled, false));
        out.trajectory.push_back(aux.aux.value().item());
        tape.backward(aux.aux);
        GradMap grads = bound.gradients();
        sgd_step(out.adapted, grads, subset, lr);
        if (k == 0) out.first_grads = std::move(grads);
    }
    if (record_final) {
        Tape tape;
        BoundParams bound(tape, out.adapted, [](const std::string&, Partition) { return false; });
        out.trajectory.push_back(aux_loss(forward(bound, unlabeled, false)).aux.value().item());
    }
    return out;
}

namespace {

struct PrimaryGrad {
    double l_pri;
    GradMap grads;  // shared and primary
};

PrimaryGrad primary_grad(const ParamStore& params, const FeatureSequence& video) {
    Tape tape;
    BoundParams bound(tape, params, [](const std::string&, Partition p) {
        return in_partition(p, {Partition::shared, Partition::primary});
    });
    ForwardTrace trace = forward(bound, video, false);
    Var loss = primary_loss(trace.scores, tape.constant(*video.targets));
    tape.backward(loss);
    return PrimaryGrad{loss.value().item(), bound.gradients()};
}

void copy_partitions(ParamStore& dst, const ParamStore& src, std::span<const std::string> names) {
    for (const std::string& name : names) dst.value(name) = src.value(name);
}

}  // namespace

TrainHistory train_meta(ParamStore& params, const Dataset& dataset, const TrainConfig& cfg,
                        const MetaObserver* observer) {
    cfg.validate();
    require_labeled(dataset);
    if (params.params().empty()) fail(ErrorKind::contract, "meta training needs initialized parameters");

    const bool observe = observer && observer->on_update;
    std::mt19937_64 rng(cfg.seed ^ 0x6d657461ULL);
    OptimizerState outer = cfg.outer_optimizer == OptimizerKind::adam ? OptimizerState::make_adam(cfg.meta_lr)
                                                                       : OptimizerState::make_sgd(cfg.meta_lr);
    const std::vector<std::string> shared_aux = params.names_in({Partition::shared, Partition::aux});
    const std::vector<std::string> shared_primary = params.names_in({Partition::shared, Partition::primary});

    auto commit = [&](UpdateKind kind, const std::function<void()>& update) {
        if (!observe) {
            update();
            return;
        }
        ParamStore before = params;
        update();
        observer->on_update(kind, before, params);
    };

    TrainHistory history;
    for (int epoch = 1; epoch <= cfg.meta_epochs; ++epoch) {
        const auto order = shuffled_order(dataset.size(), rng);
        EpochRecord record{epoch};
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            GradMap outer_grads;
            GradMap aux_mean;
            const ParamStore batch_start = cfg.line7_mode == Line7Mode::batch_mean ? params : ParamStore{};

            for (std::size_t i = start; i < end; ++i) {
                const FeatureSequence& video = dataset.videos[order[i]];
                if (cfg.line7_mode == Line7Mode::sequential) {
                    InnerResult inner = inner_adapt(params, video, cfg.inner_lr, cfg.inner_steps, false);
                    record.l_aux += inner.trajectory.front();
                    // The committed aux update equals omega_b, so the current
                    // parameters are exactly {omega_s, omega_a, theta_p}.
                    commit(UpdateKind::aux, [&] { copy_partitions(params, inner.adapted, shared_aux); });
                    PrimaryGrad pg = primary_grad(params, video);
                    record.l_pri += pg.l_pri;
                    add_into(outer_grads, pg.grads);
                } else {
                    InnerResult inner = inner_adapt(batch_start, video, cfg.inner_lr, cfg.inner_steps, false);
                    record.l_aux += inner.trajectory.front();
                    add_into(aux_mean, inner.first_grads, 1.0 / static_cast<double>(end - start));
                    PrimaryGrad pg = primary_grad(inner.adapted, video);
                    record.l_pri += pg.l_pri;
                    add_into(outer_grads, pg.grads);
                }
            }
            if (cfg.line7_mode == Line7Mode::batch_mean) {
                commit(UpdateKind::aux, [&] { sgd_step(params, aux_mean, shared_aux, cfg.inner_lr); });
            }
            commit(UpdateKind::outer, [&] { optimizer_step(outer, params, outer_grads, shared_primary); });
        }
        record.l_pri /= static_cast<double>(dataset.size());
        record.l_aux /= static_cast<double>(dataset.size());
        record.l_joint = record.l_pri + record.l_aux;
        history.push_back(record);
    }
    return history;
}

}  // namespace mtta
