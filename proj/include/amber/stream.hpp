#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include "amber/data.hpp"
#include "amber/error.hpp"
#include "amber/feedback.hpp"
#include "amber/log.hpp"
#include "amber/optim.hpp"
#include "amber/prototypes.hpp"
#include "amber/replay.hpp"
#include "amber/sdsm.hpp"

namespace amber {

enum class InferenceRule { proto_nearest = 0, logit_argmax = 1 };

struct TaskSchedule {
    std::vector<std::vector<std::size_t>> tasks;
    // Per-class cap on training samples per task; 0 means use everything.
    std::size_t samples_per_class = 0;
    std::size_t batch_size = 10;

    void validate(std::size_t num_classes) const {
        if (tasks.empty()) throw ConfigError("schedule.tasks: at least one task required");
        if (batch_size == 0) throw ConfigError("schedule.batch_size: must be positive");
        std::unordered_set<std::size_t> seen;
        for (const auto& task : tasks) {
            if (task.empty()) throw ConfigError("schedule.tasks: empty task");
            for (std::size_t c : task) {
                if (c >= num_classes)
                    throw ConfigError("schedule.tasks: class " + std::to_string(c) +
                                      " out of range for " + std::to_string(num_classes) +
                                      " classes");
                if (!seen.insert(c).second)
                    throw ConfigError("schedule.tasks: class " + std::to_string(c) +
                                      " appears in more than one task");
            }
        }
    }
};

struct TrainConfig {
    double tau = 0.1;
    double alpha = 0.9;
    double lambda = 1.0; // weight of the cross-entropy term in the combined loss
    std::size_t m = 2;   // confusable pairs entering the feedback signal
    AdamConfig adam;
    std::size_t buffer_capacity = 100;
    std::size_t replay_batch = 10;
    std::size_t epochs_per_batch = 1;
    std::uint64_t seed = 1;
    bool use_apa = true; // prototype contrastive loss on/off
    bool use_mf = true;  // confusion feedback on/off
    bool freeze_feedback = false; // keep fb_W* out of the optimizer
    bool feedback_both_rows = false;
    bool normalize_prototypes = false;
    InferenceRule inference = InferenceRule::proto_nearest;

    void validate() const {
        if (tau <= 0.0) throw ConfigError("train.tau: must be positive");
        if (alpha < 0.0 || alpha > 1.0) throw ConfigError("train.alpha: must be in [0,1]");
        if (lambda < 0.0) throw ConfigError("train.lambda: must be non-negative");
        if (m == 0) throw ConfigError("train.m: must be >= 1");
        if (buffer_capacity == 0) throw ConfigError("train.buffer_capacity: must be positive");
        if (epochs_per_batch == 0) throw ConfigError("train.epochs_per_batch: must be >= 1");
        try {
            adam.validate();
        } catch (const ParameterError& e) {
            throw ConfigError(std::string("train.") + e.what());
        }
    }
};

struct StepLosses {
    double l_apa = 0.0;
    double l_task = 0.0;
    double l_total = 0.0;
};

struct StepRecord {
    std::size_t step = 0;
    std::size_t task = 0;
    StepLosses losses;
};

// R[i][j] = accuracy on task j's test split after training through task i.
struct RunLedger {
    std::vector<std::vector<double>> matrix;
    double avg_accuracy = 0.0;
    double avg_forgetting = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
};

struct StreamHooks {
    std::function<void(const StepRecord&)> on_step;
    // Fired when a training sample is consumed from the stream; replay reuse
    // does not fire it. Lets tests assert the single-pass access discipline.
    std::function<void(std::size_t task, std::size_t dataset_index)> on_train_sample;
};

// ---------------------------------------------------------------------------
// One optimization step of the online loop:
//   replay draw -> feedback refresh -> forward -> register new classes ->
//   combined loss -> backprop + Adam -> prototype momentum update ->
//   reservoir insertion of the new samples.
// ---------------------------------------------------------------------------
inline StepLosses train_step(SdsmModel& model, PrototypeBank& bank, const TrainConfig& cfg,
                             const std::vector<Exemplar>& new_batch, ReplayBuffer& buf,
                             Rng& rng, bool insert_new = true) {
    if (new_batch.empty()) throw DataError("train_step: empty batch");

    std::vector<Exemplar> combined = new_batch;
    {
        const auto replay = buf.sample(cfg.replay_batch, rng);
        combined.insert(combined.end(), replay.begin(), replay.end());
    }

    FeedbackState fb_state;
    const Tensor* fb = nullptr;
    if (cfg.use_mf) {
        fb_state = refresh_feedback(bank, cfg.m, cfg.feedback_both_rows);
        fb = &fb_state.signal;
    }

    Tape tape;
    std::vector<Tensor> hiddens;
    std::vector<Tensor> logit_losses;
    std::vector<std::vector<double>> hidden_values;
    std::vector<std::size_t> labels;
    hiddens.reserve(combined.size());
    labels.reserve(combined.size());
    for (const Exemplar& ex : combined) {
        ForwardTrace trace = forward(ex.input, model, fb, &tape);
        logit_losses.push_back(softmax_nll(trace.logits, ex.label, 1.0, &tape));
        hidden_values.push_back(trace.hidden.values());
        hiddens.push_back(std::move(trace.hidden));
        labels.push_back(ex.label);
    }

    register_unseen(bank, hidden_values, labels);

    Tensor l_task = average(logit_losses, &tape);
    StepLosses out;
    out.l_task = l_task.value();

    Tensor total;
    if (cfg.use_apa) {
        Tensor l_apa = proto_loss(hiddens, labels, bank, &tape);
        out.l_apa = l_apa.value();
        total = add(l_apa, scale(l_task, cfg.lambda, &tape), &tape);
    } else {
        total = scale(l_task, cfg.lambda, &tape);
    }
    out.l_total = total.value();

    tape.backward(total);
    for (Parameter* p : model.parameters()) {
        if (cfg.freeze_feedback && model.is_feedback_param(p)) {
            p->tensor.clear_grad();
            continue;
        }
        p->ensure_grad();
        adam_step(*p, cfg.adam);
    }

    update_prototypes(bank, hidden_values, labels);

    if (insert_new) {
        for (const Exemplar& ex : new_batch) buf.insert(ex, rng);
    }
    return out;
}

inline std::size_t classify(const std::vector<double>& x, const SdsmModel& model,
                            const PrototypeBank& bank, InferenceRule rule,
                            const Tensor* fb = nullptr) {
    return rule == InferenceRule::proto_nearest ? predict(x, model, bank, fb)
                                                : predict_logits(x, model, bank, fb);
}

// Accuracy over the test samples of the given classes.
inline double evaluate(const SdsmModel& model, const PrototypeBank& bank, const Dataset& test,
                       const std::vector<std::size_t>& classes, InferenceRule rule,
                       const Tensor* fb = nullptr) {
    std::size_t total = 0, correct = 0;
    for (std::size_t c : classes) {
        if (c >= test.num_classes || test.by_class[c].empty())
            throw DataError("evaluate: no test samples for class " + std::to_string(c));
        for (std::size_t idx : test.by_class[c]) {
            total += 1;
            correct += (classify(test.inputs[idx], model, bank, rule, fb) == test.labels[idx]);
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

// Mean of the final row: accuracy across all tasks after the full stream.
inline double average_accuracy(const std::vector<std::vector<double>>& matrix) {
    if (matrix.empty()) throw StateError("average_accuracy: empty matrix");
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        if (matrix[i].size() != i + 1)
            throw StateError("average_accuracy: row " + std::to_string(i) +
                             " incomplete (" + std::to_string(matrix[i].size()) + " of " +
                             std::to_string(i + 1) + " entries)");
    }
    const auto& last = matrix.back();
    double s = 0.0;
    for (double v : last) s += v;
    return s / static_cast<double>(last.size());
}

// Mean over earlier tasks of (best accuracy ever achieved - final accuracy).
// The column maximum includes the final row, so a task that only ever
// improves contributes zero rather than negative forgetting.
inline double average_forgetting(const std::vector<std::vector<double>>& matrix) {
    if (matrix.size() < 2) {
        log_warn("average_forgetting: fewer than two tasks, defined as 0");
        return 0.0;
    }
    const std::size_t T = matrix.size();
    const auto& last = matrix.back();
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < T; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = j; i < T; ++i) best = std::max(best, matrix[i][j]);
        s += best - last[j];
    }
    return s / static_cast<double>(T - 1);
}

// Row means of the accuracy matrix: the incremental-accuracy curve.
inline std::vector<double> incremental_curve(const std::vector<std::vector<double>>& matrix) {
    std::vector<double> curve;
    curve.reserve(matrix.size());
    for (const auto& row : matrix) {
        double s = 0.0;
        for (double v : row) s += v;
        curve.push_back(s / static_cast<double>(row.size()));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// The class-incremental run: stream each task once (batched), evaluate on
// every seen task after each task boundary, and derive the summary metrics.
// ---------------------------------------------------------------------------
inline RunLedger run_stream(SdsmModel& model, PrototypeBank& bank,
                            const TaskSchedule& schedule, const Dataset& train,
                            const Dataset& test, const TrainConfig& cfg,
                            const StreamHooks& hooks = {}) {
    cfg.validate();
    schedule.validate(model.config.num_classes);
    if (train.num_classes != model.config.num_classes)
        throw DataError("run_stream: dataset has " + std::to_string(train.num_classes) +
                        " classes, model expects " + std::to_string(model.config.num_classes));

    Rng base(cfg.seed);
    Rng replay_rng = base.split(7);
    ReplayBuffer buf(cfg.buffer_capacity);

    RunLedger ledger;
    ledger.seed = cfg.seed;
    std::size_t global_step = 0;

    for (std::size_t ti = 0; ti < schedule.tasks.size(); ++ti) {
        const auto& classes = schedule.tasks[ti];
        std::vector<std::size_t> stream =
            task_view(train, classes, base.split(300 + ti).base_seed());

        if (schedule.samples_per_class > 0) {
            std::vector<std::size_t> capped;
            std::vector<std::size_t> used(train.num_classes, 0);
            for (std::size_t idx : stream) {
                if (used[train.labels[idx]] >= schedule.samples_per_class) continue;
                used[train.labels[idx]] += 1;
                capped.push_back(idx);
            }
            stream = std::move(capped);
        }

        for (std::size_t off = 0; off < stream.size(); off += schedule.batch_size) {
            const std::size_t end = std::min(off + schedule.batch_size, stream.size());
            std::vector<Exemplar> batch;
            batch.reserve(end - off);
            for (std::size_t s = off; s < end; ++s) {
                const std::size_t idx = stream[s];
                if (hooks.on_train_sample) hooks.on_train_sample(ti, idx);
                batch.push_back({train.inputs[idx], train.labels[idx]});
            }
            for (std::size_t e = 0; e < cfg.epochs_per_batch; ++e) {
                const StepLosses losses =
                    train_step(model, bank, cfg, batch, buf, replay_rng, e == 0);
                if (hooks.on_step) hooks.on_step({global_step, ti, losses});
                global_step += 1;
            }
        }

        std::vector<double> row;
        row.reserve(ti + 1);
        for (std::size_t tj = 0; tj <= ti; ++tj)
            row.push_back(evaluate(model, bank, test, schedule.tasks[tj], cfg.inference));
        ledger.matrix.push_back(std::move(row));
    }

    ledger.avg_accuracy = average_accuracy(ledger.matrix);
    ledger.avg_forgetting = average_forgetting(ledger.matrix);
    return ledger;
}

} // namespace amber
