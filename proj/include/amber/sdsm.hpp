#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "amber/error.hpp"
#include "amber/optim.hpp"
#include "amber/prototypes.hpp"
#include "amber/rng.hpp"
#include "amber/tensor.hpp"

namespace amber {

enum class Pooling { last = 0, mean = 1 };

struct SdsmConfig {
    std::size_t input_dim = 16;   // d
    std::size_t patch_len = 4;    // must divide d
    std::size_t hidden_dim = 16;  // n
    std::size_t num_classes = 10; // K
    Pooling pooling = Pooling::mean;

    std::size_t seq_len() const { return input_dim / patch_len; }

    void validate() const {
        if (input_dim == 0 || patch_len == 0 || hidden_dim == 0 || num_classes == 0)
            throw ConfigError("model: all dimensions must be positive");
        if (input_dim % patch_len != 0)
            throw ConfigError("model.patch_len: " + std::to_string(patch_len) +
                              " does not divide input_dim " + std::to_string(input_dim));
    }
};

// ---------------------------------------------------------------------------
// Patch embedder + input-gated diagonal state-space recurrence + linear head.
//
//   u_l = W_e * patch_l + b_e
//   a_l = sigmoid(G_a u_l + base_a + da)      forget gate, in (0,1)
//   b_l = softplus(G_b u_l + base_b + db)     input gain, >= 0
//   h_l = a_l . h_{l-1} + b_l . u_l           h_0 = 0
//   hidden = h_L or mean_l h_l
//   logits = C hidden + b_c + dc
//
// da, db, dc are the learned projections of an external feedback vector
// (W_A f, W_B f, W_C f); they vanish when no feedback is supplied.
// ---------------------------------------------------------------------------
struct SdsmModel {
    SdsmConfig config;

    // Serialization follows this declaration order.
    Parameter embed_W;
    Parameter embed_b;
    Parameter gate_Ga;
    Parameter base_a;
    Parameter gate_Gb;
    Parameter base_b;
    Parameter head_C;
    Parameter head_b;
    Parameter fb_WA;
    Parameter fb_WB;
    Parameter fb_WC;

    SdsmModel() = default;

    SdsmModel(const SdsmConfig& cfg, Rng& rng) : config(cfg) {
        cfg.validate();
        const std::size_t n = cfg.hidden_dim, p = cfg.patch_len, K = cfg.num_classes;
        embed_W = Parameter(init_uniform({n, p}, p, rng), "embed_W");
        embed_b = Parameter(Tensor::zeros({n}), "embed_b");
        gate_Ga = Parameter(init_uniform({n, n}, n, rng), "gate_Ga");
        base_a = Parameter(Tensor::zeros({n}), "base_a");
        gate_Gb = Parameter(init_uniform({n, n}, n, rng), "gate_Gb");
        base_b = Parameter(Tensor::zeros({n}), "base_b");
        head_C = Parameter(init_uniform({K, n}, n, rng), "head_C");
        head_b = Parameter(Tensor::zeros({K}), "head_b");
        // Zero-initialized feedback projections keep the feedback path inert
        // until training moves them.
        fb_WA = Parameter(Tensor::zeros({n, K}), "fb_WA");
        fb_WB = Parameter(Tensor::zeros({n, K}), "fb_WB");
        fb_WC = Parameter(Tensor::zeros({K, K}), "fb_WC");
    }

    std::vector<Parameter*> parameters() {
        return {&embed_W, &embed_b, &gate_Ga, &base_a, &gate_Gb, &base_b,
                &head_C, &head_b, &fb_WA, &fb_WB, &fb_WC};
    }

    std::vector<const Parameter*> parameters() const {
        return {&embed_W, &embed_b, &gate_Ga, &base_a, &gate_Gb, &base_b,
                &head_C, &head_b, &fb_WA, &fb_WB, &fb_WC};
    }

    bool is_feedback_param(const Parameter* p) const {
        return p == &fb_WA || p == &fb_WB || p == &fb_WC;
    }

private:
    static Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
        const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
        return Tensor::uniform(std::move(shape), -s, s, rng);
    }
};

struct ForwardTrace {
    Tensor hidden; // pooled state, the representation the prototypes live in
    Tensor logits;
    std::vector<std::vector<double>> a_gates; // per-step gate snapshots
    std::vector<std::vector<double>> b_gates;
};

// Split x into L patches and embed each: token_l = W_e patch_l + b_e.
inline std::vector<Tensor> embed(const std::vector<double>& x, const SdsmModel& model,
                                 Tape* tape = nullptr) {
    const auto& cfg = model.config;
    if (x.size() != cfg.input_dim)
        throw DimensionError("embed: input length " + std::to_string(x.size()) +
                             " != input_dim " + std::to_string(cfg.input_dim));
    std::vector<Tensor> tokens;
    tokens.reserve(cfg.seq_len());
    for (std::size_t l = 0; l < cfg.seq_len(); ++l) {
        const auto first = x.begin() + static_cast<std::ptrdiff_t>(l * cfg.patch_len);
        Tensor patch = Tensor::vector(std::vector<double>(first, first + cfg.patch_len));
        tokens.push_back(add(matvec(model.embed_W.tensor, patch, tape),
                             model.embed_b.tensor, tape));
    }
    return tokens;
}

// Full pass. `fb`, when non-null, is a length-K constant vector whose learned
// projections shift the gate pre-activations and the logits; gradients reach
// fb_WA/fb_WB/fb_WC through those projections.
inline ForwardTrace forward(const std::vector<double>& x, const SdsmModel& model,
                            const Tensor* fb = nullptr, Tape* tape = nullptr) {
    const auto& cfg = model.config;
    Tensor da, db, dc;
    if (fb != nullptr) {
        if (fb->shape().size() != 1 || fb->size() != cfg.num_classes)
            throw DimensionError("forward: feedback length " + std::to_string(fb->size()) +
                                 " != num_classes " + std::to_string(cfg.num_classes));
        da = matvec(model.fb_WA.tensor, *fb, tape);
        db = matvec(model.fb_WB.tensor, *fb, tape);
        dc = matvec(model.fb_WC.tensor, *fb, tape);
    }

    const std::vector<Tensor> tokens = embed(x, model, tape);

    ForwardTrace trace;
    Tensor h = Tensor::zeros({cfg.hidden_dim});
    std::vector<Tensor> states;
    states.reserve(tokens.size());
    for (const Tensor& u : tokens) {
        Tensor pre_a = add(matvec(model.gate_Ga.tensor, u, tape), model.base_a.tensor, tape);
        Tensor pre_b = add(matvec(model.gate_Gb.tensor, u, tape), model.base_b.tensor, tape);
        if (fb != nullptr) {
            pre_a = add(pre_a, da, tape);
            pre_b = add(pre_b, db, tape);
        }
        Tensor a = sigmoid(pre_a, tape);
        Tensor b = softplus(pre_b, tape);
        h = add(mul(a, h, tape), mul(b, u, tape), tape);
        states.push_back(h);
        trace.a_gates.push_back(a.values());
        trace.b_gates.push_back(b.values());
    }

    trace.hidden = (cfg.pooling == Pooling::last) ? states.back() : average(states, tape);

    Tensor logits = add(matvec(model.head_C.tensor, trace.hidden, tape),
                        model.head_b.tensor, tape);
    if (fb != nullptr) logits = add(logits, dc, tape);
    trace.logits = logits;

    if (!trace.hidden.all_finite() || !trace.logits.all_finite())
        throw EvalError("forward: non-finite hidden state or logits");
    return trace;
}

// Nearest prototype in cosine similarity over seen classes; ties go to the
// smallest class index.
inline std::size_t nearest_prototype(const PrototypeBank& bank, const std::vector<double>& h) {
    if (bank.seen_count() == 0) throw StateError("predict: no seen prototype");
    std::size_t best = 0;
    double best_sim = 0.0;
    bool first = true;
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        if (!bank.is_seen(k)) continue;
        const double s = cosine(h, bank.prototype(k));
        if (first || s > best_sim) {
            best = k;
            best_sim = s;
            first = false;
        }
    }
    return best;
}

// `fb`, when given, applies the current feedback modulation at inference;
// it derives from the prototype bank alone, so no test information leaks.
inline std::size_t predict(const std::vector<double>& x, const SdsmModel& model,
                           const PrototypeBank& bank, const Tensor* fb = nullptr) {
    const ForwardTrace trace = forward(x, model, fb);
    return nearest_prototype(bank, trace.hidden.values());
}

// Alternative inference rule: argmax of the head logits, restricted to seen
// classes so untrained heads cannot claim a sample.
inline std::size_t predict_logits(const std::vector<double>& x, const SdsmModel& model,
                                  const PrototypeBank& bank, const Tensor* fb = nullptr) {
    if (bank.seen_count() == 0) throw StateError("predict: no seen prototype");
    const ForwardTrace trace = forward(x, model, fb);
    const auto& lv = trace.logits.values();
    std::size_t best = 0;
    double best_logit = 0.0;
    bool first = true;
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        if (!bank.is_seen(k)) continue;
        if (first || lv[k] > best_logit) {
            best = k;
            best_logit = lv[k];
            first = false;
        }
    }
    return best;
}

} // namespace amber
