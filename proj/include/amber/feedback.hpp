#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "amber/error.hpp"
#include "amber/prototypes.hpp"
#include "amber/tensor.hpp"

namespace amber {

// Prototype-confusion feedback: measure how similar the class prototypes
// are to each other, pick the most confusable pairs, and distill them into
// a length-K signal the model can condition on.
struct FeedbackState {
    Tensor matrix;                                        // K x K prototype cosines
    std::vector<std::pair<std::size_t, std::size_t>> top_pairs; // i < j, most similar first
    Tensor signal;                                        // length K, entries in [-1, 1]
    std::size_t m = 0;
};

// F[i][j] = cos(p_i, p_j) for seen i, j; rows and columns of unseen classes
// stay zero. Symmetric by construction (each unordered pair is computed once).
inline Tensor feedback_matrix(const PrototypeBank& bank) {
    const std::size_t K = bank.num_classes();
    Tensor F = Tensor::zeros({K, K});
    auto& fv = F.values();
    for (std::size_t i = 0; i < K; ++i) {
        if (!bank.is_seen(i)) continue;
        for (std::size_t j = i; j < K; ++j) {
            if (!bank.is_seen(j)) continue;
            const double c = cosine(bank.prototype(i), bank.prototype(j));
            fv[i * K + j] = c;
            fv[j * K + i] = c;
        }
    }
    return F;
}

// Rank unordered seen pairs (i < j) by similarity, descending, ties broken
// lexicographically by (i, j). The signal averages row i of each selected
// pair; with both_rows it averages rows i and j. Fewer than m candidates
// normalizes by the count actually taken; no candidates gives a zero signal.
inline std::pair<std::vector<std::pair<std::size_t, std::size_t>>, Tensor>
feedback_signal(const Tensor& F, const std::vector<std::uint8_t>& seen, std::size_t m,
                bool both_rows = false) {
    if (m == 0) throw ParameterError("feedback_signal: m must be >= 1");
    const std::size_t K = seen.size();
    if (F.shape().size() != 2 || F.shape()[0] != K || F.shape()[1] != K)
        throw DimensionError("feedback_signal: matrix shape " +
                             Tensor::shape_str(F.shape()) + " does not match " +
                             std::to_string(K) + " classes");

    struct Cand {
        double sim;
        std::size_t i, j;
    };
    std::vector<Cand> cands;
    const auto& fv = F.values();
    for (std::size_t i = 0; i < K; ++i) {
        if (!seen[i]) continue;
        for (std::size_t j = i + 1; j < K; ++j) {
            if (!seen[j]) continue;
            cands.push_back({fv[i * K + j], i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    Tensor signal = Tensor::zeros({K});
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t taken = std::min(m, cands.size());
    if (taken == 0) return {pairs, signal};

    auto& sv = signal.values();
    for (std::size_t t = 0; t < taken; ++t) {
        const auto& c = cands[t];
        pairs.emplace_back(c.i, c.j);
        for (std::size_t k = 0; k < K; ++k) {
            sv[k] += fv[c.i * K + k];
            if (both_rows) sv[k] += fv[c.j * K + k];
        }
    }
    const double inv = 1.0 / static_cast<double>(taken * (both_rows ? 2 : 1));
    for (auto& v : sv) v *= inv;
    return {pairs, signal};
}

// Snapshot of the confusion state for one training step. Pure in the bank:
// the same bank always yields the same state.
inline FeedbackState refresh_feedback(const PrototypeBank& bank, std::size_t m,
                                      bool both_rows = false) {
    FeedbackState state;
    state.m = m;
    state.matrix = feedback_matrix(bank);
    auto [pairs, signal] = feedback_signal(state.matrix, bank.seen_flags(), m, both_rows);
    state.top_pairs = std::move(pairs);
    state.signal = std::move(signal);
    return state;
}

} // namespace amber
