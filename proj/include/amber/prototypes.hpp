#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "amber/error.hpp"
#include "amber/tensor.hpp"

namespace amber {

// ---------------------------------------------------------------------------
// Online prototype bank: one vector per class, refined by a momentum moving
// average of the hidden states seen for that class. Unseen classes hold an
// exact zero vector and are excluded from similarity scoring until their
// first sample arrives.
// ---------------------------------------------------------------------------
class PrototypeBank {
public:
    PrototypeBank() = default;
    PrototypeBank(std::size_t num_classes, std::size_t dim, double alpha, double tau,
                  bool normalize = false)
        : dim_(dim), alpha_(alpha), tau_(tau), normalize_(normalize),
          protos_(num_classes, std::vector<double>(dim, 0.0)),
          seen_(num_classes, 0) {
        if (alpha < 0.0 || alpha > 1.0)
            throw ParameterError("prototype bank: alpha must be in [0,1]");
        if (tau <= 0.0) throw ParameterError("prototype bank: tau must be positive");
    }

    std::size_t num_classes() const { return protos_.size(); }
    std::size_t dim() const { return dim_; }
    double alpha() const { return alpha_; }
    double tau() const { return tau_; }
    bool normalize() const { return normalize_; }

    bool is_seen(std::size_t k) const { return seen_.at(k) != 0; }
    std::size_t seen_count() const {
        std::size_t n = 0;
        for (auto s : seen_) n += (s != 0);
        return n;
    }

    const std::vector<double>& prototype(std::size_t k) const { return protos_.at(k); }
    std::vector<double>& prototype_mut(std::size_t k) { return protos_.at(k); }
    const std::vector<std::uint8_t>& seen_flags() const { return seen_; }

    void mark_seen(std::size_t k) { seen_.at(k) = 1; }

private:
    std::size_t dim_ = 0;
    double alpha_ = 0.9;
    double tau_ = 0.1;
    bool normalize_ = false;
    std::vector<std::vector<double>> protos_;
    std::vector<std::uint8_t> seen_;
};

namespace detail {

inline void l2_normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n < 1e-12) return;
    for (double& x : v) x /= n;
}

// Per-class means of the batch hidden vectors. Returns (mean, count) pairs
// indexed by class; count 0 means the class is absent from the batch.
inline std::pair<std::vector<std::vector<double>>, std::vector<std::size_t>>
class_means(const std::vector<std::vector<double>>& hiddens,
            const std::vector<std::size_t>& labels, const PrototypeBank& bank) {
    if (hiddens.size() != labels.size())
        throw DimensionError("prototypes: batch and label counts differ");
    std::vector<std::vector<double>> mean(bank.num_classes(),
                                          std::vector<double>(bank.dim(), 0.0));
    std::vector<std::size_t> count(bank.num_classes(), 0);
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const std::size_t y = labels[t];
        if (y >= bank.num_classes())
            throw IndexError("prototypes: label " + std::to_string(y) + " out of range " +
                             std::to_string(bank.num_classes()));
        if (hiddens[t].size() != bank.dim())
            throw DimensionError("prototypes: hidden length mismatch");
        for (std::size_t i = 0; i < bank.dim(); ++i) mean[y][i] += hiddens[t][i];
        count[y] += 1;
    }
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        if (count[k] == 0) continue;
        const double inv = 1.0 / static_cast<double>(count[k]);
        for (auto& v : mean[k]) v *= inv;
    }
    return {std::move(mean), std::move(count)};
}

} // namespace detail

// Cosine similarities between a hidden state and every prototype. Unseen
// classes get a -inf sentinel, which softmax_nll treats as masked. Gradients
// flow into h only; the prototypes are constants.
inline Tensor similarities(const Tensor& h, const PrototypeBank& bank, Tape* tape = nullptr) {
    if (h.shape().size() != 1 || h.size() != bank.dim())
        throw DimensionError("similarities: hidden length " + std::to_string(h.size()) +
                             " does not match prototype dim " + std::to_string(bank.dim()));
    if (bank.seen_count() == 0)
        throw StateError("similarities: no seen prototype");
    std::vector<Tensor> sims;
    std::vector<std::size_t> positions;
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        if (!bank.is_seen(k)) continue;
        Tensor proto = Tensor::vector(bank.prototype(k));
        sims.push_back(cosine_sim(h, proto, 1e-12, tape));
        positions.push_back(k);
    }
    return scatter_scalars(sims, positions, bank.num_classes(),
                           -std::numeric_limits<double>::infinity(), tape);
}

// Contrastive pull toward the true-class prototype: mean over the batch of
// softmax cross-entropy on the similarity scores at temperature tau. Every
// label must already be seen (register first-seen classes beforehand).
inline Tensor proto_loss(const std::vector<Tensor>& batch_h,
                         const std::vector<std::size_t>& labels,
                         const PrototypeBank& bank, Tape* tape = nullptr) {
    if (batch_h.empty() || batch_h.size() != labels.size())
        throw DimensionError("proto_loss: batch and label counts differ or batch empty");
    std::vector<Tensor> per_sample;
    per_sample.reserve(batch_h.size());
    for (std::size_t t = 0; t < batch_h.size(); ++t) {
        if (labels[t] >= bank.num_classes())
            throw IndexError("proto_loss: label " + std::to_string(labels[t]) +
                             " out of range");
        if (!bank.is_seen(labels[t]))
            throw StateError("proto_loss: class " + std::to_string(labels[t]) +
                             " has no prototype yet");
        Tensor s = similarities(batch_h[t], bank, tape);
        per_sample.push_back(softmax_nll(s, labels[t], bank.tau(), tape));
    }
    return average(per_sample, tape);
}

// Momentum update p_k <- alpha p_k + (1-alpha) mean_k over the batch classes.
// A first-seen class takes the batch mean directly (a zero ancestor would
// drag early prototypes toward the origin). Classes absent from the batch
// are untouched. Hidden vectors enter detached from the gradient flow.
inline void update_prototypes(PrototypeBank& bank,
                              const std::vector<std::vector<double>>& hiddens,
                              const std::vector<std::size_t>& labels) {
    auto [mean, count] = detail::class_means(hiddens, labels, bank);
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        if (count[k] == 0) continue;
        auto& p = bank.prototype_mut(k);
        if (bank.is_seen(k)) {
            const double a = bank.alpha();
            for (std::size_t i = 0; i < p.size(); ++i)
                p[i] = a * p[i] + (1.0 - a) * mean[k][i];
        } else {
            p = mean[k];
            bank.mark_seen(k);
        }
        if (bank.normalize()) detail::l2_normalize(p);
    }
}

// Mean-set prototypes for classes in the batch that have never been seen,
// leaving seen classes alone. Makes proto_loss well defined for a batch
// that introduces new classes.
inline void register_unseen(PrototypeBank& bank,
                            const std::vector<std::vector<double>>& hiddens,
                            const std::vector<std::size_t>& labels) {
    auto [mean, count] = detail::class_means(hiddens, labels, bank);
    for (std::size_t k = 0; k < bank.num_classes(); ++k) {
        if (count[k] == 0 || bank.is_seen(k)) continue;
        bank.prototype_mut(k) = mean[k];
        if (bank.normalize()) detail::l2_normalize(bank.prototype_mut(k));
        bank.mark_seen(k);
    }
}

} // namespace amber
