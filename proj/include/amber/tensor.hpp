#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "amber/error.hpp"
#include "amber/rng.hpp"

namespace amber {

// ---------------------------------------------------------------------------
// Tensor: a dense row-major double array with shared storage and a lazily
// allocated gradient buffer. Copies are handles to the same storage, which
// lets tape closures refer to the exact buffers an op consumed or produced.
// ---------------------------------------------------------------------------
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        const std::size_t n = count(shape);
        t.data_ = std::make_shared<Data>();
        t.data_->shape = std::move(shape);
        t.data_->values.assign(n, 0.0);
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<double> values) {
        if (count(shape) != values.size()) {
            throw DimensionError("tensor: " + std::to_string(values.size()) +
                                 " values do not fill shape " + shape_str(shape));
        }
        Tensor t;
        t.data_ = std::make_shared<Data>();
        t.data_->shape = std::move(shape);
        t.data_->values = std::move(values);
        return t;
    }

    static Tensor vector(std::vector<double> values) {
        const std::size_t n = values.size();
        return from({n}, std::move(values));
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
        Tensor t = zeros(std::move(shape));
        for (auto& v : t.values()) v = rng.uniform(lo, hi);
        return t;
    }

    bool defined() const { return static_cast<bool>(data_); }
    const std::vector<std::size_t>& shape() const { return data_->shape; }
    std::size_t size() const { return data_->values.size(); }

    std::vector<double>& values() { return data_->values; }
    const std::vector<double>& values() const { return data_->values; }

    double value() const {
        if (size() != 1) {
            throw DimensionError("tensor: scalar read on shape " + shape_str(shape()));
        }
        return data_->values[0];
    }

    bool requires_grad() const { return data_->requires_grad; }
    void set_requires_grad(bool b) { data_->requires_grad = b; }

    bool has_grad() const { return !data_->grad.empty(); }

    // Gradient buffer, allocated as zeros on first access.
    std::vector<double>& grad() {
        if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0);
        return data_->grad;
    }
    const std::vector<double>& grad() const {
        return const_cast<Tensor*>(this)->grad();
    }

    void clear_grad() { data_->grad.clear(); }

    // Identity of the underlying storage (for aliasing checks in tests).
    const void* storage_id() const { return data_.get(); }

    bool all_finite() const {
        for (double v : data_->values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << ']';
        return os.str();
    }

private:
    struct Data {
        std::vector<std::size_t> shape;
        std::vector<double> values;
        std::vector<double> grad;
        bool requires_grad = false;
    };

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }

    std::shared_ptr<Data> data_;
};

// ---------------------------------------------------------------------------
// Tape: the reverse-mode record. Each op pushes one closure; backward()
// seeds the loss gradient and replays the closures in reverse. A tape is
// built fresh for every forward pass and dropped afterwards.
// ---------------------------------------------------------------------------
class Tape {
public:
    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }

    void backward(Tensor& loss) {
        if (loss.size() != 1) {
            throw DimensionError("backward: loss must be scalar, got shape " +
                                 Tensor::shape_str(loss.shape()));
        }
        loss.grad()[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
};

namespace detail {

inline bool track(const Tape* tape, const Tensor& a) {
    return tape != nullptr && a.requires_grad();
}
inline bool track(const Tape* tape, const Tensor& a, const Tensor& b) {
    return tape != nullptr && (a.requires_grad() || b.requires_grad());
}

} // namespace detail

// ---------------------------------------------------------------------------
// Operations. Every op takes an optional tape; with a null tape it is a
// plain evaluation (inference mode) and the output tracks no gradient.
// ---------------------------------------------------------------------------

// C[m x n] = A[m x k] * B[k x n].  dA += dC * B^T, dB += A^T * dC.
inline Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw DimensionError("matmul: incompatible shapes " + Tensor::shape_str(a.shape()) +
                             " and " + Tensor::shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = Tensor::zeros({m, n});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
        }
    }
    if (detail::track(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a = a, b = b, out = out, m, k, n]() mutable {
            const auto& go = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                const auto& bv2 = b.values();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += go[i * n + j] * bv2[p * n + j];
                        ga[i * k + p] += s;
                    }
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                const auto& av2 = a.values();
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < m; ++i) s += av2[i * k + p] * go[i * n + j];
                        gb[p * n + j] += s;
                    }
            }
        });
    }
    return out;
}

// y[m] = A[m x n] * x[n].  dA += dy x^T, dx += A^T dy.
inline Tensor matvec(const Tensor& a, const Tensor& x, Tape* tape = nullptr) {
    if (a.shape().size() != 2 || x.shape().size() != 1 || a.shape()[1] != x.shape()[0]) {
        throw DimensionError("matvec: incompatible shapes " + Tensor::shape_str(a.shape()) +
                             " and " + Tensor::shape_str(x.shape()));
    }
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    Tensor out = Tensor::zeros({m});
    const auto& av = a.values();
    const auto& xv = x.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += av[i * n + j] * xv[j];
        ov[i] = s;
    }
    if (detail::track(tape, a, x)) {
        out.set_requires_grad(true);
        tape->record([a = a, x = x, out = out, m, n]() mutable {
            const auto& go = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                const auto& xv2 = x.values();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += go[i] * xv2[j];
            }
            if (x.requires_grad()) {
                auto& gx = x.grad();
                const auto& av2 = a.values();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gx[j] += av2[i * n + j] * go[i];
            }
        });
    }
    return out;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             Tensor::shape_str(a.shape()) + " vs " +
                             Tensor::shape_str(b.shape()));
    }
}

inline Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    if (detail::track(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a = a, b = b, out = out]() mutable {
            const auto& go = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
            }
        });
    }
    return out;
}

// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    if (detail::track(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a = a, b = b, out = out]() mutable {
            const auto& go = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                const auto& bv2 = b.values();
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv2[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                const auto& av2 = a.values();
                for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av2[i];
            }
        });
    }
    return out;
}

inline Tensor scale(const Tensor& a, double c, Tape* tape = nullptr) {
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = c * av[i];
    if (detail::track(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out, c]() mutable {
            const auto& go = out.grad();
            auto& ga = a.grad();
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
        });
    }
    return out;
}

inline double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// softplus(x) = log(1 + e^x), overflow-safe.
inline double softplus_scalar(double x) {
    return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

inline Tensor sigmoid(const Tensor& a, Tape* tape = nullptr) {
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = sigmoid_scalar(av[i]);
    if (detail::track(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out]() mutable {
            const auto& go = out.grad();
            const auto& ov2 = out.values();
            auto& ga = a.grad();
            for (std::size_t i = 0; i < go.size(); ++i)
                ga[i] += go[i] * ov2[i] * (1.0 - ov2[i]);
        });
    }
    return out;
}

inline Tensor softplus(const Tensor& a, Tape* tape = nullptr) {
    Tensor out = Tensor::zeros(a.shape());
    const auto& av = a.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = softplus_scalar(av[i]);
    if (detail::track(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a = a, out = out]() mutable {
            const auto& go = out.grad();
            const auto& av2 = a.values();
            auto& ga = a.grad();
            for (std::size_t i = 0; i < go.size(); ++i)
                ga[i] += go[i] * sigmoid_scalar(av2[i]);
        });
    }
    return out;
}

// Scalar product of two equal-length vectors.
inline Tensor dot(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    check_same_shape(a, b, "dot");
    const auto& av = a.values();
    const auto& bv = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
    Tensor out = Tensor::scalar(s);
    if (detail::track(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a = a, b = b, out = out]() mutable {
            const double g = out.grad()[0];
            if (a.requires_grad()) {
                auto& ga = a.grad();
                const auto& bv2 = b.values();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv2[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                const auto& av2 = a.values();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av2[i];
            }
        });
    }
    return out;
}

// Mean of same-shaped tensors. dx_i += dout / N.
inline Tensor average(const std::vector<Tensor>& xs, Tape* tape = nullptr) {
    if (xs.empty()) throw DimensionError("average: empty input list");
    Tensor out = Tensor::zeros(xs[0].shape());
    auto& ov = out.values();
    bool any_grad = false;
    for (const auto& x : xs) {
        check_same_shape(xs[0], x, "average");
        const auto& xv = x.values();
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += xv[i];
        any_grad = any_grad || x.requires_grad();
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (auto& v : ov) v *= inv;
    if (tape != nullptr && any_grad) {
        out.set_requires_grad(true);
        tape->record([xs = xs, out = out, inv]() mutable {
            const auto& go = out.grad();
            for (auto& x : xs) {
                if (!x.requires_grad()) continue;
                auto& gx = x.grad();
                for (std::size_t i = 0; i < go.size(); ++i) gx[i] += inv * go[i];
            }
        });
    }
    return out;
}

// Plain (no-grad) cosine between raw vectors, with the same eps cutoff as
// the differentiable op below.
inline double cosine(const std::vector<double>& u, const std::vector<double>& v,
                     double eps = 1e-12) {
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    if (nu < eps || nv < eps) return 0.0;
    return uv / (nu * nv);
}

// cos(u, v) = u.v / (|u||v|), hard zero when either norm < eps.
// du += g * (v/(|u||v|) - c*u/|u|^2), symmetric for v.
inline Tensor cosine_sim(const Tensor& u, const Tensor& v, double eps = 1e-12,
                         Tape* tape = nullptr) {
    if (eps <= 0.0) throw ParameterError("cosine_sim: eps must be positive");
    if (u.shape().size() != 1 || v.shape().size() != 1 || u.size() != v.size()) {
        throw DimensionError("cosine_sim: length mismatch " + Tensor::shape_str(u.shape()) +
                             " vs " + Tensor::shape_str(v.shape()));
    }
    const auto& uv_ = u.values();
    const auto& vv_ = v.values();
    double uu = 0.0, vv = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < uv_.size(); ++i) {
        uu += uv_[i] * uv_[i];
        vv += vv_[i] * vv_[i];
        dot += uv_[i] * vv_[i];
    }
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    const bool cut = (nu < eps || nv < eps);
    const double c = cut ? 0.0 : dot / (nu * nv);
    Tensor out = Tensor::scalar(c);
    if (!cut && detail::track(tape, u, v)) {
        out.set_requires_grad(true);
        tape->record([u = u, v = v, out = out, nu, nv, c]() mutable {
            const double g = out.grad()[0];
            const auto& uvals = u.values();
            const auto& vvals = v.values();
            if (u.requires_grad()) {
                auto& gu = u.grad();
                for (std::size_t i = 0; i < gu.size(); ++i)
                    gu[i] += g * (vvals[i] / (nu * nv) - c * uvals[i] / (nu * nu));
            }
            if (v.requires_grad()) {
                auto& gv = v.grad();
                for (std::size_t i = 0; i < gv.size(); ++i)
                    gv[i] += g * (uvals[i] / (nu * nv) - c * vvals[i] / (nv * nv));
            }
        });
    }
    return out;
}

// Cross-entropy of softmax(scores / tau) against a target index, computed
// with max subtraction. Entries equal to -inf are treated as masked-out
// classes: they contribute nothing to the partition sum or the gradient.
inline Tensor softmax_nll(const Tensor& scores, std::size_t target, double tau,
                          Tape* tape = nullptr) {
    if (tau <= 0.0) throw ParameterError("softmax_nll: tau must be positive");
    if (scores.shape().size() != 1 || scores.size() == 0) {
        throw DimensionError("softmax_nll: scores must be a non-empty vector, got " +
                             Tensor::shape_str(scores.shape()));
    }
    const std::size_t k = scores.size();
    if (target >= k) {
        throw IndexError("softmax_nll: target " + std::to_string(target) +
                         " out of range for " + std::to_string(k) + " scores");
    }
    const auto& sv = scores.values();
    const double inf = std::numeric_limits<double>::infinity();
    if (sv[target] == -inf) {
        throw StateError("softmax_nll: target class " + std::to_string(target) + " is masked");
    }
    double zmax = -inf;
    for (double s : sv) zmax = std::max(zmax, s / tau);
    double sum = 0.0;
    std::vector<double> p(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (sv[i] == -inf) continue;
        p[i] = std::exp(sv[i] / tau - zmax);
        sum += p[i];
    }
    for (auto& pi : p) pi /= sum;
    const double loss = -(sv[target] / tau - zmax - std::log(sum));
    Tensor out = Tensor::scalar(loss);
    if (detail::track(tape, scores)) {
        out.set_requires_grad(true);
        tape->record([scores = scores, out = out, p, target, tau]() mutable {
            const double g = out.grad()[0];
            auto& gs = scores.grad();
            for (std::size_t i = 0; i < gs.size(); ++i) {
                const double ind = (i == target) ? 1.0 : 0.0;
                gs[i] += g * (p[i] - ind) / tau;
            }
        });
    }
    return out;
}

// Assemble a vector from scalar tensors at given positions; the remaining
// entries hold `fill` and carry no gradient.
inline Tensor scatter_scalars(const std::vector<Tensor>& scalars,
                              const std::vector<std::size_t>& positions,
                              std::size_t length, double fill,
                              Tape* tape = nullptr) {
    if (scalars.size() != positions.size()) {
        throw DimensionError("scatter_scalars: " + std::to_string(scalars.size()) +
                             " scalars for " + std::to_string(positions.size()) + " positions");
    }
    Tensor out = Tensor::from({length}, std::vector<double>(length, fill));
    auto& ov = out.values();
    bool any_grad = false;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (positions[i] >= length) {
            throw IndexError("scatter_scalars: position " + std::to_string(positions[i]) +
                             " out of range " + std::to_string(length));
        }
        ov[positions[i]] = scalars[i].value();
        any_grad = any_grad || scalars[i].requires_grad();
    }
    if (tape != nullptr && any_grad) {
        out.set_requires_grad(true);
        tape->record([scalars = scalars, positions, out = out]() mutable {
            const auto& go = out.grad();
            for (std::size_t i = 0; i < scalars.size(); ++i) {
                if (!scalars[i].requires_grad()) continue;
                scalars[i].grad()[0] += go[positions[i]];
            }
        });
    }
    return out;
}

} // namespace amber
