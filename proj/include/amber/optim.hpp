#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amber/error.hpp"
#include "amber/tensor.hpp"

namespace amber {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (lr <= 0.0) throw ParameterError("adam: lr must be positive");
        if (beta1 < 0.0 || beta1 >= 1.0) throw ParameterError("adam: beta1 must be in [0,1)");
        if (beta2 < 0.0 || beta2 >= 1.0) throw ParameterError("adam: beta2 must be in [0,1)");
        if (eps <= 0.0) throw ParameterError("adam: eps must be positive");
    }
};

// A trainable tensor with its Adam accumulators.
struct Parameter {
    Tensor tensor;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
    std::int64_t step_count = 0;
    std::string name;

    Parameter() = default;
    explicit Parameter(Tensor t, std::string n = {}) : tensor(std::move(t)), name(std::move(n)) {
        tensor.set_requires_grad(true);
        adam_m.assign(tensor.size(), 0.0);
        adam_v.assign(tensor.size(), 0.0);
    }

    void ensure_grad() { tensor.grad(); }
};

// One Adam update with bias correction; consumes and clears the gradient.
inline void adam_step(Parameter& p, const AdamConfig& cfg) {
    cfg.validate();
    if (!p.tensor.has_grad()) {
        throw StateError("adam_step: parameter '" + p.name + "' has no gradient");
    }
    p.step_count += 1;
    const double t = static_cast<double>(p.step_count);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto& vals = p.tensor.values();
    const auto& g = p.tensor.grad();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g[i];
        p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double mhat = p.adam_m[i] / bc1;
        const double vhat = p.adam_v[i] / bc2;
        vals[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    p.tensor.clear_grad();
}

// ---------------------------------------------------------------------------
// Gradient checker: compares the tape gradient of a scalar function against
// central finite differences, component by component. The function must be
// a pure evaluation of the current parameter values; it receives a tape when
// the analytic gradient is wanted and nullptr for the probe evaluations.
// ---------------------------------------------------------------------------
inline double grad_check(std::span<Parameter* const> params,
                         const std::function<Tensor(Tape*)>& fn,
                         double h = 1e-5) {
    if (h <= 0.0) throw ParameterError("grad_check: h must be positive");

    Tape tape;
    Tensor loss = fn(&tape);
    if (loss.size() != 1) {
        throw DimensionError("grad_check: function must return a scalar");
    }
    if (!std::isfinite(loss.value())) {
        throw EvalError("grad_check: non-finite function value");
    }
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) {
        analytic.push_back(p->tensor.has_grad() ? p->tensor.grad()
                                                : std::vector<double>(p->tensor.size(), 0.0));
        p->tensor.clear_grad();
    }

    const auto eval = [&fn]() {
        const double v = fn(nullptr).value();
        if (!std::isfinite(v)) throw EvalError("grad_check: non-finite probe value");
        return v;
    };

    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi]->tensor.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + h;
            const double fp = eval();
            vals[i] = saved - h;
            const double fm = eval();
            vals[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
        }
    }
    return max_rel;
}

} // namespace amber
