#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "netsight/error.hpp"
#include "netsight/nn.hpp"

namespace netsight {

enum class OptimizerKind : std::uint8_t { adam, sgd };

/// Plain Adam moments for one flat parameter array.
struct AdamMoments {
    Vec m;
    Vec v;
};

/// One bias-corrected Adam update in place; `t` is the 1-based step number.
inline void adam_update(std::span<double> param, std::span<const double> grad, AdamMoments& mom, std::uint64_t t,
                        double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (mom.m.size() != param.size()) {
        mom.m.assign(param.size(), 0.0);
        mom.v.assign(param.size(), 0.0);
    }
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * g;
        mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * g * g;
        const double mhat = mom.m[i] / c1;
        const double vhat = mom.v[i] / c2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t steps = 0;
    std::vector<AdamMoments> moments;  // one per parameter array, visit order

    [[nodiscard]] static OptimizerState adam(double lr) { OptimizerState s; s.kind = OptimizerKind::adam; s.learning_rate = lr; return s; }
    [[nodiscard]] static OptimizerState sgd(double lr) { OptimizerState s; s.kind = OptimizerKind::sgd; s.learning_rate = lr; return s; }
};

/// Applies one update from `tape`. Every gradient is checked before any
/// parameter moves, so a non-finite gradient leaves the model untouched.
inline void step(AutoencoderModel& model, const GradientTape& tape, OptimizerState& opt) {
    if (!(opt.learning_rate >= 0.0) || !std::isfinite(opt.learning_rate)) {
        throw ConfigError("learning rate must be finite and non-negative");
    }
    visit_parameters(model, tape, [](const std::string& path, std::span<double>, std::span<const double> g) {
        if (!all_finite(g)) throw NumericalError("non-finite gradient in " + path);
    });
    const std::uint64_t t = ++opt.steps;
    std::size_t k = 0;
    visit_parameters(model, tape, [&](const std::string&, std::span<double> p, std::span<const double> g) {
        if (opt.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < p.size(); ++i) p[i] -= opt.learning_rate * g[i];
        } else {
            if (opt.moments.size() <= k) opt.moments.resize(k + 1);
            adam_update(p, g, opt.moments[k], t, opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon);
        }
        ++k;
    });
}

}  // namespace netsight
