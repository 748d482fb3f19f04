#include "voxsr/autodiff/optim.hpp"

#include <cmath>

#include "voxsr/error.hpp"

namespace voxsr::ad {

void adam_step(std::span<Scalar> params, std::span<const Scalar> grads, AdamMoments& moments, std::int64_t t,
               const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw ShapeError("adam_step: gradient size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw NumericError("adam_step: non-finite gradient at element " + std::to_string(i));
    if (moments.m.size() != params.size()) {
        moments.m.assign(params.size(), 0.0);
        moments.v.assign(params.size(), 0.0);
    }
    const Scalar c1 = 1.0 - std::pow(cfg.beta1, static_cast<Scalar>(t));
    const Scalar c2 = 1.0 - std::pow(cfg.beta2, static_cast<Scalar>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Scalar g = grads[i];
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
        const Scalar mhat = moments.m[i] / c1;
        const Scalar vhat = moments.v[i] / c2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

Adam::Adam(std::vector<NamedTensor> params, AdamConfig cfg)
    : params_(std::move(params)), moments_(params_.size()), cfg_(cfg) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        moments_[i].m.assign(static_cast<std::size_t>(params_[i].tensor.numel()), 0.0);
        moments_[i].v.assign(static_cast<std::size_t>(params_[i].tensor.numel()), 0.0);
    }
}

void Adam::step() {
    // Validate every gradient before mutating any parameter.
    for (const auto& p : params_) {
        Tensor g = p.tensor.grad();
        if (!g.defined()) continue;
        for (Scalar v : g.values())
            if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter " + p.name);
    }
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor g = params_[i].tensor.grad();
        std::vector<Scalar> zeros;
        std::span<const Scalar> gv;
        if (g.defined()) {
            gv = g.values();
        } else {
            zeros.assign(static_cast<std::size_t>(params_[i].tensor.numel()), 0.0);
            gv = zeros;
        }
        adam_step(params_[i].tensor.values(), gv, moments_[i], t_, cfg_);
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace voxsr::ad
