#pragma once

#include <span>
#include <string>
#include <vector>

#include "voxsr/autodiff/tensor.hpp"

namespace voxsr::ad {

struct AdamConfig {
    Scalar lr = 1e-4;
    Scalar beta1 = 0.5;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
};

struct AdamMoments {
    std::vector<Scalar> m;
    std::vector<Scalar> v;
};

/// One bias-corrected Adam update at step t (1-based). Throws NumericError on
/// a non-finite gradient before touching anything.
void adam_step(std::span<Scalar> params, std::span<const Scalar> grads, AdamMoments& moments, std::int64_t t,
               const AdamConfig& cfg);

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Adam over a fixed list of leaf parameters, stepping from their .grad().
class Adam {
public:
    Adam(std::vector<NamedTensor> params, AdamConfig cfg);

    void step();
    void zero_grad();

    std::int64_t step_count() const { return t_; }
    void set_step_count(std::int64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }
    const std::vector<NamedTensor>& params() const { return params_; }
    std::vector<AdamMoments>& moments() { return moments_; }
    const std::vector<AdamMoments>& moments() const { return moments_; }

private:
    std::vector<NamedTensor> params_;
    std::vector<AdamMoments> moments_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace voxsr::ad
