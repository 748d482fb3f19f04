#pragma once

#include <functional>

#include "voxsr/autodiff/tensor.hpp"

namespace voxsr::ad {

struct GradCheckResult {
    Scalar max_rel_error = 0;
    std::int64_t worst_index = -1;
    Scalar analytic = 0;
    Scalar numeric = 0;
};

/// Compares reverse-mode d f / d x against central differences with step h.
/// Per-element error is |a - n| / max(1, |a|, |n|); the worst element is reported.
/// `x` must be a leaf; its values are perturbed in place and restored.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, Scalar h = 1e-4);

}  // namespace voxsr::ad
