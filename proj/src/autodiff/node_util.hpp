#pragma once

#include <functional>
#include <memory>
#include <string>

#include "voxsr/autodiff/tensor.hpp"
#include "voxsr/error.hpp"

namespace voxsr::ad::detail {

using BackwardFn = std::function<std::vector<Tensor>(const Tensor&, const std::vector<bool>&)>;

struct FnNode final : Node {
    const char* label;
    bool twice;
    BackwardFn fn;

    FnNode(const char* l, std::vector<Tensor> in, BackwardFn f, bool t)
        : label(l), twice(t), fn(std::move(f)) {
        inputs = std::move(in);
    }
    const char* name() const override { return label; }
    std::vector<Tensor> backward(const Tensor& g, const std::vector<bool>& needs) override { return fn(g, needs); }
    bool twice_differentiable() const override { return twice; }
};

inline std::shared_ptr<Node> node(const char* name, std::vector<Tensor> inputs, BackwardFn fn, bool twice = true) {
    // Ops evaluated under no-grad never need a node.
    if (!grad_enabled()) return nullptr;
    return std::make_shared<FnNode>(name, std::move(inputs), std::move(fn), twice);
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
}

}  // namespace voxsr::ad::detail
