#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace voxsr::ad {

using Scalar = double;
using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;

struct TensorImpl {
    Shape shape;
    std::vector<Scalar> values;
    bool requires_grad = false;
    std::shared_ptr<Node> grad_fn;
    std::shared_ptr<TensorImpl> grad;
};

/// Reference-counted handle to an array that may sit in a differentiation graph.
/// Copies share storage; use clone() for a deep copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Scalar fill = 0);
    Tensor(Shape shape, std::vector<Scalar> values);
    static Tensor scalar(Scalar v) { return Tensor(Shape{}, std::vector<Scalar>{v}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::int64_t dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(impl_->values.size()); }

    std::span<Scalar> values() { return impl_->values; }
    std::span<const Scalar> values() const { return impl_->values; }
    std::vector<Scalar>& storage() { return impl_->values; }
    Scalar item() const;

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    /// Marks a leaf as a differentiation target. Non-leaves cannot be toggled.
    Tensor& set_requires_grad(bool on = true);
    bool is_leaf() const { return !impl_->grad_fn; }
    const Node* grad_fn() const { return impl_->grad_fn.get(); }

    /// Accumulated gradient of a leaf; undefined until a backward pass reaches it.
    Tensor grad() const;
    void zero_grad();

    Tensor detach() const;
    Tensor clone() const;

    TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

/// Backward function of one recorded operation.
struct Node {
    std::vector<Tensor> inputs;

    virtual ~Node() = default;
    virtual const char* name() const = 0;
    /// Gradients w.r.t. each input given the output gradient. Entries for which
    /// needs[i] is false may be left undefined.
    virtual std::vector<Tensor> backward(const Tensor& grad_out, const std::vector<bool>& needs) = 0;
    /// False for fused kernels whose backward is computed outside the graph.
    virtual bool twice_differentiable() const { return true; }
};

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class GradModeGuard {
public:
    explicit GradModeGuard(bool enabled);
    ~GradModeGuard();
    GradModeGuard(const GradModeGuard&) = delete;
    GradModeGuard& operator=(const GradModeGuard&) = delete;

private:
    bool prev_;
};

/// Wraps freshly computed values as an op result, recording `fn` when grad mode
/// is on and any of fn->inputs requires grad.
Tensor record(Shape shape, std::vector<Scalar> values, std::shared_ptr<Node> fn);

/// Reverse-mode gradients of `output` w.r.t. `inputs`. With create_graph the
/// returned gradients are themselves differentiable.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         const Tensor& grad_output = {}, bool create_graph = false);

/// Accumulates d(loss)/d(leaf) into leaf.grad() for `leaves` (all reachable
/// grad-requiring leaves when empty).
void backward(const Tensor& loss, const std::vector<Tensor>& leaves = {});

}  // namespace voxsr::ad
