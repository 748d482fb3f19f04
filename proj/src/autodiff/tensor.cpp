#include "voxsr/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "voxsr/autodiff/ops.hpp"
#include "voxsr/error.hpp"

namespace voxsr::ad {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, Scalar fill) : impl_(std::make_shared<TensorImpl>()) {
    for (auto e : shape)
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + ad::to_string(shape));
    impl_->values.assign(static_cast<std::size_t>(ad::numel(shape)), fill);
    impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Scalar> values) : impl_(std::make_shared<TensorImpl>()) {
    for (auto e : shape)
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + ad::to_string(shape));
    if (static_cast<std::int64_t>(values.size()) != ad::numel(shape))
        throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                         ad::to_string(shape));
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
}

Scalar Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + ad::to_string(shape()));
    return impl_->values[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (!is_leaf()) throw std::logic_error("requires_grad can only be set on leaf tensors");
    impl_->requires_grad = on;
    return *this;
}

Tensor Tensor::grad() const {
    return impl_->grad ? Tensor(impl_->grad) : Tensor();
}

void Tensor::zero_grad() { impl_->grad.reset(); }

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->values); }

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->values); }

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

GradModeGuard::GradModeGuard(bool enabled) : prev_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = prev_; }

Tensor record(Shape shape, std::vector<Scalar> values, std::shared_ptr<Node> fn) {
    Tensor out(std::move(shape), std::move(values));
    if (!g_grad_enabled || !fn) return out;
    const bool any = std::any_of(fn->inputs.begin(), fn->inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (!any) return out;
    out.impl()->requires_grad = true;
    out.impl()->grad_fn = std::move(fn);
    return out;
}

namespace {

// Post-order over the grad-requiring subgraph: parents precede children.
std::vector<TensorImpl*> topo_order(TensorImpl* root) {
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [impl, next] = stack.back();
        Node* fn = impl->grad_fn.get();
        if (fn && next < fn->inputs.size()) {
            TensorImpl* parent = fn->inputs[next++].impl();
            if (parent && parent->requires_grad && visited.insert(parent).second)
                stack.emplace_back(parent, 0);
            continue;
        }
        order.push_back(impl);
        stack.pop_back();
    }
    return order;
}

void check_finite(const Tensor& g, const char* op) {
    for (Scalar v : g.values())
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite gradient produced by ") + op);
}

std::unordered_map<TensorImpl*, Tensor> run_backward(const Tensor& output,
                                                     const std::unordered_set<TensorImpl*>& targets,
                                                     const Tensor& grad_output, bool create_graph) {
    std::unordered_map<TensorImpl*, Tensor> grads;
    if (!output.requires_grad()) return grads;
    const auto order = topo_order(output.impl());

    std::unordered_map<TensorImpl*, bool> relevant;
    for (TensorImpl* impl : order) {
        bool r = targets.count(impl) > 0;
        if (!r && impl->grad_fn)
            for (const auto& in : impl->grad_fn->inputs)
                if (in.requires_grad() && relevant[in.impl()]) {
                    r = true;
                    break;
                }
        relevant[impl] = r;
    }

    Tensor seed = grad_output.defined() ? grad_output : Tensor(output.shape(), 1.0);
    if (seed.shape() != output.shape())
        throw ShapeError("grad_output shape " + to_string(seed.shape()) + " does not match output " +
                         to_string(output.shape()));
    grads[output.impl()] = seed;

    GradModeGuard mode(create_graph);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* impl = *it;
        Node* fn = impl->grad_fn.get();
        if (!fn || !relevant[impl]) continue;
        auto found = grads.find(impl);
        if (found == grads.end()) continue;
        Tensor g = found->second;
        if (!targets.count(impl)) grads.erase(found);

        std::vector<bool> needs(fn->inputs.size());
        bool any = false;
        for (std::size_t i = 0; i < needs.size(); ++i) {
            const Tensor& in = fn->inputs[i];
            needs[i] = in.requires_grad() && relevant[in.impl()];
            any = any || needs[i];
        }
        if (!any) continue;
        if (create_graph && !fn->twice_differentiable())
            throw std::logic_error(std::string("operation ") + fn->name() +
                                   " does not support higher-order gradients");
        auto in_grads = fn->backward(g, needs);
        for (std::size_t i = 0; i < needs.size(); ++i) {
            if (!needs[i]) continue;
            Tensor& ig = in_grads.at(i);
            if (!ig.defined()) continue;
            check_finite(ig, fn->name());
            TensorImpl* parent = fn->inputs[i].impl();
            auto slot = grads.find(parent);
            if (slot == grads.end())
                grads.emplace(parent, ig);
            else
                slot->second = add(slot->second, ig);
        }
    }
    return grads;
}

}  // namespace

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs, const Tensor& grad_output,
                         bool create_graph) {
    std::unordered_set<TensorImpl*> targets;
    for (const auto& t : inputs) targets.insert(t.impl());
    auto grads = run_backward(output, targets, grad_output, create_graph);
    std::vector<Tensor> out;
    out.reserve(inputs.size());
    for (const auto& t : inputs) {
        auto it = grads.find(t.impl());
        out.push_back(it != grads.end() ? it->second : Tensor(t.shape(), 0.0));
    }
    return out;
}

void backward(const Tensor& loss, const std::vector<Tensor>& leaves) {
    std::unordered_set<TensorImpl*> targets;
    if (leaves.empty()) {
        if (loss.requires_grad())
            for (TensorImpl* impl : topo_order(loss.impl()))
                if (!impl->grad_fn && impl->requires_grad) targets.insert(impl);
    } else {
        for (const auto& t : leaves) targets.insert(t.impl());
    }
    auto grads = run_backward(loss, targets, {}, false);
    for (TensorImpl* impl : targets) {
        auto it = grads.find(impl);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        if (!impl->grad) {
            impl->grad = std::make_shared<TensorImpl>();
            impl->grad->shape = impl->shape;
            impl->grad->values = g.values().size() ? std::vector<Scalar>(g.values().begin(), g.values().end())
                                                   : std::vector<Scalar>{};
        } else {
            auto dst = impl->grad->values.data();
            auto src = g.values();
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
        }
    }
}

}  // namespace voxsr::ad
