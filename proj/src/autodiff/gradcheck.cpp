#include "voxsr/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "voxsr/error.hpp"

namespace voxsr::ad {

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, Scalar h) {
    if (!x.is_leaf()) throw std::invalid_argument("grad_check: x must be a leaf tensor");
    const bool prev = x.requires_grad();
    x.set_requires_grad(true);
    Tensor y = f(x);
    if (y.numel() != 1) throw ShapeError("grad_check: f must be scalar-valued");
    const Tensor analytic = grad(y, {x})[0];

    GradCheckResult res;
    auto xv = x.values();
    {
        // f may differentiate internally (gradient penalties), so the probes run with grad mode on.
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            const Scalar orig = xv[i];
            xv[i] = orig + h;
            const Scalar fp = f(x).item();
            xv[i] = orig - h;
            const Scalar fm = f(x).item();
            xv[i] = orig;
            const Scalar numeric = (fp - fm) / (2 * h);
            const Scalar a = analytic.values()[i];
            const Scalar err = std::abs(a - numeric) / std::max({Scalar{1}, std::abs(a), std::abs(numeric)});
            if (err > res.max_rel_error || res.worst_index < 0) {
                res.max_rel_error = err;
                res.worst_index = i;
                res.analytic = a;
                res.numeric = numeric;
            }
        }
    }
    x.set_requires_grad(prev);
    return res;
}

}  // namespace voxsr::ad
