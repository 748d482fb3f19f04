#pragma once

#include <array>

#include "voxsr/autodiff/tensor.hpp"

namespace voxsr::ad {

// Elementwise, same-shape operands.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor add_scalar(const Tensor& a, Scalar s);
/// a * mask where mask is a constant (not differentiated).
Tensor mul_const(const Tensor& a, std::vector<Scalar> mask);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Scalar broadcast to `shape`.
Tensor expand(const Tensor& scalar, const Shape& shape);
/// [N, ...] → [N] per-sample sum, and its adjoint.
Tensor sum_per_sample(const Tensor& a);
Tensor expand_per_sample(const Tensor& a, const Shape& shape);
/// [N, C, ...] → [C] sum over all but the channel axis, and its adjoint.
Tensor sum_per_channel(const Tensor& a);
Tensor expand_per_channel(const Tensor& a, const Shape& shape);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<int>& order);
/// Rows [begin, end) along axis 0.
Tensor narrow_batch(const Tensor& a, std::int64_t begin, std::int64_t end);
Tensor concat_batch(const std::vector<Tensor>& parts);

Tensor relu(const Tensor& a);

/// Per-sample Euclidean norm: [N, ...] → [N]. First-order only.
Tensor row_norm(const Tensor& a);

struct ConvGeom {
    std::array<int, 3> stride{1, 1, 1};
    std::array<int, 3> pad{0, 0, 0};

    static ConvGeom uniform(int stride, int pad) { return {{stride, stride, stride}, {pad, pad, pad}}; }
};

/// Cross-correlation. x: [N, Cin, D, H, W], w: [Cout, Cin, kd, kh, kw] → [N, Cout, D', H', W'].
Tensor conv3d(const Tensor& x, const Tensor& w, const ConvGeom& geom);
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvGeom& geom);
/// Input gradient of conv3d (equivalently, transposed convolution with a
/// [Cin_T, Cout_T, k...] weight). gy: [N, Cout, D', H', W'] → [N, Cin, D, H, W].
Tensor conv3d_input_grad(const Tensor& gy, const Tensor& w, const ConvGeom& geom);
/// Weight gradient of conv3d given its input and output gradient.
Tensor conv3d_weight_grad(const Tensor& x, const Tensor& gy, const Shape& weight_shape, const ConvGeom& geom);

/// x: [N, Cin, D, H, W], w: [Cin, Cout, k, k, k]; output extent (in-1)*s - 2p + k.
Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvGeom& geom);

/// x: [N, Cin, H, W], w: [Cout, Cin, kh, kw].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

/// Transposed-convolution output extents: (in - 1) * s - 2p + k.
std::array<std::int64_t, 3> conv_transpose_output_extent(const std::array<std::int64_t, 3>& in,
                                                         const std::array<std::int64_t, 3>& kernel,
                                                         const ConvGeom& geom);

std::array<std::int64_t, 3> conv_output_extent(const std::array<std::int64_t, 3>& in,
                                               const std::array<std::int64_t, 3>& kernel, const ConvGeom& geom);

/// Running statistics owned by a batch-norm layer (not trainable).
struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
};

struct BatchNormOptions {
    bool training = true;
    Scalar momentum = 0.1;
    Scalar eps = 1e-5;
};

/// Per-channel normalisation over all axes but 1, then gamma * x̂ + beta.
/// Training mode uses batch statistics and updates `stats`; eval uses `stats`.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  const BatchNormOptions& opts);

/// Softmax over axis 1.
Tensor softmax_channels(const Tensor& x);
/// Nearest-neighbour upsampling of the trailing three axes by f.
Tensor upsample_nearest(const Tensor& x, int factor);
/// Corner-anchored subsampling of the trailing three axes by f.
Tensor downsample_nearest(const Tensor& x, int factor);
/// Mean of squared differences over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace voxsr::ad
