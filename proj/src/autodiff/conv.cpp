#include <algorithm>
#include <sstream>

#include "node_util.hpp"
#include "voxsr/autodiff/ops.hpp"
#include "voxsr/parallel.hpp"

namespace voxsr::ad {

using detail::node;

namespace {

struct Dims5 {
    std::int64_t n, c, d, h, w;
    std::int64_t spatial() const { return d * h * w; }
};

Dims5 dims5(const Tensor& t, const char* what) {
    if (t.ndim() != 5) {
        std::ostringstream os;
        os << what << ": expected a 5-D tensor, got " << to_string(t.shape());
        throw ShapeError(os.str());
    }
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), t.dim(4)};
}

// Output indices o in [0, out) with 0 <= o*s - p + k < in.
inline void valid_range(std::int64_t in, std::int64_t out, int s, int p, std::int64_t k, std::int64_t& lo,
                        std::int64_t& hi) {
    const std::int64_t a = p - k;
    lo = a <= 0 ? 0 : (a + s - 1) / s;
    const std::int64_t b = in - 1 + p - k;
    hi = b < 0 ? -1 : std::min(out - 1, b / s);
}

void conv_forward_raw(const Scalar* x, const Dims5& xs, const Scalar* w, const Dims5& ws, const ConvGeom& g,
                      Scalar* y, const Dims5& ys) {
    const std::int64_t osp = ys.spatial();
    parallel_for(ys.n * ys.c, [&](std::int64_t job) {
        const std::int64_t b = job / ys.c, co = job % ys.c;
        Scalar* out = y + job * osp;
        std::fill(out, out + osp, 0.0);
        for (std::int64_t ci = 0; ci < xs.c; ++ci) {
            const Scalar* in = x + (b * xs.c + ci) * xs.spatial();
            const Scalar* wk = w + (co * ws.c + ci) * ws.spatial();
            for (std::int64_t kd = 0; kd < ws.d; ++kd) {
                std::int64_t d0, d1;
                valid_range(xs.d, ys.d, g.stride[0], g.pad[0], kd, d0, d1);
                for (std::int64_t kh = 0; kh < ws.h; ++kh) {
                    std::int64_t h0, h1;
                    valid_range(xs.h, ys.h, g.stride[1], g.pad[1], kh, h0, h1);
                    for (std::int64_t kw = 0; kw < ws.w; ++kw) {
                        std::int64_t w0, w1;
                        valid_range(xs.w, ys.w, g.stride[2], g.pad[2], kw, w0, w1);
                        const Scalar wv = wk[(kd * ws.h + kh) * ws.w + kw];
                        if (wv == 0.0) continue;
                        for (std::int64_t od = d0; od <= d1; ++od) {
                            const std::int64_t id = od * g.stride[0] - g.pad[0] + kd;
                            for (std::int64_t oh = h0; oh <= h1; ++oh) {
                                const std::int64_t ih = oh * g.stride[1] - g.pad[1] + kh;
                                const Scalar* src = in + (id * xs.h + ih) * xs.w - g.pad[2] + kw;
                                Scalar* dst = out + (od * ys.h + oh) * ys.w;
                                const int sw = g.stride[2];
                                if (sw == 1) {
                                    for (std::int64_t ow = w0; ow <= w1; ++ow) dst[ow] += wv * src[ow];
                                } else {
                                    for (std::int64_t ow = w0; ow <= w1; ++ow) dst[ow] += wv * src[ow * sw];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

void conv_input_grad_raw(const Scalar* gy, const Dims5& ys, const Scalar* w, const Dims5& ws, const ConvGeom& g,
                         Scalar* gx, const Dims5& xs) {
    const std::int64_t isp = xs.spatial();
    parallel_for(xs.n * xs.c, [&](std::int64_t job) {
        const std::int64_t b = job / xs.c, ci = job % xs.c;
        Scalar* out = gx + job * isp;
        std::fill(out, out + isp, 0.0);
        for (std::int64_t co = 0; co < ys.c; ++co) {
            const Scalar* src_plane = gy + (b * ys.c + co) * ys.spatial();
            const Scalar* wk = w + (co * ws.c + ci) * ws.spatial();
            for (std::int64_t kd = 0; kd < ws.d; ++kd) {
                std::int64_t d0, d1;
                valid_range(xs.d, ys.d, g.stride[0], g.pad[0], kd, d0, d1);
                for (std::int64_t kh = 0; kh < ws.h; ++kh) {
                    std::int64_t h0, h1;
                    valid_range(xs.h, ys.h, g.stride[1], g.pad[1], kh, h0, h1);
                    for (std::int64_t kw = 0; kw < ws.w; ++kw) {
                        std::int64_t w0, w1;
                        valid_range(xs.w, ys.w, g.stride[2], g.pad[2], kw, w0, w1);
                        const Scalar wv = wk[(kd * ws.h + kh) * ws.w + kw];
                        if (wv == 0.0) continue;
                        for (std::int64_t od = d0; od <= d1; ++od) {
                            const std::int64_t id = od * g.stride[0] - g.pad[0] + kd;
                            for (std::int64_t oh = h0; oh <= h1; ++oh) {
                                const std::int64_t ih = oh * g.stride[1] - g.pad[1] + kh;
                                Scalar* dst = out + (id * xs.h + ih) * xs.w - g.pad[2] + kw;
                                const Scalar* src = src_plane + (od * ys.h + oh) * ys.w;
                                const int sw = g.stride[2];
                                if (sw == 1) {
                                    for (std::int64_t ow = w0; ow <= w1; ++ow) dst[ow] += wv * src[ow];
                                } else {
                                    for (std::int64_t ow = w0; ow <= w1; ++ow) dst[ow * sw] += wv * src[ow];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

void conv_weight_grad_raw(const Scalar* x, const Dims5& xs, const Scalar* gy, const Dims5& ys, const ConvGeom& g,
                          Scalar* gw, const Dims5& ws) {
    parallel_for(ws.n * ws.c, [&](std::int64_t job) {
        const std::int64_t co = job / ws.c, ci = job % ws.c;
        Scalar* out = gw + job * ws.spatial();
        for (std::int64_t kd = 0; kd < ws.d; ++kd) {
            std::int64_t d0, d1;
            valid_range(xs.d, ys.d, g.stride[0], g.pad[0], kd, d0, d1);
            for (std::int64_t kh = 0; kh < ws.h; ++kh) {
                std::int64_t h0, h1;
                valid_range(xs.h, ys.h, g.stride[1], g.pad[1], kh, h0, h1);
                for (std::int64_t kw = 0; kw < ws.w; ++kw) {
                    std::int64_t w0, w1;
                    valid_range(xs.w, ys.w, g.stride[2], g.pad[2], kw, w0, w1);
                    Scalar acc = 0;
                    for (std::int64_t b = 0; b < xs.n; ++b) {
                        const Scalar* in = x + (b * xs.c + ci) * xs.spatial();
                        const Scalar* gp = gy + (b * ys.c + co) * ys.spatial();
                        for (std::int64_t od = d0; od <= d1; ++od) {
                            const std::int64_t id = od * g.stride[0] - g.pad[0] + kd;
                            for (std::int64_t oh = h0; oh <= h1; ++oh) {
                                const std::int64_t ih = oh * g.stride[1] - g.pad[1] + kh;
                                const Scalar* src = in + (id * xs.h + ih) * xs.w - g.pad[2] + kw;
                                const Scalar* gr = gp + (od * ys.h + oh) * ys.w;
                                const int sw = g.stride[2];
                                for (std::int64_t ow = w0; ow <= w1; ++ow) acc += src[ow * sw] * gr[ow];
                            }
                        }
                    }
                    out[(kd * ws.h + kh) * ws.w + kw] = acc;
                }
            }
        }
    });
}

std::int64_t out_extent(std::int64_t in, std::int64_t k, int s, int p, const char* axis) {
    const std::int64_t span = in + 2 * p - k;
    if (s < 1 || p < 0 || span < 0 || span % s != 0) {
        std::ostringstream os;
        os << "conv: extent " << in << " on axis " << axis << " incompatible with kernel " << k << ", stride " << s
           << ", padding " << p;
        throw ShapeError(os.str());
    }
    return span / s + 1;
}

}  // namespace

std::array<std::int64_t, 3> conv_output_extent(const std::array<std::int64_t, 3>& in,
                                               const std::array<std::int64_t, 3>& kernel, const ConvGeom& geom) {
    return {out_extent(in[0], kernel[0], geom.stride[0], geom.pad[0], "d"),
            out_extent(in[1], kernel[1], geom.stride[1], geom.pad[1], "h"),
            out_extent(in[2], kernel[2], geom.stride[2], geom.pad[2], "w")};
}

std::array<std::int64_t, 3> conv_transpose_output_extent(const std::array<std::int64_t, 3>& in,
                                                         const std::array<std::int64_t, 3>& kernel,
                                                         const ConvGeom& geom) {
    std::array<std::int64_t, 3> out{};
    for (int a = 0; a < 3; ++a) {
        out[a] = (in[a] - 1) * geom.stride[a] - 2 * geom.pad[a] + kernel[a];
        if (out[a] <= 0) throw ShapeError("conv_transpose3d: non-positive output extent");
    }
    return out;
}

Tensor conv3d(const Tensor& x, const Tensor& w, const ConvGeom& geom) {
    const Dims5 xs = dims5(x, "conv3d input");
    const Dims5 ws = dims5(w, "conv3d weight");
    if (ws.c != xs.c) {
        std::ostringstream os;
        os << "conv3d: weight expects " << ws.c << " input channels, input " << to_string(x.shape()) << " has " << xs.c;
        throw ShapeError(os.str());
    }
    const auto o = conv_output_extent({xs.d, xs.h, xs.w}, {ws.d, ws.h, ws.w}, geom);
    const Dims5 ys{xs.n, ws.n, o[0], o[1], o[2]};
    std::vector<Scalar> out(static_cast<std::size_t>(ys.n * ys.c * ys.spatial()));
    conv_forward_raw(x.values().data(), xs, w.values().data(), ws, geom, out.data(), ys);
    return record(Shape{ys.n, ys.c, ys.d, ys.h, ys.w}, std::move(out),
                  node("conv3d", {x, w}, [x, w, geom](const Tensor& g, const std::vector<bool>& needs) {
                      std::vector<Tensor> grads(2);
                      if (needs[0]) {
                          grads[0] = conv3d_input_grad(g, w, geom);
                          if (grads[0].shape() != x.shape())
                              throw ShapeError("conv3d: input gradient shape does not round-trip");
                      }
                      if (needs[1]) grads[1] = conv3d_weight_grad(x, g, w.shape(), geom);
                      return grads;
                  }));
}

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvGeom& geom) {
    Tensor y = conv3d(x, w, geom);
    if (!bias.defined()) return y;
    if (bias.ndim() != 1 || bias.dim(0) != w.dim(0))
        throw ShapeError("conv3d: bias shape " + to_string(bias.shape()) + " does not match " +
                         std::to_string(w.dim(0)) + " output channels");
    return add(y, expand_per_channel(bias, y.shape()));
}

Tensor conv3d_input_grad(const Tensor& gy, const Tensor& w, const ConvGeom& geom) {
    const Dims5 ys = dims5(gy, "conv3d_input_grad gradient");
    const Dims5 ws = dims5(w, "conv3d_input_grad weight");
    if (ws.n != ys.c) {
        std::ostringstream os;
        os << "conv3d_input_grad: weight " << to_string(w.shape()) << " expects " << ws.n << " channels, got "
           << ys.c;
        throw ShapeError(os.str());
    }
    const auto ext = conv_transpose_output_extent({ys.d, ys.h, ys.w}, {ws.d, ws.h, ws.w}, geom);
    const Dims5 xs{ys.n, ws.c, ext[0], ext[1], ext[2]};
    std::vector<Scalar> out(static_cast<std::size_t>(xs.n * xs.c * xs.spatial()));
    conv_input_grad_raw(gy.values().data(), ys, w.values().data(), ws, geom, out.data(), xs);
    return record(Shape{xs.n, xs.c, xs.d, xs.h, xs.w}, std::move(out),
                  node("conv3d_input_grad", {gy, w}, [gy, w, geom](const Tensor& g, const std::vector<bool>& needs) {
                      std::vector<Tensor> grads(2);
                      if (needs[0]) grads[0] = conv3d(g, w, geom);
                      if (needs[1]) grads[1] = conv3d_weight_grad(g, gy, w.shape(), geom);
                      return grads;
                  }));
}

Tensor conv3d_weight_grad(const Tensor& x, const Tensor& gy, const Shape& weight_shape, const ConvGeom& geom) {
    const Dims5 xs = dims5(x, "conv3d_weight_grad input");
    const Dims5 ys = dims5(gy, "conv3d_weight_grad gradient");
    if (weight_shape.size() != 5) throw ShapeError("conv3d_weight_grad: weight shape must be 5-D");
    const Dims5 ws{weight_shape[0], weight_shape[1], weight_shape[2], weight_shape[3], weight_shape[4]};
    if (ws.n != ys.c || ws.c != xs.c || xs.n != ys.n) throw ShapeError("conv3d_weight_grad: inconsistent shapes");
    std::vector<Scalar> out(static_cast<std::size_t>(numel(weight_shape)));
    conv_weight_grad_raw(x.values().data(), xs, gy.values().data(), ys, geom, out.data(), ws);
    return record(weight_shape, std::move(out),
                  node("conv3d_weight_grad", {x, gy}, [x, gy, geom](const Tensor& g, const std::vector<bool>& needs) {
                      std::vector<Tensor> grads(2);
                      if (needs[0]) grads[0] = conv3d_input_grad(gy, g, geom);
                      if (needs[1]) grads[1] = conv3d(x, g, geom);
                      return grads;
                  }));
}

Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvGeom& geom) {
    Tensor y = conv3d_input_grad(x, w, geom);
    if (!bias.defined()) return y;
    if (bias.ndim() != 1 || bias.dim(0) != w.dim(1))
        throw ShapeError("conv_transpose3d: bias shape " + to_string(bias.shape()) + " does not match " +
                         std::to_string(w.dim(1)) + " output channels");
    return add(y, expand_per_channel(bias, y.shape()));
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
    if (x.ndim() != 4) throw ShapeError("conv2d: expected [N, C, H, W], got " + to_string(x.shape()));
    if (w.ndim() != 4) throw ShapeError("conv2d: expected weight [Cout, Cin, kh, kw], got " + to_string(w.shape()));
    const ConvGeom geom{{1, stride, stride}, {0, pad, pad}};
    Tensor x5 = reshape(x, {x.dim(0), x.dim(1), 1, x.dim(2), x.dim(3)});
    Tensor w5 = reshape(w, {w.dim(0), w.dim(1), 1, w.dim(2), w.dim(3)});
    Tensor y = conv3d(x5, w5, bias, geom);
    return reshape(y, {y.dim(0), y.dim(1), y.dim(3), y.dim(4)});
}

}  // namespace voxsr::ad
