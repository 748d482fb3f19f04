#include "voxsr/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "node_util.hpp"

namespace voxsr::ad {

using detail::node;
using detail::require_same_shape;

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return record(a.shape(), std::move(out), node("add", {a, b}, [](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{g, g};
                  }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return record(a.shape(), std::move(out), node("sub", {a, b}, [](const Tensor& g, const std::vector<bool>& needs) {
                      return std::vector<Tensor>{g, needs[1] ? scale(g, -1.0) : Tensor()};
                  }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    auto bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return record(a.shape(), std::move(out),
                  node("mul", {a, b}, [a, b](const Tensor& g, const std::vector<bool>& needs) {
                      return std::vector<Tensor>{needs[0] ? mul(g, b) : Tensor(), needs[1] ? mul(g, a) : Tensor()};
                  }));
}

Tensor scale(const Tensor& a, Scalar s) {
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    for (auto& v : out) v *= s;
    return record(a.shape(), std::move(out), node("scale", {a}, [s](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{scale(g, s)};
                  }));
}

Tensor add_scalar(const Tensor& a, Scalar s) {
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    for (auto& v : out) v += s;
    return record(a.shape(), std::move(out), node("add_scalar", {a}, [](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{g};
                  }));
}

Tensor mul_const(const Tensor& a, std::vector<Scalar> mask) {
    if (static_cast<std::int64_t>(mask.size()) != a.numel()) throw ShapeError("mul_const: mask size mismatch");
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    auto shared = std::make_shared<std::vector<Scalar>>(std::move(mask));
    return record(a.shape(), std::move(out),
                  node("mul_const", {a}, [shared](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{mul_const(g, *shared)};
                  }));
}

Tensor sum(const Tensor& a) {
    Scalar acc = 0;
    for (Scalar v : a.values()) acc += v;
    const Shape in_shape = a.shape();
    return record(Shape{}, {acc}, node("sum", {a}, [in_shape](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{expand(g, in_shape)};
                  }));
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<Scalar>(a.numel())); }

Tensor expand(const Tensor& s, const Shape& shape) {
    if (s.numel() != 1) throw ShapeError("expand: source must hold one element");
    const Shape src_shape = s.shape();
    return record(shape, std::vector<Scalar>(static_cast<std::size_t>(numel(shape)), s.values()[0]),
                  node("expand", {s}, [src_shape](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{reshape(sum(g), src_shape)};
                  }));
}

Tensor sum_per_sample(const Tensor& a) {
    if (a.ndim() < 1) throw ShapeError("sum_per_sample: needs a batch axis");
    const std::int64_t n = a.dim(0);
    const std::int64_t per = a.numel() / n;
    std::vector<Scalar> out(static_cast<std::size_t>(n));
    auto av = a.values();
    for (std::int64_t i = 0; i < n; ++i) {
        Scalar acc = 0;
        for (std::int64_t j = 0; j < per; ++j) acc += av[i * per + j];
        out[i] = acc;
    }
    const Shape in_shape = a.shape();
    return record(Shape{n}, std::move(out), node("sum_per_sample", {a}, [in_shape](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{expand_per_sample(g, in_shape)};
                  }));
}

Tensor expand_per_sample(const Tensor& a, const Shape& shape) {
    if (a.ndim() != 1 || shape.empty() || shape[0] != a.dim(0)) throw ShapeError("expand_per_sample: bad shapes");
    const std::int64_t n = a.dim(0);
    const std::int64_t per = numel(shape) / n;
    std::vector<Scalar> out(static_cast<std::size_t>(numel(shape)));
    auto av = a.values();
    for (std::int64_t i = 0; i < n; ++i) std::fill_n(out.begin() + i * per, per, av[i]);
    return record(shape, std::move(out), node("expand_per_sample", {a}, [](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{sum_per_sample(g)};
                  }));
}

Tensor sum_per_channel(const Tensor& a) {
    if (a.ndim() < 2) throw ShapeError("sum_per_channel: needs [N, C, ...]");
    const std::int64_t n = a.dim(0), c = a.dim(1);
    const std::int64_t inner = a.numel() / (n * c);
    std::vector<Scalar> out(static_cast<std::size_t>(c), 0.0);
    auto av = a.values();
    for (std::int64_t ch = 0; ch < c; ++ch) {
        Scalar acc = 0;
        for (std::int64_t b = 0; b < n; ++b) {
            const Scalar* p = av.data() + (b * c + ch) * inner;
            for (std::int64_t i = 0; i < inner; ++i) acc += p[i];
        }
        out[ch] = acc;
    }
    const Shape in_shape = a.shape();
    return record(Shape{c}, std::move(out), node("sum_per_channel", {a}, [in_shape](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{expand_per_channel(g, in_shape)};
                  }));
}

Tensor expand_per_channel(const Tensor& a, const Shape& shape) {
    if (a.ndim() != 1 || shape.size() < 2 || shape[1] != a.dim(0))
        throw ShapeError("expand_per_channel: bad shapes " + to_string(a.shape()) + " -> " + to_string(shape));
    const std::int64_t n = shape[0], c = shape[1];
    const std::int64_t inner = numel(shape) / (n * c);
    std::vector<Scalar> out(static_cast<std::size_t>(numel(shape)));
    auto av = a.values();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < c; ++ch) std::fill_n(out.begin() + (b * c + ch) * inner, inner, av[ch]);
    return record(shape, std::move(out), node("expand_per_channel", {a}, [](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{sum_per_channel(g)};
                  }));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.numel())
        throw ShapeError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
    const Shape in_shape = a.shape();
    return record(std::move(shape), std::vector<Scalar>(a.values().begin(), a.values().end()),
                  node("reshape", {a}, [in_shape](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{reshape(g, in_shape)};
                  }));
}

Tensor permute(const Tensor& a, const std::vector<int>& order) {
    const int nd = a.ndim();
    if (static_cast<int>(order.size()) != nd) throw ShapeError("permute: order rank mismatch");
    std::vector<int> inverse(nd, -1);
    for (int i = 0; i < nd; ++i) {
        if (order[i] < 0 || order[i] >= nd || inverse[order[i]] != -1) throw ShapeError("permute: invalid order");
        inverse[order[i]] = i;
    }
    const Shape& in = a.shape();
    Shape out_shape(nd);
    for (int i = 0; i < nd; ++i) out_shape[i] = in[order[i]];
    std::vector<std::int64_t> in_stride(nd, 1);
    for (int i = nd - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * in[i + 1];
    std::vector<std::int64_t> src_stride(nd);
    for (int i = 0; i < nd; ++i) src_stride[i] = in_stride[order[i]];

    std::vector<Scalar> out(static_cast<std::size_t>(a.numel()));
    auto av = a.values();
    std::vector<std::int64_t> idx(nd, 0);
    std::int64_t src = 0;
    for (std::size_t o = 0; o < out.size(); ++o) {
        out[o] = av[src];
        for (int d = nd - 1; d >= 0; --d) {
            ++idx[d];
            src += src_stride[d];
            if (idx[d] < out_shape[d]) break;
            src -= src_stride[d] * idx[d];
            idx[d] = 0;
        }
    }
    return record(std::move(out_shape), std::move(out),
                  node("permute", {a}, [inverse](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{permute(g, inverse)};
                  }));
}

Tensor narrow_batch(const Tensor& a, std::int64_t begin, std::int64_t end) {
    if (a.ndim() < 1 || begin < 0 || end > a.dim(0) || begin >= end) throw ShapeError("narrow_batch: bad range");
    const std::int64_t per = a.numel() / a.dim(0);
    Shape shape = a.shape();
    shape[0] = end - begin;
    std::vector<Scalar> out(a.values().begin() + begin * per, a.values().begin() + end * per);
    const Shape in_shape = a.shape();
    return record(std::move(shape), std::move(out),
                  node(
                      "narrow_batch", {a},
                      [in_shape, begin, per](const Tensor& g, const std::vector<bool>&) {
                          Tensor full(in_shape, 0.0);
                          std::copy(g.values().begin(), g.values().end(), full.values().begin() + begin * per);
                          return std::vector<Tensor>{full};
                      },
                      false));
}

Tensor concat_batch(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_batch: no inputs");
    Shape shape = parts.front().shape();
    std::int64_t rows = 0;
    std::vector<Scalar> out;
    for (const auto& p : parts) {
        if (p.ndim() != static_cast<int>(shape.size()) ||
            !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1))
            throw ShapeError("concat_batch: trailing shapes differ");
        rows += p.dim(0);
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    shape[0] = rows;
    std::vector<std::int64_t> bounds;
    for (const auto& p : parts) bounds.push_back(p.dim(0));
    return record(std::move(shape), std::move(out),
                  node("concat_batch", parts, [bounds](const Tensor& g, const std::vector<bool>& needs) {
                      std::vector<Tensor> grads(bounds.size());
                      std::int64_t at = 0;
                      for (std::size_t i = 0; i < bounds.size(); ++i) {
                          if (needs[i]) grads[i] = narrow_batch(g, at, at + bounds[i]);
                          at += bounds[i];
                      }
                      return grads;
                  }));
}

Tensor relu(const Tensor& a) {
    std::vector<Scalar> out(a.values().begin(), a.values().end());
    std::vector<Scalar> mask(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        mask[i] = out[i] > 0 ? 1.0 : 0.0;
        out[i] *= mask[i];
    }
    auto shared = std::make_shared<std::vector<Scalar>>(std::move(mask));
    return record(a.shape(), std::move(out), node("relu", {a}, [shared](const Tensor& g, const std::vector<bool>&) {
                      return std::vector<Tensor>{mul_const(g, *shared)};
                  }));
}

Tensor row_norm(const Tensor& a) {
    const std::int64_t n = a.dim(0);
    const std::int64_t per = a.numel() / n;
    std::vector<Scalar> out(static_cast<std::size_t>(n));
    auto av = a.values();
    for (std::int64_t i = 0; i < n; ++i) {
        Scalar acc = 0;
        for (std::int64_t j = 0; j < per; ++j) acc += av[i * per + j] * av[i * per + j];
        out[i] = std::sqrt(acc);
    }
    auto norms = std::make_shared<std::vector<Scalar>>(out);
    return record(Shape{n}, std::move(out),
                  node(
                      "row_norm", {a},
                      [a, norms, n, per](const Tensor& g, const std::vector<bool>&) {
                          Tensor gx(a.shape(), 0.0);
                          auto av = a.values();
                          auto gv = g.values();
                          auto out = gx.values();
                          for (std::int64_t i = 0; i < n; ++i) {
                              const Scalar nrm = (*norms)[i];
                              if (nrm == 0) continue;  // subgradient 0 at the origin
                              const Scalar f = gv[i] / nrm;
                              for (std::int64_t j = 0; j < per; ++j) out[i * per + j] = f * av[i * per + j];
                          }
                          return std::vector<Tensor>{gx};
                      },
                      false));
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats,
                  const BatchNormOptions& opts) {
    if (x.ndim() < 2) throw ShapeError("batch_norm: expected [N, C, ...], got " + to_string(x.shape()));
    const std::int64_t n = x.dim(0), c = x.dim(1);
    const std::int64_t inner = x.numel() / (n * c);
    const std::int64_t count = n * inner;
    if (gamma.numel() != c || beta.numel() != c || stats.running_mean.numel() != c || stats.running_var.numel() != c)
        throw ShapeError("batch_norm: parameter size does not match channel count " + std::to_string(c));

    auto xv = x.values();
    std::vector<Scalar> mu(c), inv_std(c);
    if (opts.training) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            Scalar s = 0;
            for (std::int64_t b = 0; b < n; ++b) {
                const Scalar* p = xv.data() + (b * c + ch) * inner;
                for (std::int64_t i = 0; i < inner; ++i) s += p[i];
            }
            const Scalar m = s / static_cast<Scalar>(count);
            Scalar ss = 0;
            for (std::int64_t b = 0; b < n; ++b) {
                const Scalar* p = xv.data() + (b * c + ch) * inner;
                for (std::int64_t i = 0; i < inner; ++i) ss += (p[i] - m) * (p[i] - m);
            }
            const Scalar var = ss / static_cast<Scalar>(count);
            mu[ch] = m;
            inv_std[ch] = 1.0 / std::sqrt(var + opts.eps);
            const Scalar unbiased = count > 1 ? ss / static_cast<Scalar>(count - 1) : var;
            auto rm = stats.running_mean.values();
            auto rv = stats.running_var.values();
            rm[ch] = (1 - opts.momentum) * rm[ch] + opts.momentum * m;
            rv[ch] = (1 - opts.momentum) * rv[ch] + opts.momentum * unbiased;
        }
    } else {
        auto rm = stats.running_mean.values();
        auto rv = stats.running_var.values();
        for (std::int64_t ch = 0; ch < c; ++ch) {
            mu[ch] = rm[ch];
            inv_std[ch] = 1.0 / std::sqrt(rv[ch] + opts.eps);
        }
    }

    auto xhat = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(x.numel()));
    std::vector<Scalar> out(static_cast<std::size_t>(x.numel()));
    auto gv = gamma.values();
    auto bv = beta.values();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::int64_t off = (b * c + ch) * inner;
            for (std::int64_t i = 0; i < inner; ++i) {
                const Scalar h = (xv[off + i] - mu[ch]) * inv_std[ch];
                (*xhat)[off + i] = h;
                out[off + i] = gv[ch] * h + bv[ch];
            }
        }

    const bool training = opts.training;
    auto istd = std::make_shared<std::vector<Scalar>>(std::move(inv_std));
    return record(
        x.shape(), std::move(out),
        node(
            "batch_norm", {x, gamma, beta},
            [gamma, xhat, istd, n, c, inner, count, training, shape = x.shape()](const Tensor& g,
                                                                                 const std::vector<bool>& needs) {
                auto gv = g.values();
                std::vector<Scalar> dgamma(c, 0.0), dbeta(c, 0.0);
                for (std::int64_t ch = 0; ch < c; ++ch)
                    for (std::int64_t b = 0; b < n; ++b) {
                        const std::int64_t off = (b * c + ch) * inner;
                        for (std::int64_t i = 0; i < inner; ++i) {
                            dbeta[ch] += gv[off + i];
                            dgamma[ch] += gv[off + i] * (*xhat)[off + i];
                        }
                    }
                std::vector<Tensor> grads(3);
                if (needs[0]) {
                    Tensor gx(shape, 0.0);
                    auto gxv = gx.values();
                    auto gam = gamma.values();
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const Scalar k = gam[ch] * (*istd)[ch];
                        const Scalar mean_g = dbeta[ch] / static_cast<Scalar>(count);
                        const Scalar mean_gx = dgamma[ch] / static_cast<Scalar>(count);
                        for (std::int64_t b = 0; b < n; ++b) {
                            const std::int64_t off = (b * c + ch) * inner;
                            for (std::int64_t i = 0; i < inner; ++i) {
                                gxv[off + i] = training ? k * (gv[off + i] - mean_g - (*xhat)[off + i] * mean_gx)
                                                        : k * gv[off + i];
                            }
                        }
                    }
                    grads[0] = gx;
                }
                if (needs[1]) grads[1] = Tensor(Shape{c}, dgamma);
                if (needs[2]) grads[2] = Tensor(Shape{c}, dbeta);
                return grads;
            },
            false));
}

Tensor softmax_channels(const Tensor& x) {
    if (x.ndim() < 2) throw ShapeError("softmax_channels: expected [N, C, ...]");
    const std::int64_t n = x.dim(0), c = x.dim(1);
    const std::int64_t inner = x.numel() / (n * c);
    auto xv = x.values();
    std::vector<Scalar> out(static_cast<std::size_t>(x.numel()));
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t i = 0; i < inner; ++i) {
            const std::int64_t base = b * c * inner + i;
            Scalar mx = xv[base];
            for (std::int64_t ch = 1; ch < c; ++ch) mx = std::max(mx, xv[base + ch * inner]);
            Scalar z = 0;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const Scalar e = std::exp(xv[base + ch * inner] - mx);
                out[base + ch * inner] = e;
                z += e;
            }
            for (std::int64_t ch = 0; ch < c; ++ch) out[base + ch * inner] /= z;
        }
    auto y = std::make_shared<std::vector<Scalar>>(out);
    return record(x.shape(), std::move(out),
                  node(
                      "softmax_channels", {x},
                      [y, n, c, inner, shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
                          Tensor gx(shape, 0.0);
                          auto gv = g.values();
                          auto out = gx.values();
                          for (std::int64_t b = 0; b < n; ++b)
                              for (std::int64_t i = 0; i < inner; ++i) {
                                  const std::int64_t base = b * c * inner + i;
                                  Scalar dot = 0;
                                  for (std::int64_t ch = 0; ch < c; ++ch)
                                      dot += gv[base + ch * inner] * (*y)[base + ch * inner];
                                  for (std::int64_t ch = 0; ch < c; ++ch)
                                      out[base + ch * inner] = (*y)[base + ch * inner] * (gv[base + ch * inner] - dot);
                              }
                          return std::vector<Tensor>{gx};
                      },
                      false));
}

namespace {

struct Spatial {
    std::int64_t planes;  // product of leading (non-spatial) axes
    std::int64_t d, h, w;
};

Spatial spatial_of(const Tensor& x, const char* op) {
    if (x.ndim() < 3) throw ShapeError(std::string(op) + ": needs at least three trailing spatial axes");
    const int nd = x.ndim();
    const std::int64_t d = x.dim(nd - 3), h = x.dim(nd - 2), w = x.dim(nd - 1);
    return {x.numel() / (d * h * w), d, h, w};
}

}  // namespace

Tensor upsample_nearest(const Tensor& x, int f) {
    if (f < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
    const Spatial s = spatial_of(x, "upsample_nearest");
    Shape shape = x.shape();
    const int nd = x.ndim();
    for (int a = nd - 3; a < nd; ++a) shape[a] *= f;
    const std::int64_t od = s.d * f, oh = s.h * f, ow = s.w * f;
    std::vector<Scalar> out(static_cast<std::size_t>(numel(shape)));
    auto xv = x.values();
    for (std::int64_t p = 0; p < s.planes; ++p)
        for (std::int64_t z = 0; z < od; ++z)
            for (std::int64_t y = 0; y < oh; ++y) {
                const Scalar* src = xv.data() + ((p * s.d + z / f) * s.h + y / f) * s.w;
                Scalar* dst = out.data() + ((p * od + z) * oh + y) * ow;
                for (std::int64_t xx = 0; xx < ow; ++xx) dst[xx] = src[xx / f];
            }
    return record(std::move(shape), std::move(out),
                  node(
                      "upsample_nearest", {x},
                      [s, f, in_shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
                          Tensor gx(in_shape, 0.0);
                          auto gv = g.values();
                          auto out = gx.values();
                          const std::int64_t od = s.d * f, oh = s.h * f, ow = s.w * f;
                          for (std::int64_t p = 0; p < s.planes; ++p)
                              for (std::int64_t z = 0; z < od; ++z)
                                  for (std::int64_t y = 0; y < oh; ++y) {
                                      const Scalar* src = gv.data() + ((p * od + z) * oh + y) * ow;
                                      Scalar* dst = out.data() + ((p * s.d + z / f) * s.h + y / f) * s.w;
                                      for (std::int64_t xx = 0; xx < ow; ++xx) dst[xx / f] += src[xx];
                                  }
                          return std::vector<Tensor>{gx};
                      },
                      false));
}

Tensor downsample_nearest(const Tensor& x, int f) {
    if (f < 1) throw ShapeError("downsample_nearest: factor must be >= 1");
    const Spatial s = spatial_of(x, "downsample_nearest");
    if (s.d % f || s.h % f || s.w % f)
        throw ShapeError("downsample_nearest: spatial extents " + to_string(x.shape()) + " not divisible by " +
                         std::to_string(f));
    Shape shape = x.shape();
    const int nd = x.ndim();
    for (int a = nd - 3; a < nd; ++a) shape[a] /= f;
    const std::int64_t od = s.d / f, oh = s.h / f, ow = s.w / f;
    std::vector<Scalar> out(static_cast<std::size_t>(numel(shape)));
    auto xv = x.values();
    for (std::int64_t p = 0; p < s.planes; ++p)
        for (std::int64_t z = 0; z < od; ++z)
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t xx = 0; xx < ow; ++xx)
                    out[((p * od + z) * oh + y) * ow + xx] = xv[((p * s.d + z * f) * s.h + y * f) * s.w + xx * f];
    return record(std::move(shape), std::move(out),
                  node(
                      "downsample_nearest", {x},
                      [s, f, in_shape = x.shape()](const Tensor& g, const std::vector<bool>&) {
                          Tensor gx(in_shape, 0.0);
                          auto gv = g.values();
                          auto out = gx.values();
                          const std::int64_t od = s.d / f, oh = s.h / f, ow = s.w / f;
                          for (std::int64_t p = 0; p < s.planes; ++p)
                              for (std::int64_t z = 0; z < od; ++z)
                                  for (std::int64_t y = 0; y < oh; ++y)
                                      for (std::int64_t xx = 0; xx < ow; ++xx)
                                          out[((p * s.d + z * f) * s.h + y * f) * s.w + xx * f] =
                                              gv[((p * od + z) * oh + y) * ow + xx];
                          return std::vector<Tensor>{gx};
                      },
                      false));
}

Tensor mse(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mse");
    auto av = a.values();
    auto bv = b.values();
    Scalar acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
    const Scalar count = static_cast<Scalar>(av.size());
    return record(Shape{}, {acc / count},
                  node(
                      "mse", {a, b},
                      [a, b, count](const Tensor& g, const std::vector<bool>& needs) {
                          const Scalar k = 2.0 * g.item() / count;
                          auto av = a.values();
                          auto bv = b.values();
                          std::vector<Tensor> grads(2);
                          if (needs[0]) {
                              Tensor ga(a.shape(), 0.0);
                              auto o = ga.values();
                              for (std::size_t i = 0; i < av.size(); ++i) o[i] = k * (av[i] - bv[i]);
                              grads[0] = ga;
                          }
                          if (needs[1]) {
                              Tensor gb(b.shape(), 0.0);
                              auto o = gb.values();
                              for (std::size_t i = 0; i < av.size(); ++i) o[i] = k * (bv[i] - av[i]);
                              grads[1] = gb;
                          }
                          return grads;
                      },
                      false));
}

}  // namespace voxsr::ad
