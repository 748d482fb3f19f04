#include <doctest.h>

#include <cmath>
#include <numeric>

#include "voxsr/autodiff/gradcheck.hpp"
#include "voxsr/autodiff/ops.hpp"
#include "voxsr/autodiff/optim.hpp"
#include "voxsr/error.hpp"
#include "voxsr/rng.hpp"

using namespace voxsr;
using namespace voxsr::ad;

namespace {

Tensor randn(Shape shape, Rng& rng, Scalar scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = scale * rng.normal();
    return t;
}

Scalar dot(const Tensor& a, const Tensor& b) {
    Scalar s = 0;
    for (std::int64_t i = 0; i < a.numel(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

}  // namespace

TEST_CASE("engine accumulates gradients at fan-out") {
    Tensor x(Shape{3}, std::vector<Scalar>{1, 2, 3});
    x.set_requires_grad();
    Tensor y = sum(add(mul(x, x), scale(x, 3)));  // sum(x^2 + 3x)
    backward(y);
    REQUIRE(x.grad().defined());
    CHECK(x.grad().values()[0] == doctest::Approx(5));
    CHECK(x.grad().values()[2] == doctest::Approx(9));

    SUBCASE("backward accumulates into existing gradients") {
        backward(sum(x));
        CHECK(x.grad().values()[0] == doctest::Approx(6));
    }
    SUBCASE("restricted leaves leave others untouched") {
        Tensor w(Shape{3}, 2.0);
        w.set_requires_grad();
        x.zero_grad();
        backward(sum(mul(x, w)), {w});
        CHECK_FALSE(x.grad().defined());
        CHECK(w.grad().values()[1] == doctest::Approx(2));
    }
    SUBCASE("no-grad mode records nothing") {
        NoGradGuard ng;
        CHECK_FALSE(mul(x, x).requires_grad());
    }
}

TEST_CASE("conv3d basics") {
    Tensor x(Shape{1, 1, 2, 3, 4});
    Rng rng(1);
    for (auto& v : x.values()) v = rng.normal();
    Tensor w(Shape{1, 1, 1, 1, 1}, 1.0);
    CHECK(conv3d(x, w, ConvGeom{}).values().size() == 24);
    auto y = conv3d(x, w, Tensor(Shape{1}, 0.0), ConvGeom{});
    for (int i = 0; i < 24; ++i) CHECK(y.values()[i] == x.values()[i]);

    Tensor ones(Shape{1, 1, 2, 2, 2}, 1.0);
    Tensor k(Shape{1, 1, 2, 2, 2}, 1.0);
    auto s = conv3d(ones, k, Tensor(Shape{1}, 0.0), ConvGeom{});
    CHECK(s.shape() == Shape{1, 1, 1, 1, 1});
    CHECK(s.item() == 8.0);

    CHECK_THROWS_AS(conv3d(Tensor(Shape{1, 2, 4, 4, 4}), Tensor(Shape{3, 1, 3, 3, 3}), ConvGeom::uniform(1, 1)),
                    ShapeError);
    // (5 + 2 - 4) / 2 is not integral.
    CHECK_THROWS_AS(conv3d(Tensor(Shape{1, 1, 5, 5, 5}), Tensor(Shape{1, 1, 4, 4, 4}), ConvGeom::uniform(2, 1)),
                    ShapeError);
}

TEST_CASE("conv shape algebra for the network geometries") {
    CHECK(conv_output_extent({256, 256, 1}, {4, 4, 1}, ConvGeom{{2, 2, 1}, {1, 1, 0}}) ==
          std::array<std::int64_t, 3>{128, 128, 1});
    CHECK(conv_output_extent({32, 32, 32}, {3, 3, 3}, ConvGeom::uniform(1, 1)) ==
          std::array<std::int64_t, 3>{32, 32, 32});
    CHECK(conv_output_extent({4, 4, 1}, {4, 4, 1}, ConvGeom{}) == std::array<std::int64_t, 3>{1, 1, 1});
    CHECK(conv_transpose_output_extent({64, 64, 64}, {4, 4, 4}, ConvGeom::uniform(2, 1)) ==
          std::array<std::int64_t, 3>{128, 128, 128});
}

TEST_CASE("conv2d on a 256^2 four-channel image") {
    Rng rng(2);
    Tensor x = randn({1, 4, 256, 256}, rng);
    Tensor w = randn({16, 4, 4, 4}, rng, 0.02);
    Tensor b(Shape{16}, 0.0);
    auto y = conv2d(x, w, b, 2, 1);
    CHECK(y.shape() == Shape{1, 16, 128, 128});
    CHECK(w.numel() == 1024);
}

TEST_CASE("conv2d gradient matches central differences") {
    Rng rng(3);
    Tensor x = randn({2, 3, 6, 6}, rng);
    Tensor w = randn({4, 3, 4, 4}, rng, 0.3);
    Tensor b = randn({4}, rng);
    Tensor target = randn({2, 4, 3, 3}, rng);
    auto loss = [&](const Tensor& xx, const Tensor& ww, const Tensor& bb) {
        return mse(conv2d(xx, ww, bb, 2, 1), target);
    };
    CHECK(grad_check([&](const Tensor& t) { return loss(t, w, b); }, x).max_rel_error < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return loss(x, t, b); }, w).max_rel_error < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return loss(x, w, t); }, b).max_rel_error < 1e-4);
}

TEST_CASE("conv3d gradient on a 2x4^3 input") {
    Rng rng(4);
    Tensor x = randn({1, 2, 4, 4, 4}, rng);
    Tensor w = randn({3, 2, 3, 3, 3}, rng, 0.2);
    Tensor b = randn({3}, rng);
    Tensor target = randn({1, 3, 4, 4, 4}, rng);
    auto f = [&](const Tensor& xx, const Tensor& ww) { return mse(conv3d(xx, ww, b, ConvGeom::uniform(1, 1)), target); };
    CHECK(grad_check([&](const Tensor& t) { return f(t, w); }, x).max_rel_error < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return f(x, t); }, w).max_rel_error < 1e-4);
}

TEST_CASE("conv_transpose3d") {
    Rng rng(5);
    SUBCASE("1x1 kernel is the identity") {
        Tensor x = randn({1, 1, 3, 3, 3}, rng);
        auto y = conv_transpose3d(x, Tensor(Shape{1, 1, 1, 1, 1}, 1.0), Tensor(Shape{1}, 0.0), ConvGeom{});
        CHECK(y.values().size() == x.values().size());
        for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.values()[i] == x.values()[i]);
    }
    SUBCASE("forward equals the input gradient of the matching conv3d") {
        const ConvGeom g = ConvGeom::uniform(2, 1);
        Tensor w = randn({3, 2, 4, 4, 4}, rng);  // conv: 2 -> 3 channels
        Tensor x = randn({1, 2, 8, 8, 8}, rng);
        x.set_requires_grad();
        Tensor y = conv3d(x, w, g);
        Tensor u = randn(y.shape(), rng);
        auto via_grad = grad(y, {x}, u)[0];
        auto via_convt = conv_transpose3d(u, w, Tensor(), g);
        REQUIRE(via_convt.shape() == x.shape());
        for (std::int64_t i = 0; i < x.numel(); ++i)
            CHECK(via_convt.values()[i] == doctest::Approx(via_grad.values()[i]).epsilon(1e-12));
        // Adjointness: <conv(x), u> = <x, conv^T(u)>.
        CHECK(dot(y, u) == doctest::Approx(dot(x, via_convt)).epsilon(1e-12));
    }
    SUBCASE("doubling geometry and gradient") {
        Tensor x = randn({1, 2, 3, 3, 3}, rng);
        Tensor w = randn({2, 3, 4, 4, 4}, rng, 0.2);
        Tensor b = randn({3}, rng);
        auto y = conv_transpose3d(x, w, b, ConvGeom::uniform(2, 1));
        CHECK(y.shape() == Shape{1, 3, 6, 6, 6});
        Tensor target = randn(y.shape(), rng);
        auto f = [&](const Tensor& xx, const Tensor& ww) {
            return mse(conv_transpose3d(xx, ww, b, ConvGeom::uniform(2, 1)), target);
        };
        CHECK(grad_check([&](const Tensor& t) { return f(t, w); }, x).max_rel_error < 1e-4);
        CHECK(grad_check([&](const Tensor& t) { return f(x, t); }, w).max_rel_error < 1e-4);
    }
}

TEST_CASE("conv3d_weight_grad is adjoint in both arguments") {
    Rng rng(6);
    const ConvGeom g = ConvGeom::uniform(1, 1);
    Tensor x = randn({2, 2, 4, 4, 4}, rng);
    Tensor gy = randn({2, 3, 4, 4, 4}, rng);
    Tensor u = randn({3, 2, 3, 3, 3}, rng);
    auto gw = conv3d_weight_grad(x, gy, u.shape(), g);
    // <weight_grad(x, gy), u> = <conv(x, u), gy>
    CHECK(dot(gw, u) == doctest::Approx(dot(conv3d(x, u, g), gy)).epsilon(1e-12));
    auto f = [&](const Tensor& xx) {
        Tensor target(u.shape(), 0.5);
        return mse(conv3d_weight_grad(xx, gy, u.shape(), g), target);
    };
    CHECK(grad_check(f, x).max_rel_error < 1e-4);
}

TEST_CASE("batch_norm") {
    Rng rng(7);
    SUBCASE("C=512 carries 1024 trainable values") {
        Tensor gamma(Shape{512}, 1.0), beta(Shape{512}, 0.0);
        CHECK(gamma.numel() + beta.numel() == 1024);
    }
    SUBCASE("standardised input passes through") {
        Tensor x(Shape{2, 2, 2}, std::vector<Scalar>{-1, 1, 1, -1, 1, -1, -1, 1});
        BatchNormStats st{Tensor(Shape{2}, 0.0), Tensor(Shape{2}, 1.0)};
        auto y = batch_norm(x, Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.0), st, {});
        for (int i = 0; i < 8; ++i) CHECK(std::abs(y.values()[i] - x.values()[i]) < 1e-4);
    }
    SUBCASE("training output has mean beta and std |gamma|") {
        Tensor x = randn({4, 3, 5, 5}, rng, 3.0);
        for (auto& v : x.values()) v += 2.0;
        Tensor gamma(Shape{3}, std::vector<Scalar>{0.5, -2.0, 1.5});
        Tensor beta(Shape{3}, std::vector<Scalar>{1.0, 0.0, -3.0});
        BatchNormStats st{Tensor(Shape{3}, 0.0), Tensor(Shape{3}, 1.0)};
        auto y = batch_norm(x, gamma, beta, st, {});
        for (int c = 0; c < 3; ++c) {
            double s = 0, ss = 0;
            int n = 0;
            for (int b = 0; b < 4; ++b)
                for (int i = 0; i < 25; ++i) {
                    const double v = y.values()[(b * 3 + c) * 25 + i];
                    s += v;
                    ss += v * v;
                    ++n;
                }
            const double m = s / n;
            const double sd = std::sqrt(ss / n - m * m);
            CHECK(m == doctest::Approx(beta.values()[c]).epsilon(1e-9));
            CHECK(sd == doctest::Approx(std::abs(gamma.values()[c])).epsilon(1e-4));
        }
        CHECK(st.running_mean.values()[0] != 0.0);
    }
    SUBCASE("single sample with zero variance is finite") {
        Tensor x(Shape{1, 2, 1}, 3.0);
        BatchNormStats st{Tensor(Shape{2}, 0.0), Tensor(Shape{2}, 1.0)};
        auto y = batch_norm(x, Tensor(Shape{2}, 1.0), Tensor(Shape{2}, 0.25), st, {});
        for (Scalar v : y.values()) CHECK(v == 0.25);
    }
    SUBCASE("gradients in training and eval mode") {
        Tensor x = randn({3, 2, 4}, rng);
        Tensor gamma = randn({2}, rng);
        Tensor beta = randn({2}, rng);
        Tensor target = randn({3, 2, 4}, rng);
        for (bool training : {true, false}) {
            BatchNormStats st{Tensor(Shape{2}, 0.3), Tensor(Shape{2}, 1.7)};
            BatchNormOptions opt;
            opt.training = training;
            auto f = [&](const Tensor& xx, const Tensor& gg, const Tensor& bb) {
                BatchNormStats scratch = {st.running_mean.clone(), st.running_var.clone()};
                return mse(batch_norm(xx, gg, bb, scratch, opt), target);
            };
            CHECK(grad_check([&](const Tensor& t) { return f(t, gamma, beta); }, x).max_rel_error < 1e-4);
            CHECK(grad_check([&](const Tensor& t) { return f(x, t, beta); }, gamma).max_rel_error < 1e-4);
            CHECK(grad_check([&](const Tensor& t) { return f(x, gamma, t); }, beta).max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("pointwise layers") {
    Tensor x(Shape{2}, std::vector<Scalar>{-1, 2});
    auto r = relu(x);
    CHECK(r.values()[0] == 0);
    CHECK(r.values()[1] == 2);

    auto s = softmax_channels(Tensor(Shape{1, 4, 1}, 0.7));
    for (Scalar v : s.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

    Rng rng(8);
    Tensor logits = randn({2, 4, 3, 3, 3}, rng, 4.0);
    auto p = softmax_channels(logits);
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 27; ++i) {
            Scalar total = 0;
            for (int c = 0; c < 4; ++c) {
                const Scalar v = p.values()[(b * 4 + c) * 27 + i];
                CHECK(v > 0);
                CHECK(v < 1);
                total += v;
            }
            CHECK(std::abs(total - 1) < 1e-6);
        }

    Tensor a = randn({2, 3, 4}, rng);
    CHECK(mse(a, a).item() == 0);

    for (int f : {1, 2, 8}) {
        Tensor t = randn({2, 3, 2, 3, 2}, rng);
        auto back = downsample_nearest(upsample_nearest(t, f), f);
        CHECK(back.shape() == t.shape());
        for (std::int64_t i = 0; i < t.numel(); ++i) CHECK(back.values()[i] == t.values()[i]);
    }
    CHECK_THROWS_AS(upsample_nearest(a.ndim() == 3 ? Tensor(Shape{1, 1, 1}) : a, 0), ShapeError);
}

TEST_CASE("pointwise layer gradients") {
    Rng rng(9);
    Tensor x = randn({2, 4, 2, 2, 2}, rng);
    Tensor target = randn({2, 4, 4, 4, 4}, rng);
    Tensor target_small = randn({2, 4, 1, 1, 1}, rng);
    CHECK(grad_check([&](const Tensor& t) { return mse(upsample_nearest(softmax_channels(t), 2), target); }, x)
              .max_rel_error < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return mse(downsample_nearest(relu(t), 2), target_small); }, x)
              .max_rel_error < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(row_norm(t)); }, x).max_rel_error < 1e-4);
    CHECK(grad_check([&](const Tensor& t) { return mean(mul(permute(t, {0, 4, 1, 2, 3}), permute(t, {0, 4, 1, 2, 3}))); },
                     x)
              .max_rel_error < 1e-4);
}

TEST_CASE("second-order gradients through conv and relu") {
    Rng rng(10);
    Tensor w1 = randn({3, 2, 3, 3}, rng, 0.5);
    Tensor b1 = randn({3}, rng);
    Tensor w2 = randn({1, 3, 4, 4}, rng, 0.5);
    Tensor x = randn({2, 2, 4, 4}, rng);
    auto critic = [&](const Tensor& xx, const Tensor& ww) {
        return reshape(conv2d(relu(conv2d(xx, ww, b1, 1, 1)), w2, Tensor(), 1, 0), {xx.dim(0)});
    };
    auto penalty = [&](const Tensor& ww) {
        Tensor xl = x.clone();
        xl.set_requires_grad();
        Tensor out = sum(critic(xl, ww));
        Tensor g = grad(out, {xl}, {}, true)[0];
        return mean(mul(row_norm(g), row_norm(g)));
    };
    CHECK(grad_check(penalty, w1).max_rel_error < 1e-4);
}

TEST_CASE("adam_step") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::vector<Scalar> p{1.5, -2};
        std::vector<Scalar> g{0, 0};
        AdamMoments m;
        adam_step(p, g, m, 1, AdamConfig{});
        CHECK(p == std::vector<Scalar>{1.5, -2});
    }
    SUBCASE("first step moves by lr / (1 + eps)") {
        std::vector<Scalar> p{0.0};
        std::vector<Scalar> g{1.0};
        AdamMoments m;
        AdamConfig cfg;
        cfg.lr = 0.1;
        adam_step(p, g, m, 1, cfg);
        CHECK(std::abs(p[0] + 0.1 / (1 + 1e-8)) < 1e-6);
    }
    SUBCASE("minimises x^2 from 5") {
        Tensor x(Shape{1}, 5.0);
        x.set_requires_grad();
        AdamConfig cfg;
        cfg.lr = 1e-2;
        Adam opt({{"x", x}}, cfg);
        for (int i = 0; i < 2000; ++i) {
            opt.zero_grad();
            backward(sum(mul(x, x)));
            opt.step();
        }
        CHECK(std::abs(x.values()[0]) < 1e-2);
    }
    SUBCASE("non-finite gradients are rejected without mutation") {
        std::vector<Scalar> p{1.0};
        std::vector<Scalar> g{std::nan("")};
        AdamMoments m;
        CHECK_THROWS_AS(adam_step(p, g, m, 1, AdamConfig{}), NumericError);
        CHECK(p[0] == 1.0);
    }
}

TEST_CASE("grad_check") {
    Rng rng(11);
    Tensor x = randn({5}, rng);
    CHECK(grad_check([](const Tensor& t) { return sum(t); }, x).max_rel_error < 1e-9);
    CHECK_FALSE(x.requires_grad());
}
