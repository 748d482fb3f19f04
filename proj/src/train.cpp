#include "voxsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "voxsr/autodiff/ops.hpp"
#include "voxsr/error.hpp"
#include "voxsr/json_util.hpp"
#include "voxsr/volume_io.hpp"

namespace voxsr {

using ad::Scalar;
using ad::Shape;
using ad::Tensor;

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}
}  // namespace

std::string to_string(GpMode m) { return m == GpMode::Exact ? "exact" : "finite_difference"; }

GpMode parse_gp_mode(const std::string& s) {
    if (s == "exact") return GpMode::Exact;
    if (s == "finite_difference") return GpMode::FiniteDifference;
    throw ConfigError("gp_mode must be 'exact' or 'finite_difference', got '" + s + "'");
}

void Hyperparams::validate() const {
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must be in [0, 1)");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (iters_per_epoch < 0) throw ConfigError("iters_per_epoch must be >= 0");
    if (!(c >= 0)) throw ConfigError("c must be >= 0");
    if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
    if (d_batch_real < 1) throw ConfigError("d_batch_real must be >= 1");
    if (g_batch < 1) throw ConfigError("g_batch must be >= 1");
    if (!(noise_std >= 0)) throw ConfigError("noise_std must be >= 0");
    if (!(gp_fd_step > 0)) throw ConfigError("gp_fd_step must be > 0");
}

void to_json(nlohmann::json& j, const Hyperparams& h) {
    j = nlohmann::json{{"lr", h.lr},
                       {"beta1", h.beta1},
                       {"beta2", h.beta2},
                       {"epochs", h.epochs},
                       {"iters_per_epoch", h.iters_per_epoch},
                       {"c", h.c},
                       {"lambda", h.lambda},
                       {"d_batch_real", h.d_batch_real},
                       {"g_batch", h.g_batch},
                       {"noise_std", h.noise_std},
                       {"seed", h.seed},
                       {"gp_mode", to_string(h.gp_mode)},
                       {"gp_fd_step", h.gp_fd_step},
                       {"strict_alg1", h.strict_alg1}};
}

void from_json(const nlohmann::json& j, Hyperparams& h) {
    const std::string where = "hyperparams";
    reject_unknown_keys(j,
                        {"lr", "beta1", "beta2", "epochs", "iters_per_epoch", "c", "lambda", "d_batch_real",
                         "g_batch", "noise_std", "seed", "gp_mode", "gp_fd_step", "strict_alg1"},
                        where);
    read_optional(j, "lr", h.lr, where);
    read_optional(j, "beta1", h.beta1, where);
    read_optional(j, "beta2", h.beta2, where);
    read_optional(j, "epochs", h.epochs, where);
    read_optional(j, "iters_per_epoch", h.iters_per_epoch, where);
    read_optional(j, "c", h.c, where);
    read_optional(j, "lambda", h.lambda, where);
    read_optional(j, "d_batch_real", h.d_batch_real, where);
    read_optional(j, "g_batch", h.g_batch, where);
    read_optional(j, "noise_std", h.noise_std, where);
    read_optional(j, "seed", h.seed, where);
    std::string mode = to_string(h.gp_mode);
    read_optional(j, "gp_mode", mode, where);
    h.gp_mode = parse_gp_mode(mode);
    read_optional(j, "gp_fd_step", h.gp_fd_step, where);
    read_optional(j, "strict_alg1", h.strict_alg1, where);
    h.validate();
}

const char* plane_name(Plane p) {
    switch (p) {
        case Plane::XY: return "xy";
        case Plane::XZ: return "xz";
        case Plane::YZ: return "yz";
    }
    return "?";
}

std::string loss_csv(const std::vector<LossRow>& rows) {
    std::string out = "epoch,iter,plane,l_D,l_gp,l_G,l_vw\n";
    char buf[64];
    auto num = [&](double v) {
        if (std::isnan(v)) return;
        std::snprintf(buf, sizeof buf, "%.9g", v);
        out += buf;
    };
    for (const auto& r : rows) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.iter) + ",";
        out += r.plane < 0 ? "G" : plane_name(static_cast<Plane>(r.plane));
        out += ",";
        num(r.l_d);
        out += ",";
        num(r.l_gp);
        out += ",";
        num(r.l_g);
        out += ",";
        num(r.l_vw);
        out += "\n";
    }
    return out;
}

Tensor one_hot_tensor(const std::vector<SegmentedVolume>& cubes) {
    if (cubes.empty()) throw ShapeError("one_hot_tensor: no cubes");
    const Dims3 d = cubes.front().dims();
    const int P = cubes.front().phase_count();
    const std::int64_t vox = d.voxels();
    const auto B = static_cast<std::int64_t>(cubes.size());
    Tensor t(Shape{B, P, d.nx, d.ny, d.nz}, 0.0);
    auto tv = t.values();
    for (std::int64_t b = 0; b < B; ++b) {
        const auto& c = cubes[b];
        if (!(c.dims() == d) || c.phase_count() != P) throw ShapeError("one_hot_tensor: cubes differ in shape");
        auto labels = c.labels();
        for (std::int64_t i = 0; i < vox; ++i) tv[(b * P + labels[i]) * vox + i] = 1.0;
    }
    return t;
}

Tensor make_generator_input(const std::vector<SegmentedVolume>& cubes, Rng& rng, double noise_std) {
    const Tensor oh = one_hot_tensor(cubes);
    const std::int64_t B = oh.dim(0), P = oh.dim(1);
    const std::int64_t vox = oh.numel() / (B * P);
    Tensor x(Shape{B, P + 1, oh.dim(2), oh.dim(3), oh.dim(4)}, 0.0);
    auto xv = x.values();
    auto ov = oh.values();
    for (std::int64_t b = 0; b < B; ++b) {
        std::copy_n(ov.begin() + b * P * vox, P * vox, xv.begin() + b * (P + 1) * vox);
        for (std::int64_t i = 0; i < vox; ++i) xv[(b * (P + 1) + P) * vox + i] = noise_std * rng.normal();
    }
    return x;
}

Tensor plane_slices(const Tensor& sr, Plane plane) {
    if (sr.ndim() != 5) throw ShapeError("plane_slices: expected [B, P, X, Y, Z], got " + ad::to_string(sr.shape()));
    // Move the axis held fixed by the plane next to the batch axis.
    std::vector<int> order;
    switch (plane) {
        case Plane::XY: order = {0, 4, 1, 2, 3}; break;
        case Plane::XZ: order = {0, 3, 1, 2, 4}; break;
        case Plane::YZ: order = {0, 2, 1, 3, 4}; break;
    }
    const Tensor p = ad::permute(sr, order);
    return ad::reshape(p, {p.dim(0) * p.dim(1), p.dim(2), p.dim(3), p.dim(4)});
}

namespace {

// Per-sample unit direction along v; a random direction where v vanishes.
Tensor unit_directions(const Tensor& v, Rng& rng) {
    const std::int64_t n = v.dim(0);
    const std::int64_t per = v.numel() / n;
    Tensor u(v.shape(), 0.0);
    auto vv = v.values();
    auto uv = u.values();
    for (std::int64_t i = 0; i < n; ++i) {
        double norm = 0;
        for (std::int64_t j = 0; j < per; ++j) norm += vv[i * per + j] * vv[i * per + j];
        norm = std::sqrt(norm);
        if (norm > 0) {
            for (std::int64_t j = 0; j < per; ++j) uv[i * per + j] = vv[i * per + j] / norm;
            continue;
        }
        double r = 0;
        for (std::int64_t j = 0; j < per; ++j) {
            uv[i * per + j] = rng.normal();
            r += uv[i * per + j] * uv[i * per + j];
        }
        r = std::sqrt(r);
        for (std::int64_t j = 0; j < per; ++j) uv[i * per + j] /= r;
    }
    return u;
}

}  // namespace

Tensor gradient_penalty(const Critic& d, const Tensor& real, const Tensor& fake, Rng& rng, double lambda,
                        GpMode mode, double fd_step) {
    if (real.shape() != fake.shape())
        throw ShapeError("gradient_penalty: real " + ad::to_string(real.shape()) + " vs fake " +
                         ad::to_string(fake.shape()));
    if (real.ndim() < 1 || real.dim(0) < 1) throw ShapeError("gradient_penalty: empty batch");
    const std::int64_t n = real.dim(0);
    const std::int64_t per = real.numel() / n;

    Tensor xh(real.shape(), 0.0);
    {
        auto rv = real.values();
        auto fv = fake.values();
        auto xv = xh.values();
        for (std::int64_t i = 0; i < n; ++i) {
            const double eps = rng.uniform();
            for (std::int64_t j = 0; j < per; ++j) {
                const std::int64_t k = i * per + j;
                xv[k] = eps * rv[k] + (1 - eps) * fv[k];
            }
        }
    }

    Tensor norms;
    if (mode == GpMode::Exact) {
        ad::GradModeGuard on(true);
        xh.set_requires_grad();
        const Tensor g = ad::grad(ad::sum(d(xh)), {xh}, {}, true)[0];
        norms = ad::row_norm(g);
    } else {
        // Symmetric difference along the input-gradient direction. For a
        // critic with constant gradient this equals the gradient norm.
        Tensor u;
        {
            ad::GradModeGuard on(true);
            Tensor probe = xh.clone();
            probe.set_requires_grad();
            u = unit_directions(ad::grad(ad::sum(d(probe)), {probe})[0], rng);
        }
        Tensor plus(xh.shape(), 0.0), minus(xh.shape(), 0.0);
        auto xv = xh.values();
        auto uv = u.values();
        auto pv = plus.values();
        auto mv = minus.values();
        for (std::int64_t k = 0; k < xh.numel(); ++k) {
            pv[k] = xv[k] + fd_step * uv[k];
            mv[k] = xv[k] - fd_step * uv[k];
        }
        norms = ad::scale(ad::sub(d(plus), d(minus)), 1.0 / (2 * fd_step));
    }
    const Tensor dev = ad::add_scalar(norms, -1.0);
    return ad::scale(ad::mean(ad::mul(dev, dev)), lambda);
}

Tensor voxelwise_loss(const Tensor& lr_onehot, const Tensor& sr) {
    if (sr.ndim() != 5 || lr_onehot.ndim() != 5)
        throw ShapeError("voxelwise_loss: expected 5-D tensors, got " + ad::to_string(lr_onehot.shape()) + " and " +
                         ad::to_string(sr.shape()));
    for (int a = 2; a < 5; ++a)
        if (sr.dim(a) != 8 * lr_onehot.dim(a))
            throw ShapeError("voxelwise_loss: sr " + ad::to_string(sr.shape()) + " is not 8x lr " +
                             ad::to_string(lr_onehot.shape()));
    return ad::mse(lr_onehot, ad::downsample_nearest(sr, 8));
}

namespace {

Tensor select_rows(const Tensor& t, const std::vector<std::int64_t>& rows) {
    const std::int64_t per = t.numel() / t.dim(0);
    Shape shape = t.shape();
    shape[0] = static_cast<std::int64_t>(rows.size());
    Tensor out(shape, 0.0);
    auto tv = t.values();
    auto ov = out.values();
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy_n(tv.begin() + rows[r] * per, per, ov.begin() + static_cast<std::int64_t>(r) * per);
    return out;
}

// k distinct indices from [0, n) by partial Fisher-Yates.
std::vector<std::int64_t> choose(std::int64_t n, std::int64_t k, Rng& rng) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
    for (std::int64_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

std::vector<Tensor> leaves(const std::vector<NamedTensor>& params) {
    std::vector<Tensor> out;
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

}  // namespace

DStepLosses discriminator_step(Discriminator& d, ad::Adam& opt_d, const Tensor& fake, const Tensor& real, Rng& rng,
                               const Hyperparams& hp) {
    return discriminator_step([&d](const Tensor& x) { return d.forward(x); }, opt_d, fake, real, rng, hp);
}

DLoss discriminator_loss(const Critic& critic, const Tensor& fake, const Tensor& real, Rng& rng,
                         const Hyperparams& hp) {
    if (fake.requires_grad()) throw ShapeError("discriminator_step: fake slices must be detached");
    if (fake.ndim() != real.ndim()) throw ShapeError("discriminator_step: real and fake ranks differ");

    // The penalty interpolates pairs, so it uses as many samples as the smaller batch.
    const std::int64_t n = std::min(real.dim(0), fake.dim(0));
    Tensor gp_real = real.dim(0) == n ? real : select_rows(real, choose(real.dim(0), n, rng));
    Tensor gp_fake = fake.dim(0) == n ? fake : select_rows(fake, choose(fake.dim(0), n, rng));

    const Tensor l_gp = gradient_penalty(critic, gp_real, gp_fake, rng, hp.lambda, hp.gp_mode, hp.gp_fd_step);
    const Tensor w = ad::sub(ad::mean(critic(fake)), ad::mean(critic(real)));
    return {ad::add(w, l_gp), l_gp};
}

DStepLosses discriminator_step(const Critic& critic, ad::Adam& opt_d, const Tensor& fake, const Tensor& real,
                               Rng& rng, const Hyperparams& hp) {
    opt_d.zero_grad();
    const DLoss loss = discriminator_loss(critic, fake, real, rng, hp);
    require_finite(loss.l_d.item(), "discriminator loss");
    ad::backward(loss.l_d, leaves(opt_d.params()));
    opt_d.step();
    return {loss.l_d.item(), loss.l_gp.item()};
}

GLoss generator_loss(const Discriminator& d, const Tensor& sr, const Tensor& lr_onehot, const Hyperparams& hp) {
    const Tensor l_vw = voxelwise_loss(lr_onehot, sr);
    Tensor l_g;
    for (Plane p : {Plane::XY, Plane::XZ, Plane::YZ}) {
        Tensor term = ad::scale(ad::mean(d.forward(plane_slices(sr, p))), -1.0);
        if (!hp.strict_alg1) term = ad::add(term, ad::scale(l_vw, hp.c));
        l_g = l_g.defined() ? ad::add(l_g, term) : term;
    }
    if (hp.strict_alg1) l_g = ad::add(l_g, ad::scale(l_vw, hp.c));
    return {l_g, l_vw};
}

GStepLosses generator_step(ad::Adam& opt_g, const Discriminator& d, const Tensor& sr, const Tensor& lr_onehot,
                           const Hyperparams& hp) {
    const GLoss loss = generator_loss(d, sr, lr_onehot, hp);
    require_finite(loss.l_g.item(), "generator loss");

    std::vector<Tensor> g_leaves;
    for (const auto& p : opt_g.params()) g_leaves.push_back(p.tensor);
    opt_g.zero_grad();
    ad::backward(loss.l_g, g_leaves);
    opt_g.step();
    return {loss.l_g.item(), loss.l_vw.item()};
}

TrainData::TrainData(SegmentedVolume lr_volume, std::vector<SegmentedImage2D> pool)
    : lr(std::move(lr_volume)), hr_pool(std::move(pool)) {
    if (hr_pool.empty()) throw DataError("HR image pool is empty");
    for (const auto& img : hr_pool)
        if (img.phase_count() != lr.phase_count())
            throw DataError("HR pool phase count " + std::to_string(img.phase_count()) + " differs from LR " +
                            std::to_string(lr.phase_count()));
    std::sort(hr_pool.begin(), hr_pool.end(), [](const SegmentedImage2D& a, const SegmentedImage2D& b) {
        if (a.nx() != b.nx()) return a.nx() < b.nx();
        if (a.ny() != b.ny()) return a.ny() < b.ny();
        return std::lexicographical_compare(a.labels().begin(), a.labels().end(), b.labels().begin(),
                                            b.labels().end());
    });
}

std::vector<SegmentedImage2D> augment_pool(const std::vector<SegmentedImage2D>& pool) {
    std::vector<SegmentedImage2D> out;
    out.reserve(pool.size() * 8);
    for (const auto& img : pool)
        for (auto& a : augment_d4(img)) out.push_back(std::move(a));
    return out;
}

Tensor sample_real_batch(const TrainData& data, int n, int side, Rng& rng) {
    const int P = data.lr.phase_count();
    Tensor t(Shape{n, P, side, side}, 0.0);
    auto tv = t.values();
    const std::int64_t area = std::int64_t{side} * side;
    for (int i = 0; i < n; ++i) {
        const auto& img = data.hr_pool[rng.uniform_int(data.hr_pool.size())];
        if (img.nx() < side || img.ny() < side)
            throw DataError("HR pool image " + std::to_string(img.nx()) + "x" + std::to_string(img.ny()) +
                            " is smaller than the critic input " + std::to_string(side));
        const auto ox = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.nx() - side + 1)));
        const auto oy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(img.ny() - side + 1)));
        for (int x = 0; x < side; ++x)
            for (int y = 0; y < side; ++y) {
                const int label = img.at(ox + x, oy + y);
                tv[(std::int64_t{i} * P + label) * area + std::int64_t{x} * side + y] = 1.0;
            }
    }
    return t;
}

TrainState::TrainState(const GeneratorConfig& gc, const DiscriminatorConfig& dc, const Hyperparams& h, Init init)
    : hp(h),
      g(gc, splitmix64(h.seed ^ 0x67656eULL), init),
      d(dc, splitmix64(h.seed ^ 0x646973ULL), init),
      opt_g(g.parameters(), h.adam()),
      opt_d(d.parameters(), h.adam()),
      rng(h.seed) {
    hp.validate();
    if (gc.phase_count != dc.phase_count) throw ConfigError("generator and discriminator phase counts differ");
    if (dc.input_side != gc.output_side())
        throw ConfigError("discriminator.input_side " + std::to_string(dc.input_side) +
                          " must equal 8 * generator.input_side = " + std::to_string(gc.output_side()));
}

int iterations_per_epoch(const TrainState& st, const TrainData& data) {
    if (st.hp.iters_per_epoch > 0) return st.hp.iters_per_epoch;
    const std::int64_t s = st.g.config().input_side;
    return static_cast<int>(std::max<std::int64_t>(1, data.lr.dims().voxels() / (s * s * s)));
}

void train_iteration(TrainState& st, const TrainData& data) {
    const auto& gc = st.g.config();
    const int s = gc.input_side;
    const int m = gc.output_side();
    if (data.lr.phase_count() != gc.phase_count)
        throw DataError("LR volume has " + std::to_string(data.lr.phase_count()) + " phases, model expects " +
                        std::to_string(gc.phase_count));

    std::vector<SegmentedVolume> cubes;
    for (int b = 0; b < st.hp.g_batch; ++b) cubes.push_back(sample_subvolume(data.lr, s, st.rng));
    const Tensor lr_onehot = one_hot_tensor(cubes);
    const Tensor x = make_generator_input(cubes, st.rng, st.hp.noise_std);
    const Tensor sr = st.g.forward(x, true);

    const int epoch = st.epoch + 1;
    const std::int64_t iter = st.iter + 1;
    for (Plane p : {Plane::XY, Plane::XZ, Plane::YZ}) {
        const Tensor fake = plane_slices(sr, p).detach();
        const Tensor real = sample_real_batch(data, st.hp.d_batch_real, m, st.rng);
        const DStepLosses l = discriminator_step(st.d, st.opt_d, fake, real, st.rng, st.hp);
        st.history.push_back({epoch, iter, static_cast<int>(p), l.l_d, l.l_gp, kNaN, kNaN});
    }
    const GStepLosses l = generator_step(st.opt_g, st.d, sr, lr_onehot, st.hp);
    st.history.push_back({epoch, iter, -1, kNaN, kNaN, l.l_g, l.l_vw});
    ++st.iter;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_epoch_%04d.vsrw", epoch);
    return dir / name;
}

void train_loop(TrainState& st, const TrainData& data, const TrainOutput& out) {
    const int n = iterations_per_epoch(st, data);
    std::filesystem::path last_good;
    if (!out.dir.empty() && st.epoch > 0) last_good = checkpoint_path(out.dir, st.epoch);
    while (st.epoch < st.hp.epochs) {
        try {
            for (int j = 0; j < n; ++j) train_iteration(st, data);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(st.epoch + 1) +
                               "; last good checkpoint: " + (last_good.empty() ? "none" : last_good.string()));
        }
        ++st.epoch;
        if (!out.dir.empty()) {
            last_good = checkpoint_path(out.dir, st.epoch);
            save_checkpoint(last_good, st);
            const std::string csv = loss_csv(st.history);
            write_file(out.dir / "losses.csv",
                       std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
        }
        if (out.on_epoch) out.on_epoch(st);
    }
}

}  // namespace voxsr
