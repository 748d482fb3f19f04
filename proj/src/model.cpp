#include "voxsr/model.hpp"

#include <bit>
#include <cmath>
#include <sstream>

#include "voxsr/error.hpp"
#include "voxsr/json_util.hpp"
#include "voxsr/rng.hpp"

namespace voxsr {

using ad::ConvGeom;
using ad::Shape;

int scaled_channels(int base, double width_scale) {
    return std::max(1, static_cast<int>(std::lround(width_scale * base)));
}

void GeneratorConfig::validate() const {
    if (phase_count < 1) throw ConfigError("generator.phase_count must be >= 1");
    if (noise_channels < 0) throw ConfigError("generator.noise_channels must be >= 0");
    if (!(width_scale > 0 && width_scale <= 1)) throw ConfigError("generator.width_scale must be in (0, 1]");
    if (input_side < 1) throw ConfigError("generator.input_side must be >= 1");
    if (!(bn_eps > 0) || !(init_std >= 0) || !(bn_momentum >= 0 && bn_momentum <= 1))
        throw ConfigError("generator numeric settings out of range");
}

int DiscriminatorConfig::stages() const {
    int n = 0;
    int side = input_side;
    while (side > 4 && side % 2 == 0) {
        side /= 2;
        ++n;
    }
    return side == 4 ? n : -1;
}

void DiscriminatorConfig::validate() const {
    if (phase_count < 1) throw ConfigError("discriminator.phase_count must be >= 1");
    if (!(width_scale > 0 && width_scale <= 1)) throw ConfigError("discriminator.width_scale must be in (0, 1]");
    const int s = stages();
    if (s < 1 || s > 6)
        throw ConfigError("discriminator.input_side must be 4 * 2^k with 1 <= k <= 6, got " +
                          std::to_string(input_side));
    if (!(init_std >= 0)) throw ConfigError("discriminator.init_std must be >= 0");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = nlohmann::json{{"phase_count", c.phase_count},   {"noise_channels", c.noise_channels},
                       {"width_scale", c.width_scale},   {"input_side", c.input_side},
                       {"first_conv_bias", c.first_conv_bias}, {"conv_bias", c.conv_bias},
                       {"bn_eps", c.bn_eps},             {"bn_momentum", c.bn_momentum},
                       {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    const std::string where = "generator";
    reject_unknown_keys(j,
                        {"phase_count", "noise_channels", "width_scale", "input_side", "first_conv_bias",
                         "conv_bias", "bn_eps", "bn_momentum", "init_std"},
                        where);
    read_optional(j, "phase_count", c.phase_count, where);
    read_optional(j, "noise_channels", c.noise_channels, where);
    read_optional(j, "width_scale", c.width_scale, where);
    read_optional(j, "input_side", c.input_side, where);
    read_optional(j, "first_conv_bias", c.first_conv_bias, where);
    read_optional(j, "conv_bias", c.conv_bias, where);
    read_optional(j, "bn_eps", c.bn_eps, where);
    read_optional(j, "bn_momentum", c.bn_momentum, where);
    read_optional(j, "init_std", c.init_std, where);
    c.validate();
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = nlohmann::json{{"phase_count", c.phase_count},
                       {"width_scale", c.width_scale},
                       {"input_side", c.input_side},
                       {"conv_bias", c.conv_bias},
                       {"init_std", c.init_std}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    const std::string where = "discriminator";
    reject_unknown_keys(j, {"phase_count", "width_scale", "input_side", "conv_bias", "init_std"}, where);
    read_optional(j, "phase_count", c.phase_count, where);
    read_optional(j, "width_scale", c.width_scale, where);
    read_optional(j, "input_side", c.input_side, where);
    read_optional(j, "conv_bias", c.conv_bias, where);
    read_optional(j, "init_std", c.init_std, where);
    c.validate();
}

namespace {

class Initializer {
public:
    Initializer(std::uint64_t seed, Init mode, double std) : rng_(seed), mode_(mode), std_(std) {}

    Tensor weight(Shape shape) {
        Tensor t(std::move(shape), 0.0);
        if (mode_ == Init::Random)
            for (auto& v : t.values()) v = std_ * rng_.normal();
        t.set_requires_grad();
        return t;
    }
    static Tensor constant(std::int64_t n, double v) {
        Tensor t(Shape{n}, v);
        t.set_requires_grad();
        return t;
    }

private:
    Rng rng_;
    Init mode_;
    double std_;
};

Conv3dLayer make_conv(Initializer& init, int cin, int cout, int k, int stride, int pad, bool bias) {
    Conv3dLayer l;
    l.weight = init.weight({cout, cin, k, k, k});
    if (bias) l.bias = Initializer::constant(cout, 0.0);
    l.geom = ConvGeom::uniform(stride, pad);
    return l;
}

BatchNormLayer make_bn(int c, const GeneratorConfig& cfg) {
    BatchNormLayer l;
    l.gamma = Initializer::constant(c, 1.0);
    l.beta = Initializer::constant(c, 0.0);
    l.stats = {Tensor(Shape{c}, 0.0), Tensor(Shape{c}, 1.0)};
    l.eps = cfg.bn_eps;
    l.momentum = cfg.bn_momentum;
    return l;
}

void push_conv(std::vector<NamedTensor>& out, const std::string& name, const Tensor& w, const Tensor& b) {
    out.push_back({name + ".weight", w});
    if (b.defined()) out.push_back({name + ".bias", b});
}

void push_bn(std::vector<NamedTensor>& out, const std::string& name, const BatchNormLayer& bn) {
    out.push_back({name + ".gamma", bn.gamma});
    out.push_back({name + ".beta", bn.beta});
}

}  // namespace

Generator::Generator(GeneratorConfig cfg, std::uint64_t seed, Init init) : cfg_(cfg) {
    cfg_.validate();
    Initializer in(seed, init, cfg_.init_std);
    const int c512 = scaled_channels(512, cfg_.width_scale);
    const int c256 = scaled_channels(256, cfg_.width_scale);
    const int c128 = scaled_channels(128, cfg_.width_scale);
    const int c64 = scaled_channels(64, cfg_.width_scale);
    const int c32 = scaled_channels(32, cfg_.width_scale);

    conv_in_ = make_conv(in, cfg_.input_channels(), c512, 3, 1, 1, cfg_.first_conv_bias);
    bn_in_ = make_bn(c512, cfg_);
    res_.conv_a = make_conv(in, c512, c512, 3, 1, 1, cfg_.conv_bias);
    res_.bn_a = make_bn(c512, cfg_);
    res_.conv_b = make_conv(in, c512, c512, 3, 1, 1, cfg_.conv_bias);
    res_.bn_b = make_bn(c512, cfg_);
    conv_up1_ = make_conv(in, c512, c256, 3, 1, 1, cfg_.conv_bias);
    bn_up1_ = make_bn(c256, cfg_);
    convt_.weight = in.weight({c256, c128, 4, 4, 4});
    if (cfg_.conv_bias) convt_.bias = Initializer::constant(c128, 0.0);
    convt_.geom = ConvGeom::uniform(2, 1);
    bn_t_ = make_bn(c128, cfg_);
    conv_mid_ = make_conv(in, c128, c64, 3, 1, 1, cfg_.conv_bias);
    bn_mid_ = make_bn(c64, cfg_);
    conv_up2_ = make_conv(in, c64, c32, 3, 1, 1, cfg_.conv_bias);
    bn_up2_ = make_bn(c32, cfg_);
    conv_out_ = make_conv(in, c32, cfg_.phase_count, 3, 1, 1, cfg_.conv_bias);
}

Tensor Generator::forward(const Tensor& x, bool training) {
    if (x.ndim() != 5) throw ShapeError("generator expects [B, C, s, s, s], got " + ad::to_string(x.shape()));
    if (x.dim(1) != cfg_.input_channels()) {
        std::ostringstream os;
        os << "generator expects " << cfg_.input_channels() << " input channels, got " << x.dim(1);
        throw ShapeError(os.str());
    }
    if (x.dim(2) != x.dim(3) || x.dim(3) != x.dim(4))
        throw ShapeError("generator input must be cubic, got " + ad::to_string(x.shape()));

    using ad::relu;
    Tensor h = relu(bn_in_(conv_in_(x), training));
    Tensor r = relu(res_.bn_a(res_.conv_a(h), training));
    r = res_.bn_b(res_.conv_b(r), training);
    h = relu(ad::add(h, r));
    h = ad::upsample_nearest(h, 2);
    h = relu(bn_up1_(conv_up1_(h), training));
    h = relu(bn_t_(convt_(h), training));
    h = relu(bn_mid_(conv_mid_(h), training));
    h = ad::upsample_nearest(h, 2);
    h = relu(bn_up2_(conv_up2_(h), training));
    return ad::softmax_channels(conv_out_(h));
}

std::vector<NamedTensor> Generator::parameters() const {
    std::vector<NamedTensor> p;
    push_conv(p, "conv_in", conv_in_.weight, conv_in_.bias);
    push_bn(p, "bn_in", bn_in_);
    push_conv(p, "res.conv_a", res_.conv_a.weight, res_.conv_a.bias);
    push_bn(p, "res.bn_a", res_.bn_a);
    push_conv(p, "res.conv_b", res_.conv_b.weight, res_.conv_b.bias);
    push_bn(p, "res.bn_b", res_.bn_b);
    push_conv(p, "conv_up1", conv_up1_.weight, conv_up1_.bias);
    push_bn(p, "bn_up1", bn_up1_);
    push_conv(p, "convt", convt_.weight, convt_.bias);
    push_bn(p, "bn_t", bn_t_);
    push_conv(p, "conv_mid", conv_mid_.weight, conv_mid_.bias);
    push_bn(p, "bn_mid", bn_mid_);
    push_conv(p, "conv_up2", conv_up2_.weight, conv_up2_.bias);
    push_bn(p, "bn_up2", bn_up2_);
    push_conv(p, "conv_out", conv_out_.weight, conv_out_.bias);
    return p;
}

std::vector<NamedTensor> Generator::buffers() const {
    std::vector<NamedTensor> b;
    auto add = [&](const std::string& name, const BatchNormLayer& bn) {
        b.push_back({name + ".running_mean", bn.stats.running_mean});
        b.push_back({name + ".running_var", bn.stats.running_var});
    };
    add("bn_in", bn_in_);
    add("res.bn_a", res_.bn_a);
    add("res.bn_b", res_.bn_b);
    add("bn_up1", bn_up1_);
    add("bn_t", bn_t_);
    add("bn_mid", bn_mid_);
    add("bn_up2", bn_up2_);
    return b;
}

ParamTable Generator::param_table() const {
    ParamTable t;
    const std::int64_t s = cfg_.input_side;
    auto row = [&](std::string name, std::string act, std::int64_t c, std::int64_t side, std::int64_t n) {
        t.rows.push_back({std::move(name), std::move(act), {c, side, side, side}, n});
        t.total += n;
    };
    const std::int64_t c512 = conv_in_.weight.dim(0);
    const std::int64_t c256 = conv_up1_.weight.dim(0);
    const std::int64_t c128 = convt_.weight.dim(1);
    const std::int64_t c64 = conv_mid_.weight.dim(0);
    const std::int64_t c32 = conv_up2_.weight.dim(0);
    row("Conv3d", "-", c512, s, conv_in_.param_count());
    row("BatchNorm3d", "ReLU", c512, s, bn_in_.param_count());
    row("Residual Block", "ReLU", c512, s, res_.param_count());
    row("Upsample", "-", c512, 2 * s, 0);
    row("Conv3d", "-", c256, 2 * s, conv_up1_.param_count());
    row("BatchNorm3d", "ReLU", c256, 2 * s, bn_up1_.param_count());
    row("ConvTranspose3d", "-", c128, 4 * s, convt_.param_count());
    row("BatchNorm3d", "ReLU", c128, 4 * s, bn_t_.param_count());
    row("Conv3d", "-", c64, 4 * s, conv_mid_.param_count());
    row("BatchNorm3d", "ReLU", c64, 4 * s, bn_mid_.param_count());
    row("Upsample", "-", c64, 8 * s, 0);
    row("Conv3d", "-", c32, 8 * s, conv_up2_.param_count());
    row("BatchNorm3d", "ReLU", c32, 8 * s, bn_up2_.param_count());
    row("Conv3d", "-", cfg_.phase_count, 8 * s, conv_out_.param_count());
    row("Softmax", "-", cfg_.phase_count, 8 * s, 0);
    return t;
}

int Generator::receptive_radius() {
    // Walk the layers from the output back to the input; r is the radius at
    // the current resolution level.
    int r = 0;
    r += 1;                // conv_out, k3
    r += 1;                // conv_up2, k3
    r = (r + 1) / 2;       // nearest upsample: ceil(r / 2)
    r += 1;                // conv_mid
    r = r / 2 + 1;         // transposed conv k4 s2 p1
    r += 1;                // conv_up1
    r = (r + 1) / 2;       // nearest upsample
    r += 2;                // residual block convs
    r += 1;                // conv_in
    return r;
}

Discriminator::Discriminator(DiscriminatorConfig cfg, std::uint64_t seed, Init init) : cfg_(cfg) {
    cfg_.validate();
    Initializer in(seed, init, cfg_.init_std);
    static constexpr int kBase[6] = {16, 32, 64, 128, 256, 512};
    int cin = cfg_.phase_count;
    for (int i = 0; i < cfg_.stages(); ++i) {
        const int cout = scaled_channels(kBase[i], cfg_.width_scale);
        Stage s;
        s.weight = in.weight({cout, cin, 4, 4});
        if (cfg_.conv_bias) s.bias = Initializer::constant(cout, 0.0);
        stages_.push_back(s);
        cin = cout;
    }
    Stage last;
    last.weight = in.weight({1, cin, 4, 4});
    if (cfg_.conv_bias) last.bias = Initializer::constant(1, 0.0);
    stages_.push_back(last);
}

Tensor Discriminator::forward(const Tensor& batch) const {
    if (batch.ndim() != 4 || batch.dim(1) != cfg_.phase_count || batch.dim(2) != cfg_.input_side ||
        batch.dim(3) != cfg_.input_side) {
        std::ostringstream os;
        os << "discriminator expects [N, " << cfg_.phase_count << ", " << cfg_.input_side << ", "
           << cfg_.input_side << "], got " << ad::to_string(batch.shape());
        throw ShapeError(os.str());
    }
    Tensor h = batch;
    for (std::size_t i = 0; i + 1 < stages_.size(); ++i)
        h = ad::relu(ad::conv2d(h, stages_[i].weight, stages_[i].bias, 2, 1));
    h = ad::conv2d(h, stages_.back().weight, stages_.back().bias, 1, 0);
    return ad::reshape(h, {batch.dim(0)});
}

std::vector<NamedTensor> Discriminator::parameters() const {
    std::vector<NamedTensor> p;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const std::string name = "conv" + std::to_string(i);
        push_conv(p, name, stages_[i].weight, stages_[i].bias);
    }
    return p;
}

ParamTable Discriminator::param_table() const {
    ParamTable t;
    std::int64_t side = cfg_.input_side;
    for (std::size_t i = 0; i < stages_.size(); ++i) {
        const bool last = i + 1 == stages_.size();
        side = last ? 1 : side / 2;
        const auto& s = stages_[i];
        const std::int64_t n = s.weight.numel() + (s.bias.defined() ? s.bias.numel() : 0);
        t.rows.push_back({"Conv2d", last ? "-" : "ReLU", {s.weight.dim(0), side, side}, n});
        t.total += n;
    }
    return t;
}

std::uint64_t parameter_checksum(const std::vector<NamedTensor>& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : params)
        for (ad::Scalar v : p.tensor.values()) {
            h ^= std::bit_cast<std::uint64_t>(v);
            h *= 0x100000001b3ULL;
        }
    return h;
}

}  // namespace voxsr
