#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsr/autodiff/ops.hpp"
#include "voxsr/autodiff/optim.hpp"

namespace voxsr {

using ad::NamedTensor;
using ad::Tensor;

/// max(1, round(w * c)).
int scaled_channels(int base, double width_scale);

struct GeneratorConfig {
    int phase_count = 4;
    int noise_channels = 1;
    double width_scale = 1.0;
    int input_side = 32;
    bool first_conv_bias = false;
    bool conv_bias = true;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
    double init_std = 0.02;

    int input_channels() const { return phase_count + noise_channels; }
    int output_side() const { return 8 * input_side; }
    void validate() const;
};

struct DiscriminatorConfig {
    int phase_count = 4;
    double width_scale = 1.0;
    int input_side = 256;
    bool conv_bias = true;
    double init_std = 0.02;

    /// Stride-2 stages needed to bring input_side down to 4.
    int stages() const;
    void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

enum class Init { Random, Zeros };

struct LayerRow {
    std::string layer;
    std::string activation;
    std::vector<std::int64_t> output_shape;  // per sample
    std::int64_t params = 0;
};

struct ParamTable {
    std::vector<LayerRow> rows;
    std::int64_t total = 0;
};

struct Conv3dLayer {
    Tensor weight;
    Tensor bias;  // undefined when the layer has no bias
    ad::ConvGeom geom;

    Tensor operator()(const Tensor& x) const { return ad::conv3d(x, weight, bias, geom); }
    std::int64_t param_count() const { return weight.numel() + (bias.defined() ? bias.numel() : 0); }
};

struct ConvTranspose3dLayer {
    Tensor weight;  // [Cin, Cout, k, k, k]
    Tensor bias;
    ad::ConvGeom geom;

    Tensor operator()(const Tensor& x) const { return ad::conv_transpose3d(x, weight, bias, geom); }
    std::int64_t param_count() const { return weight.numel() + (bias.defined() ? bias.numel() : 0); }
};

struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    ad::BatchNormStats stats;
    double eps = 1e-5;
    double momentum = 0.1;

    Tensor operator()(const Tensor& x, bool training) {
        return ad::batch_norm(x, gamma, beta, stats, {training, momentum, eps});
    }
    std::int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

/// conv → BN → ReLU → conv → BN, added to the input, then ReLU.
struct ResidualBlock {
    Conv3dLayer conv_a;
    BatchNormLayer bn_a;
    Conv3dLayer conv_b;
    BatchNormLayer bn_b;

    std::int64_t param_count() const {
        return conv_a.param_count() + bn_a.param_count() + conv_b.param_count() + bn_b.param_count();
    }
};

/// 3D generator: (P + noise) × s³ → P × (8s)³ channel probabilities.
class Generator {
public:
    explicit Generator(GeneratorConfig cfg, std::uint64_t seed = 0, Init init = Init::Random);

    /// x: [B, P + noise, s, s, s]. Training mode uses and updates batch statistics.
    Tensor forward(const Tensor& x, bool training);

    const GeneratorConfig& config() const { return cfg_; }
    std::vector<NamedTensor> parameters() const;
    /// Running batch-norm statistics, in a fixed order.
    std::vector<NamedTensor> buffers() const;
    ParamTable param_table() const;

    /// Conservative radius, in input voxels, of the input region that can
    /// influence one output voxel.
    static int receptive_radius();

private:
    GeneratorConfig cfg_;
    Conv3dLayer conv_in_;
    BatchNormLayer bn_in_;
    ResidualBlock res_;
    Conv3dLayer conv_up1_;
    BatchNormLayer bn_up1_;
    ConvTranspose3dLayer convt_;
    BatchNormLayer bn_t_;
    Conv3dLayer conv_mid_;
    BatchNormLayer bn_mid_;
    Conv3dLayer conv_up2_;
    BatchNormLayer bn_up2_;
    Conv3dLayer conv_out_;
};

/// 2D critic: P × m × m → one unbounded score per image.
class Discriminator {
public:
    explicit Discriminator(DiscriminatorConfig cfg, std::uint64_t seed = 0, Init init = Init::Random);

    /// batch: [N, P, m, m] → [N].
    Tensor forward(const Tensor& batch) const;

    const DiscriminatorConfig& config() const { return cfg_; }
    std::vector<NamedTensor> parameters() const;
    ParamTable param_table() const;

private:
    struct Stage {
        Tensor weight;
        Tensor bias;
    };
    DiscriminatorConfig cfg_;
    std::vector<Stage> stages_;  // stride-2 stages followed by the final 4x4 → 1 conv
};

/// Order-sensitive checksum over parameter values; used to assert that a
/// training step left a model untouched.
std::uint64_t parameter_checksum(const std::vector<NamedTensor>& params);

}  // namespace voxsr
