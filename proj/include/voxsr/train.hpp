#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsr/autodiff/optim.hpp"
#include "voxsr/model.hpp"
#include "voxsr/rng.hpp"
#include "voxsr/segvol.hpp"

namespace voxsr {

enum class GpMode { Exact, FiniteDifference };

std::string to_string(GpMode m);
GpMode parse_gp_mode(const std::string& s);

struct Hyperparams {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int epochs = 200;
    int iters_per_epoch = 0;  // 0: LR voxels / generator input voxels
    double c = 10.0;          // voxel-wise loss weight
    double lambda = 10.0;     // gradient penalty weight
    int d_batch_real = 128;
    int g_batch = 2;
    double noise_std = 1.0;
    std::uint64_t seed = 0;
    GpMode gp_mode = GpMode::Exact;
    double gp_fd_step = 1e-3;
    bool strict_alg1 = false;  // count the voxel-wise term once instead of once per plane

    void validate() const;
    ad::AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }
};

void to_json(nlohmann::json& j, const Hyperparams& h);
void from_json(const nlohmann::json& j, Hyperparams& h);

enum class Plane { XY = 0, XZ = 1, YZ = 2 };
const char* plane_name(Plane p);

/// One row of the loss log. D-step rows carry l_D and l_gp; the generator row
/// (plane == -1) carries l_G and l_vw. Absent values are NaN.
struct LossRow {
    int epoch = 0;
    std::int64_t iter = 0;
    int plane = -1;
    double l_d = 0, l_gp = 0, l_g = 0, l_vw = 0;
};

std::string loss_csv(const std::vector<LossRow>& rows);

/// Stacked one-hot tensor [B, P, s, s, s] of equally sized cubes.
ad::Tensor one_hot_tensor(const std::vector<SegmentedVolume>& cubes);

/// One-hot cubes with one N(0, noise_std²) noise channel appended: [B, P + 1, s, s, s].
ad::Tensor make_generator_input(const std::vector<SegmentedVolume>& cubes, Rng& rng, double noise_std = 1.0);

/// Slices a [B, P, m, m, m] volume batch into [B*m, P, m, m] images along one plane.
ad::Tensor plane_slices(const ad::Tensor& sr, Plane plane);

using Critic = std::function<ad::Tensor(const ad::Tensor&)>;

/// lambda * mean over samples of (||grad_x D(x_hat)|| - 1)^2 with
/// x_hat = eps * real + (1 - eps) * fake, eps ~ U[0, 1) per sample.
ad::Tensor gradient_penalty(const Critic& d, const ad::Tensor& real, const ad::Tensor& fake, Rng& rng,
                            double lambda, GpMode mode = GpMode::Exact, double fd_step = 1e-3);

/// MSE between the LR one-hot cubes and the corner-subsampled SR probabilities.
ad::Tensor voxelwise_loss(const ad::Tensor& lr_onehot, const ad::Tensor& sr);

struct DLoss {
    ad::Tensor l_d;
    ad::Tensor l_gp;
};
/// l_D = mean(D(fake)) - mean(D(real)) + l_gp as a differentiable scalar.
DLoss discriminator_loss(const Critic& critic, const ad::Tensor& fake, const ad::Tensor& real, Rng& rng,
                         const Hyperparams& hp);

struct DStepLosses {
    double l_d = 0;
    double l_gp = 0;
};

/// l_D = mean(D(fake)) - mean(D(real)) + l_gp, then one Adam step on D.
/// `fake` must not carry a graph back into the generator.
DStepLosses discriminator_step(Discriminator& d, ad::Adam& opt_d, const ad::Tensor& fake, const ad::Tensor& real,
                               Rng& rng, const Hyperparams& hp);
/// Same step for an arbitrary critic whose parameters are owned by `opt_d`.
DStepLosses discriminator_step(const Critic& critic, ad::Adam& opt_d, const ad::Tensor& fake,
                               const ad::Tensor& real, Rng& rng, const Hyperparams& hp);

struct GLoss {
    ad::Tensor l_g;
    ad::Tensor l_vw;
};
/// l_G = sum over planes of [-mean(D(slices)) + c * l_vw] as a differentiable scalar.
GLoss generator_loss(const Discriminator& d, const ad::Tensor& sr, const ad::Tensor& lr_onehot,
                     const Hyperparams& hp);

struct GStepLosses {
    double l_g = 0;
    double l_vw = 0;
};

/// l_G = sum over planes of [-mean(D(slices)) + c * l_vw] and one Adam step on
/// G. `sr` must be the differentiable generator output for `lr_onehot`.
GStepLosses generator_step(ad::Adam& opt_g, const Discriminator& d, const ad::Tensor& sr,
                           const ad::Tensor& lr_onehot, const Hyperparams& hp);

/// LR volume plus the (already augmented) HR image pool. The pool is stored
/// in a canonical order so sampling does not depend on how it was supplied.
struct TrainData {
    SegmentedVolume lr;
    std::vector<SegmentedImage2D> hr_pool;

    TrainData(SegmentedVolume lr_volume, std::vector<SegmentedImage2D> pool);
};

/// Every image of `pool` under the eight square symmetries.
std::vector<SegmentedImage2D> augment_pool(const std::vector<SegmentedImage2D>& pool);

/// [n, P, m, m] one-hot crops drawn uniformly from the pool.
ad::Tensor sample_real_batch(const TrainData& data, int n, int side, Rng& rng);

struct TrainState {
    Hyperparams hp;
    Generator g;
    Discriminator d;
    ad::Adam opt_g;
    ad::Adam opt_d;
    Rng rng;
    int epoch = 0;          // completed epochs
    std::int64_t iter = 0;  // completed iterations in total
    std::vector<LossRow> history;

    TrainState(const GeneratorConfig& gc, const DiscriminatorConfig& dc, const Hyperparams& hp,
               Init init = Init::Random);
};

int iterations_per_epoch(const TrainState& st, const TrainData& data);

/// One training iteration (three critic steps, one generator step); appends
/// four rows to st.history.
void train_iteration(TrainState& st, const TrainData& data);

struct TrainOutput {
    std::filesystem::path dir;  // empty: keep everything in memory
    std::function<void(const TrainState&)> on_epoch;
};

/// Runs epochs st.epoch+1 .. hp.epochs. After each epoch a checkpoint
/// checkpoint_epoch_NNNN.vsrw is written and losses.csv is rewritten.
void train_loop(TrainState& st, const TrainData& data, const TrainOutput& out = {});

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch);

void save_checkpoint(const std::filesystem::path& path, const TrainState& st);
std::vector<std::uint8_t> encode_checkpoint(const TrainState& st);
TrainState decode_checkpoint(std::span<const std::uint8_t> bytes);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace voxsr
