#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "voxsr/rng.hpp"
#include "voxsr/segvol.hpp"

namespace voxsr {

enum Phase : Label { kPore = 0, kQuartz = 1, kFeldspar = 2, kClay = 3 };

struct SynthSpec {
    int side = 128;                      // HR voxels per edge, multiple of 8
    double voxel_size_um = 0.4375;
    double target_pore_fraction = 0.2;
    double quartz_radius_min = 4.0;      // spheres
    double quartz_radius_max = 9.0;
    double feldspar_axis_min = 3.0;      // ellipsoid semi-axes
    double feldspar_axis_max = 11.0;
    double feldspar_share = 0.4;         // probability a grain is feldspar
    int clay_shell = 2;                  // clay coating thickness in voxels
    int channel_count = 150;             // thin straight pore channels
    double channel_radius = 1.5;
    double lr_mislabel_rate = 0.0;       // feldspar -> quartz flips in the LR volume
    int pool_count = 64;                 // HR 2D crops
    int pool_side = 64;
    std::uint64_t seed = 1;

    void validate() const;
};

void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

/// Deterministic 4-phase microstructure: clay-coated quartz spheres and
/// feldspar ellipsoids packed until the pore fraction reaches the target,
/// crossed by thin pore channels.
SegmentedVolume generate_hr(const SynthSpec& spec);

/// Modal label of every 8^3 block (ties to the lowest label), voxel size x8,
/// then feldspar relabelled as quartz with probability rho per LR voxel.
SegmentedVolume derive_lr(const SegmentedVolume& hr, double rho = 0.0, std::uint64_t seed = 0);

struct PoolCrop {
    SegmentedImage2D image;
    int plane = 0;   // 0: xy (fixed z), 1: xz (fixed y), 2: yz (fixed x)
    int slice = 0;   // index along the fixed axis
    int u0 = 0, v0 = 0;
};

/// Random axis-aligned square crops over all three plane orientations.
std::vector<PoolCrop> extract_hr_crops(const SegmentedVolume& hr, int count, int side, Rng& rng);
std::vector<SegmentedImage2D> extract_hr_pool(const SegmentedVolume& hr, int count, int side, Rng& rng);

}  // namespace voxsr
