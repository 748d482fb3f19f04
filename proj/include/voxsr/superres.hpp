#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "voxsr/model.hpp"
#include "voxsr/segvol.hpp"

namespace voxsr {

struct SuperresOptions {
    int tile_side = 16;         // LR voxels per read window edge
    int halo = 2;
    int median_iterations = 2;  // 0 disables the final filter
    LabelFilter filter = LabelFilter::Median;
    double noise_std = 1.0;
    /// Normalise each tile with its own batch statistics instead of the running ones.
    bool batch_stats = false;
    std::uint64_t seed = 0;
    /// Processing order as a permutation of tile indices; empty means plan order.
    std::vector<std::size_t> order;

    void validate() const;
};

void to_json(nlohmann::json& j, const SuperresOptions& o);
void from_json(const nlohmann::json& j, SuperresOptions& o);

struct SuperresResult {
    SegmentedVolume raw;  // stitched argmax labels
    SegmentedVolume sr;   // after the median filter
    std::size_t tiles = 0;
};

/// 8x super-resolution of `lr` in tiles. The noise channel at LR voxel v is
/// hashed_normal(seed, index(v)), so every tile sees the same noise for the
/// same voxel whatever the plan or processing order.
SuperresResult super_resolve(Generator& g, const SegmentedVolume& lr, const SuperresOptions& opt);

/// Labels of a [1, P, X, Y, Z] probability tensor (lowest index wins ties).
SegmentedVolume argmax_labels(const ad::Tensor& probs, double voxel_size_um);

}  // namespace voxsr
