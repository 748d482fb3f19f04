#include "voxsr/superres.hpp"

#include <algorithm>

#include "voxsr/error.hpp"
#include "voxsr/json_util.hpp"

namespace voxsr {

void SuperresOptions::validate() const {
    if (tile_side < 1) throw ConfigError("superres.tile_side must be >= 1");
    if (halo < 0) throw ConfigError("superres.halo must be >= 0");
    if (median_iterations < 0) throw ConfigError("superres.median_iterations must be >= 0");
    if (!(noise_std >= 0)) throw ConfigError("superres.noise_std must be >= 0");
}

void to_json(nlohmann::json& j, const SuperresOptions& o) {
    j = nlohmann::json{{"tile_side", o.tile_side},
                       {"halo", o.halo},
                       {"median_iterations", o.median_iterations},
                       {"filter", o.filter == LabelFilter::Median ? "median" : "mode"},
                       {"noise_std", o.noise_std},
                       {"batch_stats", o.batch_stats},
                       {"seed", o.seed}};
}

void from_json(const nlohmann::json& j, SuperresOptions& o) {
    const std::string where = "superres";
    reject_unknown_keys(j, {"tile_side", "halo", "median_iterations", "filter", "noise_std", "batch_stats", "seed"},
                        where);
    read_optional(j, "tile_side", o.tile_side, where);
    read_optional(j, "halo", o.halo, where);
    read_optional(j, "median_iterations", o.median_iterations, where);
    std::string filter = o.filter == LabelFilter::Median ? "median" : "mode";
    read_optional(j, "filter", filter, where);
    if (filter != "median" && filter != "mode") throw ConfigError("superres.filter must be 'median' or 'mode'");
    o.filter = filter == "median" ? LabelFilter::Median : LabelFilter::Mode;
    read_optional(j, "noise_std", o.noise_std, where);
    read_optional(j, "batch_stats", o.batch_stats, where);
    read_optional(j, "seed", o.seed, where);
    o.validate();
}

SegmentedVolume argmax_labels(const ad::Tensor& probs, double voxel_size_um) {
    const int P = static_cast<int>(probs.dim(1));
    const Dims3 d{static_cast<int>(probs.dim(2)), static_cast<int>(probs.dim(3)), static_cast<int>(probs.dim(4))};
    SegmentedVolume out(d, P, voxel_size_um);
    const std::int64_t vox = d.voxels();
    auto pv = probs.values();
    auto labels = out.labels();
    for (std::int64_t i = 0; i < vox; ++i) {
        int best = 0;
        for (int c = 1; c < P; ++c)
            if (pv[c * vox + i] > pv[best * vox + i]) best = c;
        labels[i] = static_cast<Label>(best);
    }
    return out;
}

SuperresResult super_resolve(Generator& g, const SegmentedVolume& lr, const SuperresOptions& opt) {
    opt.validate();
    const int P = g.config().phase_count;
    if (lr.phase_count() != P)
        throw DataError("incompatible checkpoint: model has " + std::to_string(P) + " phases, volume has " +
                        std::to_string(lr.phase_count()));
    const Dims3 d = lr.dims();
    // A tile never needs to be larger than the volume.
    const int s = std::min({opt.tile_side, d.nx, d.ny, d.nz});
    const std::vector<Tile> plan = tile_plan(d, s, opt.halo);

    std::vector<std::size_t> order = opt.order;
    if (order.empty()) {
        order.resize(plan.size());
        for (std::size_t i = 0; i < plan.size(); ++i) order[i] = i;
    }
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted.size() != plan.size() || sorted[i] != i)
            throw ConfigError("tile order is not a permutation of the " + std::to_string(plan.size()) + " tiles");

    SuperresResult res;
    res.raw = SegmentedVolume({8 * d.nx, 8 * d.ny, 8 * d.nz}, P, lr.voxel_size() / 8);
    res.tiles = plan.size();
    const std::int64_t svox = std::int64_t{s} * s * s;

    // Batch-statistics mode updates the running statistics as a side effect; undo that afterwards.
    std::vector<std::vector<double>> saved;
    for (const auto& b : g.buffers()) saved.emplace_back(b.tensor.values().begin(), b.tensor.values().end());

    ad::NoGradGuard no_grad;
    for (std::size_t t : order) {
        const Tile& tile = plan[t];
        ad::Tensor x(ad::Shape{1, P + 1, s, s, s}, 0.0);
        auto xv = x.values();
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < s; ++j)
                for (int k = 0; k < s; ++k) {
                    const int gx = tile.read.lo[0] + i, gy = tile.read.lo[1] + j, gz = tile.read.lo[2] + k;
                    const std::int64_t local = (std::int64_t{i} * s + j) * s + k;
                    xv[lr.at(gx, gy, gz) * svox + local] = 1.0;
                    xv[P * svox + local] =
                        opt.noise_std * hashed_normal(opt.seed, static_cast<std::uint64_t>(lr.index(gx, gy, gz)));
                }
        const SegmentedVolume out = argmax_labels(g.forward(x, opt.batch_stats), res.raw.voxel_size());
        for (int X = 8 * tile.write.lo[0]; X < 8 * tile.write.hi[0]; ++X)
            for (int Y = 8 * tile.write.lo[1]; Y < 8 * tile.write.hi[1]; ++Y)
                for (int Z = 8 * tile.write.lo[2]; Z < 8 * tile.write.hi[2]; ++Z)
                    res.raw.set(X, Y, Z,
                                out.at(X - 8 * tile.read.lo[0], Y - 8 * tile.read.lo[1], Z - 8 * tile.read.lo[2]));
    }
    auto buffers = g.buffers();
    for (std::size_t i = 0; i < buffers.size(); ++i) std::copy(saved[i].begin(), saved[i].end(), buffers[i].tensor.values().begin());
    res.sr = opt.median_iterations > 0 ? median_filter_3d(res.raw, opt.median_iterations, opt.filter) : res.raw;
    return res;
}

}  // namespace voxsr
