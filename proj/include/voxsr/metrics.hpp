#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsr/rng.hpp"
#include "voxsr/segvol.hpp"

namespace voxsr {

// Axes of extent 1 are treated as absent, so a single-slice volume
// (1 x ny x nz) is measured as a 2D image.

std::vector<std::int64_t> phase_counts(const SegmentedVolume& v);
std::vector<double> volume_fraction(const SegmentedVolume& v);

enum class SurfaceNormalization {
    PairRelative,  // each pair's faces over all differing faces
    PerPhase,      // faces of pair (i, j) over all interface faces of phase i
};

struct SurfaceArea {
    int phase_count = 0;
    /// Differing-label faces per unordered pair, indexed by pair_index(i, j).
    std::vector<std::int64_t> pair_faces;
    std::int64_t total_faces = 0;
    bool has_interfaces = false;
    /// PairRelative: one value per pair. PerPhase: P*P matrix, row i = phase i.
    std::vector<double> fractions;
};

/// Index of the unordered pair (i, j), i != j, in the order (0,1), (0,2), ..., (1,2), ...
int pair_index(int i, int j, int phase_count);
std::pair<int, int> pair_from_index(int k, int phase_count);
int pair_count(int phase_count);

SurfaceArea relative_surface_area(const SegmentedVolume& v,
                                  SurfaceNormalization norm = SurfaceNormalization::PairRelative);

struct TwoPointCorrelation {
    int phase = 0;
    /// Pooled over axes: sum of matching pairs / sum of pairs, r = 0..R.
    std::vector<double> s2;
    /// Per axis x, y, z; empty for axes of extent 1.
    std::array<std::vector<double>, 3> per_axis;
};

/// S2_i(r) for r = 0..max_lag along the axis directions. Non-periodic mode
/// counts only in-bounds pairs.
TwoPointCorrelation two_point_correlation(const SegmentedVolume& v, int phase, int max_lag, bool periodic = false);

/// Linear interpolation of an S2 curve sampled at lags 0, 1, ... voxels of size
/// `voxel_size`, evaluated at a physical distance. Throws beyond the last lag.
double s2_at_distance(const std::vector<double>& s2, double voxel_size, double distance);

struct PatchStats {
    std::vector<double> mean;
    std::vector<double> variance;  // sample variance, 1/(k-1); 0 when k == 1
    int count = 0;
    int side = 0;
};

using PatchMetric = std::function<std::vector<double>(const SegmentedVolume&)>;

/// Draws `count` patches (uniform element, then uniform origin), applies the
/// metric to each and reports the per-component mean and sample variance.
/// Patches span `side` voxels along every axis of extent > 1.
PatchStats patch_statistics(const std::vector<SegmentedVolume>& dataset, int count, int side,
                            const PatchMetric& metric, Rng& rng);

struct EvalSpec {
    int patch_count = 256;
    int patch_side = 64;
    int max_lag = 8;
    bool periodic = false;
    std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const EvalSpec& s);
void from_json(const nlohmann::json& j, EvalSpec& s);

struct MetricReport {
    std::string name;
    int phase_count = 0;
    double voxel_size = 1.0;
    EvalSpec spec;
    std::vector<double> volume_fraction;  // whole dataset
    SurfaceArea surface;                  // whole dataset, pair-relative
    std::vector<TwoPointCorrelation> s2;  // whole dataset, per phase
    PatchStats vf_patches;                // per phase
    PatchStats surface_patches;           // per pair
    std::vector<PatchStats> s2_patches;   // per phase, per lag
};

/// Full metric suite on a dataset (one volume, or a stack of 2D images each
/// stored as a 1 x n x n volume). Whole-dataset values pool counts over elements.
MetricReport evaluate(const std::vector<SegmentedVolume>& dataset, const std::string& name, const EvalSpec& spec);

nlohmann::json report_json(const MetricReport& r);
/// One row per phase, pair and lag: metric,item,lag_voxels,lag_um,value,patch_mean,patch_variance
std::string report_csv(const MetricReport& r);

}  // namespace voxsr
