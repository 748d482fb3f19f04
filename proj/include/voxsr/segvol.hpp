#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "voxsr/rng.hpp"

namespace voxsr {

using Label = std::uint8_t;

struct Dims3 {
    int nx = 0, ny = 0, nz = 0;

    std::int64_t voxels() const { return std::int64_t{nx} * ny * nz; }
    bool cubic() const { return nx == ny && ny == nz; }
    bool operator==(const Dims3&) const = default;
};

/// 3D grid of phase labels, row-major with z fastest: index = (x*ny + y)*nz + z.
class SegmentedVolume {
public:
    SegmentedVolume() = default;
    SegmentedVolume(Dims3 dims, int phase_count, double voxel_size_um, Label fill = 0);
    SegmentedVolume(Dims3 dims, int phase_count, double voxel_size_um, std::vector<Label> labels);

    const Dims3& dims() const { return dims_; }
    int phase_count() const { return phase_count_; }
    double voxel_size() const { return voxel_size_; }
    void set_voxel_size(double um);

    std::int64_t index(int x, int y, int z) const {
        return (std::int64_t{x} * dims_.ny + y) * dims_.nz + z;
    }
    Label at(int x, int y, int z) const { return labels_[index(x, y, z)]; }
    void set(int x, int y, int z, Label l) { labels_[index(x, y, z)] = l; }

    std::span<const Label> labels() const { return labels_; }
    std::span<Label> labels() { return labels_; }

    bool operator==(const SegmentedVolume&) const = default;

private:
    void validate() const;

    Dims3 dims_;
    int phase_count_ = 4;
    double voxel_size_ = 1.0;
    std::vector<Label> labels_;
};

/// 2D label image, row-major: index = x*ny + y.
class SegmentedImage2D {
public:
    SegmentedImage2D() = default;
    SegmentedImage2D(int nx, int ny, int phase_count, Label fill = 0);
    SegmentedImage2D(int nx, int ny, int phase_count, std::vector<Label> labels);

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int phase_count() const { return phase_count_; }
    Label at(int x, int y) const { return labels_[std::int64_t{x} * ny_ + y]; }
    void set(int x, int y, Label l) { labels_[std::int64_t{x} * ny_ + y] = l; }
    std::span<const Label> labels() const { return labels_; }
    std::span<Label> labels() { return labels_; }

    bool operator==(const SegmentedImage2D&) const = default;

private:
    int nx_ = 0, ny_ = 0;
    int phase_count_ = 4;
    std::vector<Label> labels_;
};

/// Channel-major per-voxel phase probabilities: values[(c*nx + x)*ny + y)*nz + z].
struct OneHotVolume {
    int channels = 0;
    Dims3 dims;
    std::vector<float> values;

    OneHotVolume() = default;
    OneHotVolume(int c, Dims3 d) : channels(c), dims(d), values(static_cast<std::size_t>(c * d.voxels()), 0.f) {}

    std::int64_t index(int c, int x, int y, int z) const {
        return ((std::int64_t{c} * dims.nx + x) * dims.ny + y) * dims.nz + z;
    }
    float at(int c, int x, int y, int z) const { return values[index(c, x, y, z)]; }
    float& at(int c, int x, int y, int z) { return values[index(c, x, y, z)]; }
};

OneHotVolume one_hot_encode(const SegmentedVolume& v);
/// Argmax over channels, lowest channel wins ties.
SegmentedVolume one_hot_decode(const OneHotVolume& o, double voxel_size_um = 1.0);

/// One C×n×n slab of a plane stack; values[(c*n + i)*n + j].
struct ChannelSlab {
    int channels = 0;
    int side = 0;
    std::vector<float> values;

    float at(int c, int i, int j) const { return values[(std::int64_t{c} * side + i) * side + j]; }
};

struct PlaneStacks {
    std::vector<ChannelSlab> xy;  ///< xy[k](c,i,j) = o(c,i,j,k)
    std::vector<ChannelSlab> xz;  ///< xz[k](c,i,j) = o(c,i,k,j)
    std::vector<ChannelSlab> yz;  ///< yz[k](c,i,j) = o(c,k,i,j)
};

PlaneStacks slice_planes(const OneHotVolume& o);

enum class DownsampleAnchor { Corner, Center };

/// Nearest-neighbour subsampling by f: out(x) = o(f*x) (Corner) or o(f*x + f/2) (Center).
OneHotVolume downsample_nn(const OneHotVolume& o, int factor,
                           DownsampleAnchor anchor = DownsampleAnchor::Corner);
/// Replicates each voxel into an f^3 block.
OneHotVolume upsample_replicate(const OneHotVolume& o, int factor);

enum class LabelFilter { Median, Mode };

/// k passes of a 3^3 filter over label codes with edge replication.
SegmentedVolume median_filter_3d(const SegmentedVolume& v, int iterations,
                                 LabelFilter kind = LabelFilter::Median);

std::array<int, 3> sample_origin(const Dims3& dims, int side, Rng& rng);
SegmentedVolume extract_subvolume(const SegmentedVolume& v, std::array<int, 3> origin, int side);
SegmentedVolume sample_subvolume(const SegmentedVolume& v, int side, Rng& rng);

SegmentedImage2D rotate90(const SegmentedImage2D& img);
SegmentedImage2D mirror(const SegmentedImage2D& img);
/// Rotations by 0/90/180/270 of the image, then the same four of its mirror.
std::vector<SegmentedImage2D> augment_d4(const SegmentedImage2D& img);

/// Label → gray {0, 85, 170, 255}; four-phase data only.
std::vector<std::uint8_t> grayscale_encode(std::span<const Label> labels, int phase_count);
std::vector<std::uint8_t> grayscale_encode(const SegmentedVolume& v);
std::vector<std::uint8_t> grayscale_encode(const SegmentedImage2D& img);

/// Gray → label with bins [-30,45) [45,130) [130,210) [210,275].
Label grayscale_label(double gray);
SegmentedVolume grayscale_decode(std::span<const double> gray, Dims3 dims, double voxel_size_um);
SegmentedImage2D grayscale_decode(std::span<const double> gray, int nx, int ny);

struct Box {
    std::array<int, 3> lo{};
    std::array<int, 3> hi{};  ///< exclusive

    std::int64_t voxels() const {
        return std::int64_t{hi[0] - lo[0]} * (hi[1] - lo[1]) * (hi[2] - lo[2]);
    }
    bool contains(const Box& b) const {
        for (int a = 0; a < 3; ++a)
            if (b.lo[a] < lo[a] || b.hi[a] > hi[a]) return false;
        return true;
    }
    bool operator==(const Box&) const = default;
};

struct Tile {
    Box read;
    Box write;
};

/// Tiles for processing a volume in side-s windows. Write windows partition the
/// volume and sit at least h voxels inside every read face that is not a volume
/// face. Emitted in lexicographic (x, y, z) order of write windows.
std::vector<Tile> tile_plan(const Dims3& dims, int tile_side, int halo);

}  // namespace voxsr
