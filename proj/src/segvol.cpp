#include "voxsr/segvol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "voxsr/error.hpp"

namespace voxsr {

SegmentedVolume::SegmentedVolume(Dims3 dims, int phase_count, double voxel_size_um, Label fill)
    : SegmentedVolume(dims, phase_count, voxel_size_um,
                      std::vector<Label>(static_cast<std::size_t>(std::max<std::int64_t>(dims.voxels(), 0)), fill)) {}

SegmentedVolume::SegmentedVolume(Dims3 dims, int phase_count, double voxel_size_um,
                                 std::vector<Label> labels)
    : dims_(dims), phase_count_(phase_count), voxel_size_(voxel_size_um), labels_(std::move(labels)) {
    validate();
}

void SegmentedVolume::set_voxel_size(double um) {
    if (!(um > 0)) throw DataError("voxel size must be positive");
    voxel_size_ = um;
}

void SegmentedVolume::validate() const {
    if (dims_.nx <= 0 || dims_.ny <= 0 || dims_.nz <= 0)
        throw DataError("volume dimensions must be positive");
    if (phase_count_ <= 0 || phase_count_ > 256) throw DataError("phase count must be in [1, 256]");
    if (!(voxel_size_ > 0)) throw DataError("voxel size must be positive");
    if (static_cast<std::int64_t>(labels_.size()) != dims_.voxels())
        throw DataError("label count does not match dimensions");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] >= phase_count_) {
            std::ostringstream os;
            os << "label " << int(labels_[i]) << " at index " << i << " exceeds phase count "
               << phase_count_;
            throw DataError(os.str());
        }
    }
}

SegmentedImage2D::SegmentedImage2D(int nx, int ny, int phase_count, Label fill)
    : SegmentedImage2D(nx, ny, phase_count,
                       std::vector<Label>(static_cast<std::size_t>(std::max(nx, 0)) * std::max(ny, 0), fill)) {}

SegmentedImage2D::SegmentedImage2D(int nx, int ny, int phase_count, std::vector<Label> labels)
    : nx_(nx), ny_(ny), phase_count_(phase_count), labels_(std::move(labels)) {
    if (nx <= 0 || ny <= 0) throw DataError("image dimensions must be positive");
    if (phase_count <= 0 || phase_count > 256) throw DataError("phase count must be in [1, 256]");
    if (labels_.size() != static_cast<std::size_t>(nx) * ny)
        throw DataError("label count does not match dimensions");
    for (Label l : labels_)
        if (l >= phase_count) throw DataError("label exceeds phase count");
}

OneHotVolume one_hot_encode(const SegmentedVolume& v) {
    OneHotVolume o(v.phase_count(), v.dims());
    const std::int64_t n = v.dims().voxels();
    auto labels = v.labels();
    for (std::int64_t i = 0; i < n; ++i) o.values[labels[i] * n + i] = 1.f;
    return o;
}

SegmentedVolume one_hot_decode(const OneHotVolume& o, double voxel_size_um) {
    const std::int64_t n = o.dims.voxels();
    std::vector<Label> labels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        int best = 0;
        float best_v = o.values[i];
        for (int c = 1; c < o.channels; ++c) {
            const float val = o.values[c * n + i];
            if (val > best_v) {
                best_v = val;
                best = c;
            }
        }
        labels[i] = static_cast<Label>(best);
    }
    return SegmentedVolume(o.dims, o.channels, voxel_size_um, std::move(labels));
}

PlaneStacks slice_planes(const OneHotVolume& o) {
    if (!o.dims.cubic()) throw ShapeError("slice_planes requires a cubic volume");
    const int n = o.dims.nx;
    const int c_count = o.channels;
    auto make = [&] {
        std::vector<ChannelSlab> stack(n);
        for (auto& s : stack) {
            s.channels = c_count;
            s.side = n;
            s.values.resize(static_cast<std::size_t>(c_count) * n * n);
        }
        return stack;
    };
    PlaneStacks out{make(), make(), make()};
    for (int c = 0; c < c_count; ++c)
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z) {
                    const float val = o.at(c, x, y, z);
                    out.xy[z].values[(std::int64_t{c} * n + x) * n + y] = val;
                    out.xz[y].values[(std::int64_t{c} * n + x) * n + z] = val;
                    out.yz[x].values[(std::int64_t{c} * n + y) * n + z] = val;
                }
    return out;
}

OneHotVolume downsample_nn(const OneHotVolume& o, int factor, DownsampleAnchor anchor) {
    if (factor < 1) throw ShapeError("downsample factor must be >= 1");
    const Dims3& d = o.dims;
    if (d.nx % factor || d.ny % factor || d.nz % factor) {
        std::ostringstream os;
        os << "dims " << d.nx << "x" << d.ny << "x" << d.nz << " not divisible by " << factor;
        throw ShapeError(os.str());
    }
    const int off = anchor == DownsampleAnchor::Center ? factor / 2 : 0;
    OneHotVolume out(o.channels, Dims3{d.nx / factor, d.ny / factor, d.nz / factor});
    for (int c = 0; c < o.channels; ++c)
        for (int x = 0; x < out.dims.nx; ++x)
            for (int y = 0; y < out.dims.ny; ++y)
                for (int z = 0; z < out.dims.nz; ++z)
                    out.at(c, x, y, z) = o.at(c, factor * x + off, factor * y + off, factor * z + off);
    return out;
}

OneHotVolume upsample_replicate(const OneHotVolume& o, int factor) {
    if (factor < 1) throw ShapeError("upsample factor must be >= 1");
    const Dims3& d = o.dims;
    OneHotVolume out(o.channels, Dims3{d.nx * factor, d.ny * factor, d.nz * factor});
    for (int c = 0; c < o.channels; ++c)
        for (int x = 0; x < out.dims.nx; ++x)
            for (int y = 0; y < out.dims.ny; ++y)
                for (int z = 0; z < out.dims.nz; ++z)
                    out.at(c, x, y, z) = o.at(c, x / factor, y / factor, z / factor);
    return out;
}

namespace {

SegmentedVolume filter_pass(const SegmentedVolume& v, LabelFilter kind) {
    const Dims3& d = v.dims();
    SegmentedVolume out = v;
    const int p = v.phase_count();
    std::vector<int> hist(static_cast<std::size_t>(p));
    for (int x = 0; x < d.nx; ++x)
        for (int y = 0; y < d.ny; ++y)
            for (int z = 0; z < d.nz; ++z) {
                std::fill(hist.begin(), hist.end(), 0);
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = std::clamp(x + dx, 0, d.nx - 1);
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int yy = std::clamp(y + dy, 0, d.ny - 1);
                        for (int dz = -1; dz <= 1; ++dz) {
                            const int zz = std::clamp(z + dz, 0, d.nz - 1);
                            ++hist[v.at(xx, yy, zz)];
                        }
                    }
                }
                int chosen = 0;
                if (kind == LabelFilter::Median) {
                    // 14th smallest of 27 codes.
                    int seen = 0;
                    for (int l = 0; l < p; ++l) {
                        seen += hist[l];
                        if (seen >= 14) {
                            chosen = l;
                            break;
                        }
                    }
                } else {
                    chosen = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
                }
                out.set(x, y, z, static_cast<Label>(chosen));
            }
    return out;
}

}  // namespace

SegmentedVolume median_filter_3d(const SegmentedVolume& v, int iterations, LabelFilter kind) {
    if (iterations < 0) throw std::invalid_argument("filter iterations must be >= 0");
    SegmentedVolume cur = v;
    for (int i = 0; i < iterations; ++i) cur = filter_pass(cur, kind);
    return cur;
}

std::array<int, 3> sample_origin(const Dims3& dims, int side, Rng& rng) {
    if (side <= 0 || side > dims.nx || side > dims.ny || side > dims.nz) {
        std::ostringstream os;
        os << "cube side " << side << " does not fit in " << dims.nx << "x" << dims.ny << "x" << dims.nz;
        throw ShapeError(os.str());
    }
    std::array<int, 3> o{};
    o[0] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dims.nx - side + 1)));
    o[1] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dims.ny - side + 1)));
    o[2] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dims.nz - side + 1)));
    return o;
}

SegmentedVolume extract_subvolume(const SegmentedVolume& v, std::array<int, 3> origin, int side) {
    const Dims3& d = v.dims();
    if (origin[0] < 0 || origin[1] < 0 || origin[2] < 0 || origin[0] + side > d.nx ||
        origin[1] + side > d.ny || origin[2] + side > d.nz)
        throw ShapeError("subvolume out of bounds");
    SegmentedVolume out(Dims3{side, side, side}, v.phase_count(), v.voxel_size());
    for (int x = 0; x < side; ++x)
        for (int y = 0; y < side; ++y)
            for (int z = 0; z < side; ++z)
                out.set(x, y, z, v.at(origin[0] + x, origin[1] + y, origin[2] + z));
    return out;
}

SegmentedVolume sample_subvolume(const SegmentedVolume& v, int side, Rng& rng) {
    return extract_subvolume(v, sample_origin(v.dims(), side, rng), side);
}

SegmentedImage2D rotate90(const SegmentedImage2D& img) {
    if (img.nx() != img.ny()) throw ShapeError("rotation requires a square image");
    const int n = img.nx();
    SegmentedImage2D out(n, n, img.phase_count());
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) out.set(y, n - 1 - x, img.at(x, y));
    return out;
}

SegmentedImage2D mirror(const SegmentedImage2D& img) {
    SegmentedImage2D out(img.nx(), img.ny(), img.phase_count());
    for (int x = 0; x < img.nx(); ++x)
        for (int y = 0; y < img.ny(); ++y) out.set(x, img.ny() - 1 - y, img.at(x, y));
    return out;
}

std::vector<SegmentedImage2D> augment_d4(const SegmentedImage2D& img) {
    if (img.nx() != img.ny()) throw ShapeError("augment_d4 requires a square image");
    std::vector<SegmentedImage2D> out;
    out.reserve(8);
    for (SegmentedImage2D base : {img, mirror(img)}) {
        for (int r = 0; r < 4; ++r) {
            out.push_back(base);
            base = rotate90(base);
        }
    }
    return out;
}

namespace {
constexpr std::array<std::uint8_t, 4> kGrayLevels{0, 85, 170, 255};
}

std::vector<std::uint8_t> grayscale_encode(std::span<const Label> labels, int phase_count) {
    if (phase_count != 4) throw DataError("grayscale coding is defined for four phases only");
    std::vector<std::uint8_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= 4) throw DataError("label out of range for grayscale coding");
        out[i] = kGrayLevels[labels[i]];
    }
    return out;
}

std::vector<std::uint8_t> grayscale_encode(const SegmentedVolume& v) {
    return grayscale_encode(v.labels(), v.phase_count());
}

std::vector<std::uint8_t> grayscale_encode(const SegmentedImage2D& img) {
    return grayscale_encode(img.labels(), img.phase_count());
}

Label grayscale_label(double gray) {
    if (!(gray >= -30.0 && gray <= 275.0)) throw DataError("gray value out of [-30, 275]");
    if (gray < 45.0) return 0;
    if (gray < 130.0) return 1;
    if (gray < 210.0) return 2;
    return 3;
}

namespace {

Label decode_checked(double g, const std::string& where) {
    if (!(g >= -30.0 && g <= 275.0)) {
        std::ostringstream os;
        os << "gray value " << g << " at " << where << " outside [-30, 275]";
        throw DataError(os.str());
    }
    return grayscale_label(g);
}

}  // namespace

SegmentedVolume grayscale_decode(std::span<const double> gray, Dims3 dims, double voxel_size_um) {
    if (static_cast<std::int64_t>(gray.size()) != dims.voxels())
        throw ShapeError("gray value count does not match dimensions");
    std::vector<Label> labels(gray.size());
    std::size_t i = 0;
    for (int x = 0; x < dims.nx; ++x)
        for (int y = 0; y < dims.ny; ++y)
            for (int z = 0; z < dims.nz; ++z, ++i)
                labels[i] = decode_checked(gray[i], "(" + std::to_string(x) + ", " + std::to_string(y) +
                                                        ", " + std::to_string(z) + ")");
    return SegmentedVolume(dims, 4, voxel_size_um, std::move(labels));
}

SegmentedImage2D grayscale_decode(std::span<const double> gray, int nx, int ny) {
    if (gray.size() != static_cast<std::size_t>(nx) * ny)
        throw ShapeError("gray value count does not match dimensions");
    std::vector<Label> labels(gray.size());
    std::size_t i = 0;
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y, ++i)
            labels[i] = decode_checked(gray[i], "(" + std::to_string(x) + ", " + std::to_string(y) + ")");
    return SegmentedImage2D(nx, ny, 4, std::move(labels));
}

namespace {

struct Segment {
    int read_lo, write_lo, write_hi;
};

std::vector<Segment> axis_segments(int n, int s, int h) {
    if (n == s) return {{0, 0, n}};
    std::vector<Segment> segs;
    segs.push_back({0, 0, s - h});
    const int core = s - 2 * h;
    for (int a = s - h; a < n; a += core) {
        const int b = std::min(a + core, n);
        const int read_lo = std::min(a - h, n - s);
        segs.push_back({read_lo, a, b});
    }
    return segs;
}

}  // namespace

std::vector<Tile> tile_plan(const Dims3& dims, int tile_side, int halo) {
    if (halo < 0) throw std::invalid_argument("halo must be >= 0");
    if (tile_side <= 2 * halo) throw std::invalid_argument("tile side must exceed twice the halo");
    if (tile_side > dims.nx || tile_side > dims.ny || tile_side > dims.nz) {
        std::ostringstream os;
        os << "tile side " << tile_side << " exceeds volume " << dims.nx << "x" << dims.ny << "x" << dims.nz;
        throw ShapeError(os.str());
    }
    const std::array<std::vector<Segment>, 3> segs{axis_segments(dims.nx, tile_side, halo),
                                                   axis_segments(dims.ny, tile_side, halo),
                                                   axis_segments(dims.nz, tile_side, halo)};
    std::vector<Tile> tiles;
    for (const auto& sx : segs[0])
        for (const auto& sy : segs[1])
            for (const auto& sz : segs[2]) {
                Tile t;
                const std::array<const Segment*, 3> s3{&sx, &sy, &sz};
                for (int a = 0; a < 3; ++a) {
                    t.read.lo[a] = s3[a]->read_lo;
                    t.read.hi[a] = s3[a]->read_lo + tile_side;
                    t.write.lo[a] = s3[a]->write_lo;
                    t.write.hi[a] = s3[a]->write_hi;
                }
                tiles.push_back(t);
            }
    return tiles;
}

}  // namespace voxsr
