#include "voxsr/volume_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "voxsr/error.hpp"
#include "voxsr/little_endian.hpp"

namespace voxsr {

std::vector<std::uint8_t> encode_svol(const SegmentedVolume& v) {
    ByteWriter w;
    w.bytes("SVOL", 4);
    w.u16(kSvolVersion);
    w.u16(static_cast<std::uint16_t>(v.phase_count()));
    w.u32(static_cast<std::uint32_t>(v.dims().nx));
    w.u32(static_cast<std::uint32_t>(v.dims().ny));
    w.u32(static_cast<std::uint32_t>(v.dims().nz));
    w.f64(v.voxel_size());
    w.bytes(v.labels().data(), v.labels().size());
    return std::move(w).take();
}

SegmentedVolume decode_svol(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, "SVOL", 4) != 0) throw DataError("not an SVOL file (bad magic)");
    const std::uint16_t version = r.u16();
    if (version != kSvolVersion) throw DataError("unsupported SVOL version " + std::to_string(version));
    const int p = r.u16();
    Dims3 d;
    d.nx = static_cast<int>(r.u32());
    d.ny = static_cast<int>(r.u32());
    d.nz = static_cast<int>(r.u32());
    const double vs = r.f64();
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0) throw DataError("SVOL has non-positive dimensions");
    if (r.remaining() != static_cast<std::size_t>(d.voxels()))
        throw DataError("SVOL payload size does not match header dimensions");
    std::vector<Label> labels(static_cast<std::size_t>(d.voxels()));
    r.bytes(labels.data(), labels.size());
    return SegmentedVolume(d, p, vs, std::move(labels));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

void write_svol(const std::filesystem::path& path, const SegmentedVolume& v) {
    write_file(path, encode_svol(v));
}

SegmentedVolume read_svol(const std::filesystem::path& path) {
    try {
        return decode_svol(read_file(path));
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_pgm(const std::filesystem::path& path, const SegmentedImage2D& img) {
    const auto gray = grayscale_encode(img);
    std::ostringstream header;
    header << "P5\n" << img.ny() << " " << img.nx() << "\n255\n";
    const std::string h = header.str();
    std::vector<std::uint8_t> bytes(h.begin(), h.end());
    bytes.insert(bytes.end(), gray.begin(), gray.end());
    write_file(path, bytes);
}

SegmentedImage2D read_pgm(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    std::string text(bytes.begin(), bytes.end());
    std::istringstream is(text);
    std::string magic;
    int width = 0, height = 0, maxval = 0;
    is >> magic >> width >> height >> maxval;
    if (magic != "P5" || width <= 0 || height <= 0 || maxval != 255)
        throw DataError(path.string() + ": unsupported PGM header");
    is.get();
    const auto offset = static_cast<std::size_t>(is.tellg());
    if (bytes.size() - offset != static_cast<std::size_t>(width) * height)
        throw DataError(path.string() + ": PGM payload size mismatch");
    std::vector<double> gray(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return grayscale_decode(gray, height, width);
}

SegmentedVolume pack_images(const std::vector<SegmentedImage2D>& images, double pixel_size_um) {
    if (images.empty()) throw DataError("cannot pack an empty image list");
    const int n = images.front().nx();
    const int p = images.front().phase_count();
    std::vector<Label> labels;
    labels.reserve(images.size() * n * n);
    for (const auto& img : images) {
        if (img.nx() != n || img.ny() != n || img.phase_count() != p)
            throw ShapeError("packed images must share side and phase count");
        labels.insert(labels.end(), img.labels().begin(), img.labels().end());
    }
    return SegmentedVolume(Dims3{static_cast<int>(images.size()), n, n}, p, pixel_size_um, std::move(labels));
}

std::vector<SegmentedImage2D> unpack_images(const SegmentedVolume& stack) {
    const Dims3& d = stack.dims();
    std::vector<SegmentedImage2D> out;
    out.reserve(d.nx);
    const std::size_t per = static_cast<std::size_t>(d.ny) * d.nz;
    for (int k = 0; k < d.nx; ++k) {
        auto first = stack.labels().begin() + static_cast<std::ptrdiff_t>(k * per);
        out.emplace_back(d.ny, d.nz, stack.phase_count(), std::vector<Label>(first, first + static_cast<std::ptrdiff_t>(per)));
    }
    return out;
}

}  // namespace voxsr
