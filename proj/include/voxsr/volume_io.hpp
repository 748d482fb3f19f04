#pragma once

#include <filesystem>
#include <vector>

#include "voxsr/segvol.hpp"

namespace voxsr {

inline constexpr std::uint16_t kSvolVersion = 1;

/// SVOL: "SVOL", u16 version, u16 P, u32 nx/ny/nz, f64 voxel size (µm), then
/// nx*ny*nz label bytes, z fastest. All integers little-endian.
std::vector<std::uint8_t> encode_svol(const SegmentedVolume& v);
SegmentedVolume decode_svol(std::span<const std::uint8_t> bytes);

void write_svol(const std::filesystem::path& path, const SegmentedVolume& v);
SegmentedVolume read_svol(const std::filesystem::path& path);

/// Binary PGM (P5) of the grayscale-coded image; rows are x, columns y.
void write_pgm(const std::filesystem::path& path, const SegmentedImage2D& img);
SegmentedImage2D read_pgm(const std::filesystem::path& path);

/// A stack of equally sized square images stored as an SVOL of dims (count, n, n).
SegmentedVolume pack_images(const std::vector<SegmentedImage2D>& images, double pixel_size_um);
std::vector<SegmentedImage2D> unpack_images(const SegmentedVolume& stack);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace voxsr
