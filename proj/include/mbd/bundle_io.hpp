#pragma once

#include <filesystem>
#include <stdexcept>

#include "mbd/bundle.hpp"

namespace mbd {

struct BundleIoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BundleVersionError : BundleIoError {
  using BundleIoError::BundleIoError;
};
struct BundleTruncatedError : BundleIoError {
  using BundleIoError::BundleIoError;
};
struct BundleDimensionError : BundleIoError {
  using BundleIoError::BundleIoError;
};

// Raw grid blob: 16-byte header (magic "MBDB", u32 H, u32 W, u32 C) followed
// by H*W*C little-endian 32-bit floats, row-major, channel-interleaved.
void write_grid_blob(const std::filesystem::path& path, const ImageGrid& grid);
ImageGrid read_grid_blob(const std::filesystem::path& path);

// Bundle directory: a human-readable `manifest` plus rgb_%04d.bin,
// depth_%04d.bin and optional gt_depth.bin blobs. Float payloads roundtrip
// bit-exact; doubles in the manifest are printed with shortest-roundtrip
// formatting.
std::filesystem::path write_bundle(const Bundle& bundle,
                                   const std::filesystem::path& directory);
Bundle read_bundle(const std::filesystem::path& directory);

}  // namespace mbd
