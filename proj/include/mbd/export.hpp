#pragma once

#include <filesystem>

#include "mbd/image_grid.hpp"

namespace mbd {

// Grayscale PFM ("Pf"), bottom-to-top rows, little-endian scale header.
void write_pfm(const std::filesystem::path& path, const ImageGrid& grid);
ImageGrid read_pfm(const std::filesystem::path& path);

// 8-bit RGB PNG; inputs are clamped to [0, 1].
void write_png_rgb8(const std::filesystem::path& path, const ImageGrid& grid);

// Unit normals in [-1, 1] mapped to displayable (n + 1) / 2 colors.
ImageGrid normals_to_rgb(const ImageGrid& normals);

}  // namespace mbd
