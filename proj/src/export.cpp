#include "mbd/export.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

namespace mbd {

void write_pfm(const std::filesystem::path& path, const ImageGrid& grid) {
  if (grid.channels() != 1) {
    throw std::invalid_argument("pfm: only single-channel grids are exported");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("pfm: cannot open " + path.string());
  out << "Pf\n" << grid.width() << " " << grid.height() << "\n-1.0\n";
  // PFM stores rows bottom-to-top.
  for (int v = grid.height() - 1; v >= 0; --v) {
    out.write(reinterpret_cast<const char*>(&grid.data()[static_cast<size_t>(v) *
                                                         grid.width()]),
              static_cast<std::streamsize>(grid.width() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("pfm: write failed " + path.string());
}

ImageGrid read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("pfm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  if (magic != "Pf" || w <= 0 || h <= 0 || scale >= 0.0) {
    throw std::runtime_error("pfm: unsupported header in " + path.string());
  }
  in.get();  // single whitespace after the scale
  std::vector<float> data(static_cast<size_t>(w) * h);
  for (int v = h - 1; v >= 0; --v) {
    in.read(reinterpret_cast<char*>(&data[static_cast<size_t>(v) * w]),
            static_cast<std::streamsize>(w * sizeof(float)));
  }
  if (!in) throw std::runtime_error("pfm: truncated payload in " + path.string());
  return ImageGrid::from_data(h, w, 1, std::move(data));
}

void write_png_rgb8(const std::filesystem::path& path, const ImageGrid& grid) {
  if (grid.channels() != 3) {
    throw std::invalid_argument("png: expected a 3-channel grid");
  }
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("png: cannot open " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("png: encoder failure for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, grid.width(), grid.height(), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(grid.width()) * 3);
  for (int v = 0; v < grid.height(); ++v) {
    for (int u = 0; u < grid.width(); ++u) {
      for (int c = 0; c < 3; ++c) {
        const double x = std::clamp(static_cast<double>(grid.at(v, u, c)), 0.0, 1.0);
        row[static_cast<size_t>(u) * 3 + c] =
            static_cast<png_byte>(std::lround(x * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

ImageGrid normals_to_rgb(const ImageGrid& normals) {
  if (normals.channels() != 3) {
    throw std::invalid_argument("normals_to_rgb: expected a 3-channel grid");
  }
  ImageGrid out(normals.height(), normals.width(), 3);
  for (size_t i = 0; i < normals.size(); ++i) {
    out.data()[i] = (normals.data()[i] + 1.0f) * 0.5f;
  }
  return out;
}

}  // namespace mbd
