#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fpc {

inline constexpr int kBlockSize = 16;
inline constexpr int kBlockPixels = kBlockSize * kBlockSize;

using Block = std::array<double, kBlockPixels>;

// Single-channel 8-bit plane, padded to multiples of 16 by edge replication.
// orig_* keep the pre-padding dimensions; quality metrics use those only.
struct ImagePlane {
  int width = 0;
  int height = 0;
  int stride = 0;
  int orig_width = 0;
  int orig_height = 0;
  std::vector<uint8_t> samples;

  uint8_t at(int x, int y) const { return samples[static_cast<size_t>(y) * stride + x]; }
  uint8_t& at(int x, int y) { return samples[static_cast<size_t>(y) * stride + x]; }
  int pixel_count() const { return width * height; }
};

// Raster-order macroblock tiling of a padded plane.
struct BlockGrid {
  int blocks_x = 0;
  int blocks_y = 0;

  int count() const { return blocks_x * blocks_y; }
  int origin_x(int i) const { return (i % blocks_x) * kBlockSize; }
  int origin_y(int i) const { return (i / blocks_x) * kBlockSize; }
};

BlockGrid make_grid(const ImagePlane& plane);

// Builds a padded plane from raw samples of size w x h.
ImagePlane make_plane(int w, int h, const std::vector<uint8_t>& samples);

// Binary PGM (P5), maxval 255. Comment lines after the magic are tolerated.
ImagePlane load_pgm(const std::string& path);

// Writes the unpadded region by default; full padded plane when crop is false.
void save_pgm(const ImagePlane& plane, const std::string& path, bool crop_to_orig = true);

// Row-major 16x16 pixel vector of macroblock i.
Block extract_block(const ImagePlane& plane, int i);

// Writes a block of real-valued pixels back, rounding and clamping to [0,255].
void insert_block(ImagePlane& plane, int i, const Block& pixels);

// 10*log10(255^2 / MSE) over the unpadded region; +inf when identical.
double psnr(const ImagePlane& a, const ImagePlane& b);

}  // namespace fpc
