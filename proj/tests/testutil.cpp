#include "testutil.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "fpc/rng.hpp"

namespace fpc::test {

ImagePlane corpus_image(uint64_t seed, int width, int height) {
  CounterRng rng(seed ^ 0xc0f0'5eedULL);
  const double fx = 0.5 + 2.5 * rng.uniform(0);
  const double fy = 0.5 + 2.5 * rng.uniform(1);
  const double phase = 2.0 * std::numbers::pi * rng.uniform(2);
  const double grad_amp = 40.0 + 40.0 * rng.uniform(3);
  const double edge_angle = 2.0 * std::numbers::pi * rng.uniform(4);
  const double edge_pos = 0.25 + 0.5 * rng.uniform(5);
  const double edge_amp = 50.0 + 40.0 * rng.uniform(6);
  const double tex_u = 0.6 + 1.8 * rng.uniform(7);
  const double tex_v = 0.6 + 1.8 * rng.uniform(8);
  const double tex_amp = 25.0 + 25.0 * rng.uniform(9);
  const double noise_sigma = 6.0 + 8.0 * rng.uniform(10);
  const double flat_value = 40.0 + 175.0 * rng.uniform(11);
  const double ca = std::cos(edge_angle), sa = std::sin(edge_angle);

  std::vector<uint8_t> samples(static_cast<size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width;
      const double v = static_cast<double>(y) / height;
      double val = 128.0 + grad_amp * std::sin(2.0 * std::numbers::pi * (fx * u + fy * v) + phase);
      if (ca * (u - 0.5) + sa * (v - 0.5) > edge_pos - 0.5) val += edge_amp;
      const bool right = u >= 0.5, bottom = v >= 0.5;
      if (right && !bottom) val += tex_amp * std::sin(tex_u * x) * std::sin(tex_v * y);
      if (!right && bottom)
        val += noise_sigma * rng.gaussian(1000 + 2 * (static_cast<uint64_t>(y) * width + x));
      if (right && bottom && u > 0.75 && v > 0.75) val = flat_value;
      samples[static_cast<size_t>(y) * width + x] =
          static_cast<uint8_t>(std::clamp(std::llround(val), 0LL, 255LL));
    }
  }
  return make_plane(width, height, samples);
}

std::vector<ImagePlane> corpus(int count, int width, int height, uint64_t seed_base) {
  std::vector<ImagePlane> planes;
  planes.reserve(count);
  for (int i = 0; i < count; ++i) planes.push_back(corpus_image(seed_base + i, width, height));
  return planes;
}

Block random_block(uint64_t seed) {
  CounterRng rng(seed ^ 0xb10c'b10cULL);
  Block b;
  for (int i = 0; i < kBlockPixels; ++i)
    b[i] = std::floor(rng.uniform(static_cast<uint64_t>(i)) * 256.0);
  return b;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fpc_" + name)).string();
}

}  // namespace fpc::test
