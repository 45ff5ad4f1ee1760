#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpc/image.hpp"

namespace fpc {

// Macroblock transform partition: one 16x16 DCT, or sixteen 4x4 DCTs on the
// 4x4 tiling. Coefficients live in the natural (in-place) block layout; scan
// order is applied only by the entropy stage.
enum class ModeId : uint8_t { T16 = 0, T4 = 1 };

using Coeffs = std::array<double, kBlockPixels>;
using LevelBlock = std::array<int32_t, kBlockPixels>;

struct QuantParams {
  int qp = 0;
  double step = 1.0;

  static QuantParams from_qp(int qp);
};

Coeffs dct_forward(const Block& block, ModeId mode);
Block dct_inverse(const Coeffs& coeffs, ModeId mode);

// Scan-order position table for a mode (zigzag per transform unit, tiles in
// raster order for T4). Indices address the natural coefficient layout.
std::span<const int> scan_order(ModeId mode);

// Uniform mid-tread quantizer, ties away from zero.
LevelBlock quantize(const Coeffs& coeffs, const QuantParams& q);
Coeffs dequantize(const LevelBlock& levels, const QuantParams& q);

// MSB-first bit packing.
class BitWriter {
 public:
  void put_bit(int b);
  void put_ue(uint32_t v);
  void put_se(int32_t v);
  uint64_t bit_count() const { return nbits_; }
  const std::vector<uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
  uint64_t nbits_ = 0;
};

class BitReader {
 public:
  BitReader(const uint8_t* data, uint64_t bit_count) : data_(data), bit_limit_(bit_count) {}
  int get_bit();
  uint32_t get_ue();
  int32_t get_se();
  uint64_t bits_read() const { return pos_; }

 private:
  const uint8_t* data_;
  uint64_t bit_limit_;
  uint64_t pos_ = 0;
};

// Zero-run / signed Exp-Golomb coefficient coder. Each nonzero level in scan
// order is coded as ue(run+1) se(level); ue(0) terminates the block.
uint64_t entropy_encode(const LevelBlock& levels, ModeId mode, BitWriter& out);
uint64_t entropy_bit_count(const LevelBlock& levels, ModeId mode);
LevelBlock entropy_decode(BitReader& in, ModeId mode);

// Dequantize, inverse transform, add the mid offset. Unclamped; clamping
// happens at image assembly.
Block reconstruct_block(const LevelBlock& levels, ModeId mode, const QuantParams& q);

struct CodedBlock {
  ModeId mode = ModeId::T16;
  LevelBlock levels{};
  uint64_t payload_bits = 0;  // entropy payload only, excludes the mode flag
};

enum class MetricTag : uint8_t { Sse = 0, Idse = 1, Fd = 2 };

// Decodable container. The decoder needs nothing beyond these fields: no
// weights, no sketch, no Jacobian.
struct EncodedImage {
  uint8_t qp = 0;
  MetricTag metric = MetricTag::Sse;
  uint32_t orig_width = 0;
  uint32_t orig_height = 0;
  uint32_t padded_width = 0;
  uint32_t padded_height = 0;
  std::vector<CodedBlock> blocks;

  std::vector<uint8_t> to_bytes() const;
  static EncodedImage from_bytes(std::span<const uint8_t> bytes);
};

void write_bitstream(const EncodedImage& enc, const std::string& path);
EncodedImage read_bitstream(const std::string& path);

// Full reconstruction: per-block reconstruct + rounding/clamping to 8 bits.
ImagePlane reconstruct_image(const EncodedImage& enc);

}  // namespace fpc
