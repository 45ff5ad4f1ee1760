#include "fpc/coding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "fpc/errors.hpp"

namespace fpc {

namespace {

constexpr int64_t kMaxLevel = int64_t{1} << 23;
constexpr char kMagic[4] = {'F', 'P', 'C', 'B'};
constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderBytes = 32;

// Orthonormal DCT-II basis, C[k][n] = a_k cos(pi (2n+1) k / 2N).
template <int N>
struct DctBasis {
  double c[N][N];
  DctBasis() {
    for (int k = 0; k < N; ++k) {
      double a = std::sqrt((k == 0 ? 1.0 : 2.0) / N);
      for (int n = 0; n < N; ++n) {
        c[k][n] = a * std::cos(M_PI * (2 * n + 1) * k / (2.0 * N));
      }
    }
  }
};

const DctBasis<16>& basis16() {
  static const DctBasis<16> b;
  return b;
}
const DctBasis<4>& basis4() {
  static const DctBasis<4> b;
  return b;
}

// In-place 2-D transform of one NxN tile at (ox, oy) inside the 16x16 block.
template <int N>
void tile_transform(const DctBasis<N>& basis, const double* src, double* dst, int ox, int oy,
                    bool inverse) {
  double tmp[N][N];
  // rows: tmp = X * C^T (forward) or X * C (inverse)
  for (int y = 0; y < N; ++y) {
    const double* row = src + (oy + y) * kBlockSize + ox;
    for (int k = 0; k < N; ++k) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        s += row[n] * (inverse ? basis.c[n][k] : basis.c[k][n]);
      }
      tmp[y][k] = s;
    }
  }
  // columns
  for (int x = 0; x < N; ++x) {
    for (int k = 0; k < N; ++k) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        s += (inverse ? basis.c[n][k] : basis.c[k][n]) * tmp[n][x];
      }
      dst[(oy + k) * kBlockSize + ox + x] = s;
    }
  }
}

std::vector<int> build_zigzag(int n) {
  // JPEG diagonal order: even diagonals start at the bottom-left end.
  std::vector<int> order;
  order.reserve(static_cast<size_t>(n) * n);
  for (int s = 0; s <= 2 * (n - 1); ++s) {
    if (s % 2 == 0) {
      for (int y = std::min(s, n - 1); y >= std::max(0, s - n + 1); --y) {
        order.push_back(y * n + (s - y));
      }
    } else {
      for (int x = std::min(s, n - 1); x >= std::max(0, s - n + 1); --x) {
        order.push_back((s - x) * n + x);
      }
    }
  }
  return order;
}

std::vector<int> build_scan(ModeId mode) {
  std::vector<int> scan;
  scan.reserve(kBlockPixels);
  if (mode == ModeId::T16) {
    for (int p : build_zigzag(kBlockSize)) {
      scan.push_back(p);
    }
  } else {
    std::vector<int> z4 = build_zigzag(4);
    for (int ty = 0; ty < 4; ++ty) {
      for (int tx = 0; tx < 4; ++tx) {
        for (int p : z4) {
          int y = 4 * ty + p / 4;
          int x = 4 * tx + p % 4;
          scan.push_back(y * kBlockSize + x);
        }
      }
    }
  }
  return scan;
}

int ue_len(uint32_t v) {
  return 2 * (std::bit_width(v + 1) - 1) + 1;
}

int se_len(int32_t v) {
  uint32_t code = v > 0 ? 2u * static_cast<uint32_t>(v) - 1 : 2u * static_cast<uint32_t>(-int64_t{v});
  return ue_len(code);
}

void store_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void store_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

void store_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

uint16_t load_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
uint32_t load_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
uint64_t load_u64(const uint8_t* p) {
  return static_cast<uint64_t>(load_u32(p)) | (static_cast<uint64_t>(load_u32(p + 4)) << 32);
}

}  // namespace

QuantParams QuantParams::from_qp(int qp) {
  if (qp < 0 || qp > 51) throw ValidationError("qp must be in [0, 51]");
  return QuantParams{qp, std::exp2((qp - 4) / 6.0)};
}

Coeffs dct_forward(const Block& block, ModeId mode) {
  Coeffs out;
  if (mode == ModeId::T16) {
    tile_transform<16>(basis16(), block.data(), out.data(), 0, 0, false);
  } else {
    for (int ty = 0; ty < 4; ++ty) {
      for (int tx = 0; tx < 4; ++tx) {
        tile_transform<4>(basis4(), block.data(), out.data(), 4 * tx, 4 * ty, false);
      }
    }
  }
  return out;
}

Block dct_inverse(const Coeffs& coeffs, ModeId mode) {
  Block out;
  if (mode == ModeId::T16) {
    tile_transform<16>(basis16(), coeffs.data(), out.data(), 0, 0, true);
  } else {
    for (int ty = 0; ty < 4; ++ty) {
      for (int tx = 0; tx < 4; ++tx) {
        tile_transform<4>(basis4(), coeffs.data(), out.data(), 4 * tx, 4 * ty, true);
      }
    }
  }
  return out;
}

std::span<const int> scan_order(ModeId mode) {
  static const std::vector<int> t16 = build_scan(ModeId::T16);
  static const std::vector<int> t4 = build_scan(ModeId::T4);
  return mode == ModeId::T16 ? t16 : t4;
}

LevelBlock quantize(const Coeffs& coeffs, const QuantParams& q) {
  if (!(q.step > 0.0)) throw ValidationError("quantizer step must be positive");
  LevelBlock out;
  for (int i = 0; i < kBlockPixels; ++i) {
    int64_t level = std::llround(coeffs[i] / q.step);
    if (level > kMaxLevel || level < -kMaxLevel) {
      throw ValidationError("quantized level magnitude exceeds 2^23");
    }
    out[i] = static_cast<int32_t>(level);
  }
  return out;
}

Coeffs dequantize(const LevelBlock& levels, const QuantParams& q) {
  Coeffs out;
  for (int i = 0; i < kBlockPixels; ++i) {
    out[i] = static_cast<double>(levels[i]) * q.step;
  }
  return out;
}

void BitWriter::put_bit(int b) {
  if ((nbits_ & 7) == 0) bytes_.push_back(0);
  if (b) bytes_.back() |= static_cast<uint8_t>(1u << (7 - (nbits_ & 7)));
  ++nbits_;
}

void BitWriter::put_ue(uint32_t v) {
  uint32_t code = v + 1;
  int len = std::bit_width(code);
  for (int i = 0; i < len - 1; ++i) put_bit(0);
  for (int i = len - 1; i >= 0; --i) put_bit((code >> i) & 1);
}

void BitWriter::put_se(int32_t v) {
  put_ue(v > 0 ? 2u * static_cast<uint32_t>(v) - 1
               : 2u * static_cast<uint32_t>(-int64_t{v}));
}

int BitReader::get_bit() {
  if (pos_ >= bit_limit_) throw IoError("bitstream: read past end of payload");
  int b = (data_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1;
  ++pos_;
  return b;
}

uint32_t BitReader::get_ue() {
  int zeros = 0;
  while (get_bit() == 0) {
    if (++zeros > 32) throw IoError("bitstream: malformed exp-golomb code");
  }
  uint64_t code = 1;
  for (int i = 0; i < zeros; ++i) {
    code = (code << 1) | static_cast<uint64_t>(get_bit());
  }
  return static_cast<uint32_t>(code - 1);
}

int32_t BitReader::get_se() {
  uint32_t code = get_ue();
  if (code & 1) return static_cast<int32_t>((code + 1) / 2);
  return -static_cast<int32_t>(code / 2);
}

uint64_t entropy_encode(const LevelBlock& levels, ModeId mode, BitWriter& out) {
  uint64_t start = out.bit_count();
  std::span<const int> scan = scan_order(mode);
  uint32_t run = 0;
  for (int s = 0; s < kBlockPixels; ++s) {
    int32_t lv = levels[scan[s]];
    if (lv == 0) {
      ++run;
      continue;
    }
    out.put_ue(run + 1);
    out.put_se(lv);
    run = 0;
  }
  out.put_ue(0);
  return out.bit_count() - start;
}

uint64_t entropy_bit_count(const LevelBlock& levels, ModeId mode) {
  std::span<const int> scan = scan_order(mode);
  uint64_t bits = 0;
  uint32_t run = 0;
  for (int s = 0; s < kBlockPixels; ++s) {
    int32_t lv = levels[scan[s]];
    if (lv == 0) {
      ++run;
      continue;
    }
    bits += ue_len(run + 1) + se_len(lv);
    run = 0;
  }
  return bits + 1;  // ue(0) end-of-block
}

LevelBlock entropy_decode(BitReader& in, ModeId mode) {
  LevelBlock out{};
  std::span<const int> scan = scan_order(mode);
  int pos = 0;
  for (;;) {
    uint32_t token = in.get_ue();
    if (token == 0) break;
    pos += static_cast<int>(token) - 1;
    if (pos >= kBlockPixels) throw IoError("bitstream: coefficient run overflows block");
    int32_t lv = in.get_se();
    if (lv == 0) throw IoError("bitstream: zero level in run/level pair");
    out[scan[pos]] = lv;
    ++pos;
  }
  return out;
}

Block reconstruct_block(const LevelBlock& levels, ModeId mode, const QuantParams& q) {
  Block rec = dct_inverse(dequantize(levels, q), mode);
  for (double& v : rec) v += 128.0;
  return rec;
}

std::vector<uint8_t> EncodedImage::to_bytes() const {
  size_t n_b = blocks.size();
  BitWriter payload;
  for (const CodedBlock& b : blocks) {
    entropy_encode(b.levels, b.mode, payload);
  }

  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + (n_b + 7) / 8 + payload.bytes().size());
  out.insert(out.end(), kMagic, kMagic + 4);
  store_u16(out, kVersion);
  out.push_back(qp);
  out.push_back(static_cast<uint8_t>(metric));
  store_u32(out, orig_width);
  store_u32(out, orig_height);
  store_u32(out, padded_width);
  store_u32(out, padded_height);
  store_u64(out, payload.bit_count());

  // Mode flags, one bit per block, MSB-first: 0 = T16, 1 = T4.
  std::vector<uint8_t> flags((n_b + 7) / 8, 0);
  for (size_t i = 0; i < n_b; ++i) {
    if (blocks[i].mode == ModeId::T4) flags[i >> 3] |= static_cast<uint8_t>(1u << (7 - (i & 7)));
  }
  out.insert(out.end(), flags.begin(), flags.end());
  out.insert(out.end(), payload.bytes().begin(), payload.bytes().end());
  return out;
}

EncodedImage EncodedImage::from_bytes(std::span<const uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw IoError("bitstream: truncated header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("bitstream: bad magic");
  if (load_u16(bytes.data() + 4) != kVersion) throw IoError("bitstream: unsupported version");

  EncodedImage enc;
  enc.qp = bytes[6];
  if (enc.qp > 51) throw IoError("bitstream: qp out of range");
  if (bytes[7] > 2) throw IoError("bitstream: unknown metric tag");
  enc.metric = static_cast<MetricTag>(bytes[7]);
  enc.orig_width = load_u32(bytes.data() + 8);
  enc.orig_height = load_u32(bytes.data() + 12);
  enc.padded_width = load_u32(bytes.data() + 16);
  enc.padded_height = load_u32(bytes.data() + 20);
  uint64_t payload_bits = load_u64(bytes.data() + 24);

  auto padded_ok = [](uint32_t orig, uint32_t padded) {
    return orig > 0 && padded % kBlockSize == 0 && padded >= orig && padded < orig + kBlockSize;
  };
  if (!padded_ok(enc.orig_width, enc.padded_width) ||
      !padded_ok(enc.orig_height, enc.padded_height)) {
    throw IoError("bitstream: inconsistent dimensions");
  }

  size_t n_b = (static_cast<size_t>(enc.padded_width) / kBlockSize) *
               (static_cast<size_t>(enc.padded_height) / kBlockSize);
  size_t flag_bytes = (n_b + 7) / 8;
  size_t payload_bytes = static_cast<size_t>((payload_bits + 7) / 8);
  if (bytes.size() != kHeaderBytes + flag_bytes + payload_bytes) {
    throw IoError("bitstream: size does not match header");
  }

  const uint8_t* flags = bytes.data() + kHeaderBytes;
  BitReader reader(bytes.data() + kHeaderBytes + flag_bytes, payload_bits);
  enc.blocks.resize(n_b);
  for (size_t i = 0; i < n_b; ++i) {
    CodedBlock& b = enc.blocks[i];
    b.mode = (flags[i >> 3] >> (7 - (i & 7))) & 1 ? ModeId::T4 : ModeId::T16;
    uint64_t start = reader.bits_read();
    b.levels = entropy_decode(reader, b.mode);
    b.payload_bits = reader.bits_read() - start;
  }
  if (reader.bits_read() != payload_bits) {
    throw IoError("bitstream: payload length mismatch");
  }
  return enc;
}

void write_bitstream(const EncodedImage& enc, const std::string& path) {
  std::vector<uint8_t> bytes = enc.to_bytes();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

EncodedImage read_bitstream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return EncodedImage::from_bytes(bytes);
}

ImagePlane reconstruct_image(const EncodedImage& enc) {
  ImagePlane plane;
  plane.width = static_cast<int>(enc.padded_width);
  plane.height = static_cast<int>(enc.padded_height);
  plane.stride = plane.width;
  plane.orig_width = static_cast<int>(enc.orig_width);
  plane.orig_height = static_cast<int>(enc.orig_height);
  plane.samples.assign(static_cast<size_t>(plane.stride) * plane.height, 0);

  QuantParams q = QuantParams::from_qp(enc.qp);
  BlockGrid grid = make_grid(plane);
  if (static_cast<size_t>(grid.count()) != enc.blocks.size()) {
    throw IoError("bitstream: block count mismatch");
  }
  for (int i = 0; i < grid.count(); ++i) {
    insert_block(plane, i, reconstruct_block(enc.blocks[i].levels, enc.blocks[i].mode, q));
  }
  return plane;
}

}  // namespace fpc
