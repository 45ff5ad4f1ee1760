#include "fpc/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "fpc/errors.hpp"

namespace fpc {

namespace {

int pad_up(int v) { return (v + kBlockSize - 1) / kBlockSize * kBlockSize; }

// Reads the next whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) continue;
    tok.push_back(static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c) && c != '#') {
      tok.push_back(static_cast<char>(c));
    }
    if (c == '#') in.unget();
    break;
  }
  return tok;
}

int parse_dim(const std::string& tok, const char* what) {
  if (tok.empty()) throw IoError(std::string("pgm: missing ") + what);
  size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw IoError(std::string("pgm: malformed ") + what + " '" + tok + "'");
  }
  if (pos != tok.size() || v <= 0 || v > 1 << 20) {
    throw IoError(std::string("pgm: malformed ") + what + " '" + tok + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

BlockGrid make_grid(const ImagePlane& plane) {
  return BlockGrid{plane.width / kBlockSize, plane.height / kBlockSize};
}

ImagePlane make_plane(int w, int h, const std::vector<uint8_t>& samples) {
  if (w <= 0 || h <= 0) throw ValidationError("plane dimensions must be positive");
  if (samples.size() != static_cast<size_t>(w) * h) {
    throw ValidationError("sample count does not match dimensions");
  }
  ImagePlane p;
  p.orig_width = w;
  p.orig_height = h;
  p.width = pad_up(w);
  p.height = pad_up(h);
  p.stride = p.width;
  p.samples.resize(static_cast<size_t>(p.stride) * p.height);
  for (int y = 0; y < p.height; ++y) {
    int sy = y < h ? y : h - 1;
    for (int x = 0; x < p.width; ++x) {
      int sx = x < w ? x : w - 1;
      p.at(x, y) = samples[static_cast<size_t>(sy) * w + sx];
    }
  }
  return p;
}

ImagePlane load_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic = next_token(in);
  if (magic != "P5") throw IoError("pgm: bad magic '" + magic + "' in '" + path + "'");
  int w = parse_dim(next_token(in), "width");
  int h = parse_dim(next_token(in), "height");
  std::string maxval = next_token(in);
  if (maxval != "255") throw IoError("pgm: maxval must be 255, got '" + maxval + "'");
  // Exactly one whitespace byte separates the header from the raster.
  std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw IoError("pgm: truncated raster in '" + path + "'");
  }
  return make_plane(w, h, raw);
}

void save_pgm(const ImagePlane& plane, const std::string& path, bool crop_to_orig) {
  int w = crop_to_orig ? plane.orig_width : plane.width;
  int h = crop_to_orig ? plane.orig_height : plane.height;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "P5\n" << w << " " << h << "\n255\n";
  for (int y = 0; y < h; ++y) {
    out.write(reinterpret_cast<const char*>(&plane.samples[static_cast<size_t>(y) * plane.stride]), w);
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

Block extract_block(const ImagePlane& plane, int i) {
  BlockGrid grid = make_grid(plane);
  if (i < 0 || i >= grid.count()) throw ValidationError("block index out of range");
  Block out;
  int ox = grid.origin_x(i), oy = grid.origin_y(i);
  for (int y = 0; y < kBlockSize; ++y) {
    for (int x = 0; x < kBlockSize; ++x) {
      out[y * kBlockSize + x] = static_cast<double>(plane.at(ox + x, oy + y));
    }
  }
  return out;
}

void insert_block(ImagePlane& plane, int i, const Block& pixels) {
  BlockGrid grid = make_grid(plane);
  if (i < 0 || i >= grid.count()) throw ValidationError("block index out of range");
  int ox = grid.origin_x(i), oy = grid.origin_y(i);
  for (int y = 0; y < kBlockSize; ++y) {
    for (int x = 0; x < kBlockSize; ++x) {
      double v = std::llround(pixels[y * kBlockSize + x]);
      if (v < 0.0) v = 0.0;
      if (v > 255.0) v = 255.0;
      plane.at(ox + x, oy + y) = static_cast<uint8_t>(v);
    }
  }
}

double psnr(const ImagePlane& a, const ImagePlane& b) {
  if (a.orig_width != b.orig_width || a.orig_height != b.orig_height) {
    throw ValidationError("psnr: dimension mismatch");
  }
  double sse = 0.0;
  for (int y = 0; y < a.orig_height; ++y) {
    for (int x = 0; x < a.orig_width; ++x) {
      double d = static_cast<double>(a.at(x, y)) - static_cast<double>(b.at(x, y));
      sse += d * d;
    }
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  double mse = sse / (static_cast<double>(a.orig_width) * a.orig_height);
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace fpc
