#include "fpc/jacobian_sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <utility>

#include "fpc/errors.hpp"

namespace fpc {
namespace {

void store_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}
void store_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}
void store_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}
void store_f64(std::vector<uint8_t>& out, double v) { store_u64(out, std::bit_cast<uint64_t>(v)); }

uint16_t load_u16(const uint8_t* p) { return static_cast<uint16_t>(p[0] | (p[1] << 8)); }
uint32_t load_u32(const uint8_t* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
  return v;
}
uint64_t load_u64(const uint8_t* p) {
  return static_cast<uint64_t>(load_u32(p)) | (static_cast<uint64_t>(load_u32(p + 4)) << 32);
}
double load_f64(const uint8_t* p) { return std::bit_cast<double>(load_u64(p)); }

}  // namespace

std::vector<double> compute_sketched_jacobian(const FeatNet& net, const ImagePlane& plane,
                                              const Sketch& sketch, int threads) {
  if (threads < 1) throw ValidationError("jacobian: threads must be >= 1");
  const Tensor x = tensor_from_plane(plane);
  const FeatureShape fs = net.output_shape(plane.height, plane.width);
  if (static_cast<int>(fs.count()) != sketch.spec.n_f)
    throw ValidationError("jacobian: sketch width does not match feature count");

  const size_t n_p = plane.pixel_count();
  const int ell = sketch.spec.ell;
  std::vector<double> full(static_cast<size_t>(ell) * n_p);

  // One shared forward trace; each row is an independent backward pass.
  const FeatNet::Trace tr = net.trace(x);
  auto run = [&](int begin, int end) {
    for (int j = begin; j < end; ++j) {
      std::vector<double> g = net.vjp(tr, sketch.row(j));
      std::copy(g.begin(), g.end(), full.begin() + static_cast<size_t>(j) * n_p);
    }
  };
  if (threads == 1 || ell == 1) {
    run(0, ell);
  } else {
    const int workers = std::min(threads, ell);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
      const int begin = ell * t / workers;
      const int end = ell * (t + 1) / workers;
      pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return full;
}

std::vector<double> localize(std::span<const double> full, int ell, const BlockGrid& grid,
                             int width) {
  const size_t n_p = full.size() / static_cast<size_t>(ell);
  std::vector<double> out(static_cast<size_t>(grid.count()) * ell * kBlockPixels);
  for (int i = 0; i < grid.count(); ++i) {
    const int x0 = grid.origin_x(i);
    const int y0 = grid.origin_y(i);
    double* dst = out.data() + static_cast<size_t>(i) * ell * kBlockPixels;
    for (int j = 0; j < ell; ++j) {
      const double* row = full.data() + static_cast<size_t>(j) * n_p;
      for (int by = 0; by < kBlockSize; ++by) {
        const double* src = row + static_cast<size_t>(y0 + by) * width + x0;
        std::copy(src, src + kBlockSize, dst + j * kBlockPixels + by * kBlockSize);
      }
    }
  }
  return out;
}

std::vector<double> to_transform_domain(std::span<const double> block_pix, int ell, ModeId mode) {
  if (block_pix.size() != static_cast<size_t>(ell) * kBlockPixels)
    throw ValidationError("jacobian: block matrix shape mismatch");
  std::vector<double> out(block_pix.size());
  Block tmp;
  for (int r = 0; r < ell; ++r) {
    std::copy_n(block_pix.data() + static_cast<size_t>(r) * kBlockPixels, kBlockPixels, tmp.begin());
    const Coeffs c = dct_forward(tmp, mode);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<size_t>(r) * kBlockPixels);
  }
  return out;
}

double compute_tau(std::span<const double> frob_sq, const TauPolicy& policy) {
  if (policy.kind == TauKind::Explicit) {
    if (!(policy.value >= 0.0) || !std::isfinite(policy.value))
      throw ValidationError("tau: explicit value must be finite and non-negative");
    return policy.value;
  }
  if (frob_sq.empty()) throw ValidationError("tau: no blocks");
  double acc = 0.0;
  for (double f : frob_sq) acc += policy.kind == TauKind::MeanFrobenius ? std::sqrt(f) : f;
  acc /= static_cast<double>(frob_sq.size());
  return policy.kind == TauKind::MeanFrobenius ? acc : std::sqrt(acc);
}

SketchedJacobian build_sketched_jacobian(const FeatNet& net, const ImagePlane& plane,
                                         const Sketch& sketch, const TauPolicy& tau_policy,
                                         int threads) {
  SketchedJacobian sj;
  sj.ell = sketch.spec.ell;
  const BlockGrid grid = make_grid(plane);
  sj.n_blocks = grid.count();

  const uint64_t flops_before = net.flops();
  const uint64_t vjps_before = net.vjp_count();
  std::vector<double> full = compute_sketched_jacobian(net, plane, sketch, threads);
  sj.build_flops = net.flops() - flops_before;
  sj.vjp_passes = static_cast<int>(net.vjp_count() - vjps_before);

  sj.pix = localize(full, sj.ell, grid, plane.width);
  sj.tr16.resize(sj.pix.size());
  sj.tr4.resize(sj.pix.size());
  sj.frob_sq.resize(sj.n_blocks);
  for (int i = 0; i < sj.n_blocks; ++i) {
    const std::span<const double> bp = sj.block_pix(i);
    const std::vector<double> t16 = to_transform_domain(bp, sj.ell, ModeId::T16);
    const std::vector<double> t4 = to_transform_domain(bp, sj.ell, ModeId::T4);
    const size_t off = static_cast<size_t>(i) * sj.ell * kBlockPixels;
    std::copy(t16.begin(), t16.end(), sj.tr16.begin() + off);
    std::copy(t4.begin(), t4.end(), sj.tr4.begin() + off);
    double f = 0.0;
    for (double v : bp) f += v * v;
    sj.frob_sq[i] = f;
  }
  sj.tau = compute_tau(sj.frob_sq, tau_policy);
  return sj;
}

std::vector<double> importance_map(std::span<const double> full, int ell, int n_p) {
  if (ell <= 0 || n_p <= 0 || full.size() != static_cast<size_t>(ell) * n_p)
    throw ValidationError("importance: matrix shape mismatch");
  std::vector<double> map(static_cast<size_t>(n_p), 0.0);
  for (int j = 0; j < ell; ++j) {
    const double* row = full.data() + static_cast<size_t>(j) * n_p;
    for (int p = 0; p < n_p; ++p) map[p] += row[p] * row[p];
  }
  return map;
}

void save_importance_pgm(std::span<const double> map, int width, int height,
                         const std::string& path) {
  if (map.size() != static_cast<size_t>(width) * height)
    throw ValidationError("importance: map size mismatch");
  double peak = 0.0;
  for (double v : map) peak = std::max(peak, v);
  std::vector<uint8_t> samples(map.size());
  if (peak > 0.0) {
    for (size_t i = 0; i < map.size(); ++i)
      samples[i] = static_cast<uint8_t>(std::llround(map[i] / peak * 255.0));
  }
  save_pgm(make_plane(width, height, samples), path);
}

namespace {
constexpr char kSidecarMagic[4] = {'F', 'P', 'S', 'J'};
constexpr uint16_t kSidecarVersion = 1;
}  // namespace

void save_sidecar(const SketchedJacobian& sj, const std::string& path) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kSidecarMagic, kSidecarMagic + 4);
  store_u16(out, kSidecarVersion);
  store_u32(out, static_cast<uint32_t>(sj.ell));
  store_u32(out, static_cast<uint32_t>(sj.n_blocks));
  store_f64(out, sj.tau);
  store_u64(out, sj.build_flops);
  store_u32(out, static_cast<uint32_t>(sj.vjp_passes));
  for (double v : sj.frob_sq) store_f64(out, v);
  for (const auto* m : {&sj.pix, &sj.tr16, &sj.tr4})
    for (double v : *m) store_f64(out, v);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("sidecar: cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("sidecar: write failed: " + path);
}

SketchedJacobian load_sidecar(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("sidecar: cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 34 || std::memcmp(bytes.data(), kSidecarMagic, 4) != 0)
    throw IoError("sidecar: bad magic");
  if (load_u16(bytes.data() + 4) != kSidecarVersion) throw IoError("sidecar: unsupported version");

  SketchedJacobian sj;
  sj.ell = static_cast<int>(load_u32(bytes.data() + 6));
  sj.n_blocks = static_cast<int>(load_u32(bytes.data() + 10));
  sj.tau = load_f64(bytes.data() + 14);
  sj.build_flops = load_u64(bytes.data() + 22);
  sj.vjp_passes = static_cast<int>(load_u32(bytes.data() + 30));
  if (sj.ell <= 0 || sj.n_blocks <= 0) throw IoError("sidecar: bad dimensions");

  const size_t mat = static_cast<size_t>(sj.n_blocks) * sj.ell * kBlockPixels;
  const size_t expect = 34 + 8 * (static_cast<size_t>(sj.n_blocks) + 3 * mat);
  if (bytes.size() != expect) throw IoError("sidecar: truncated or oversized file");

  const uint8_t* p = bytes.data() + 34;
  sj.frob_sq.resize(sj.n_blocks);
  for (double& v : sj.frob_sq) v = load_f64(std::exchange(p, p + 8));
  for (auto* m : {&sj.pix, &sj.tr16, &sj.tr4}) {
    m->resize(mat);
    for (double& v : *m) v = load_f64(std::exchange(p, p + 8));
  }
  return sj;
}

}  // namespace fpc
