#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpc/coding.hpp"
#include "fpc/featnet.hpp"
#include "fpc/image.hpp"
#include "fpc/sketch.hpp"

namespace fpc {

enum class TauKind : uint8_t { MeanFrobenius = 0, RmsFrobenius = 1, Explicit = 2 };

// Default follows the literal reading: mean over blocks of the Frobenius norm
// of the sketched per-block Jacobian.
struct TauPolicy {
  TauKind kind = TauKind::MeanFrobenius;
  double value = 0.0;  // Explicit only

  static TauPolicy paper_default() { return TauPolicy{}; }
  static TauPolicy rms() { return TauPolicy{TauKind::RmsFrobenius}; }
  static TauPolicy explicit_value(double v) { return TauPolicy{TauKind::Explicit, v}; }
};

// Per-block slices of S J_f(x), in the pixel domain and pre-transformed for
// both partition modes. Immutable during RDO.
struct SketchedJacobian {
  int ell = 0;
  int n_blocks = 0;
  double tau = 0.0;
  std::vector<double> pix;    // n_blocks * ell * 256
  std::vector<double> tr16;   // rows pushed through the T16 transform
  std::vector<double> tr4;    // rows pushed through the T4 transform
  std::vector<double> frob_sq;  // per block ||Bpix||_F^2
  uint64_t build_flops = 0;
  int vjp_passes = 0;

  std::span<const double> block_pix(int i) const {
    return {pix.data() + static_cast<size_t>(i) * ell * kBlockPixels,
            static_cast<size_t>(ell) * kBlockPixels};
  }
  std::span<const double> block_tr(int i, ModeId mode) const {
    const std::vector<double>& m = mode == ModeId::T16 ? tr16 : tr4;
    return {m.data() + static_cast<size_t>(i) * ell * kBlockPixels,
            static_cast<size_t>(ell) * kBlockPixels};
  }
};

// Row j of the result is vjp(net, x, s_j): ell backward passes over the whole
// image, independent of the number of RDO candidates.
std::vector<double> compute_sketched_jacobian(const FeatNet& net, const ImagePlane& plane,
                                              const Sketch& sketch, int threads = 1);

// Column groups of the full matrix, per macroblock, block-row-major order.
std::vector<double> localize(std::span<const double> full, int ell, const BlockGrid& grid,
                             int width);

// Applies the separable mode transform to every row of a per-block matrix.
std::vector<double> to_transform_domain(std::span<const double> block_pix, int ell, ModeId mode);

double compute_tau(std::span<const double> frob_sq, const TauPolicy& policy);

// Full pipeline: sketched Jacobian, per-block slices, both transform-domain
// variants, Frobenius cache, tau.
SketchedJacobian build_sketched_jacobian(const FeatNet& net, const ImagePlane& plane,
                                         const Sketch& sketch, const TauPolicy& tau_policy,
                                         int threads = 1);

// diag(J^T S^T S J): squared column norms of the sketched Jacobian.
std::vector<double> importance_map(std::span<const double> full, int ell, int n_p);

// Map rescaled to [0, 255] and written as a PGM.
void save_importance_pgm(std::span<const double> map, int width, int height,
                         const std::string& path);

// Little-endian sidecar with the per-block matrices, for cross-implementation
// comparison. Layout documented in docs/formats.md.
void save_sidecar(const SketchedJacobian& sj, const std::string& path);
SketchedJacobian load_sidecar(const std::string& path);

}  // namespace fpc
