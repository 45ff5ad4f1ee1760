#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fpc/coding.hpp"
#include "fpc/featnet.hpp"
#include "fpc/image.hpp"
#include "fpc/jacobian_sketch.hpp"
#include "fpc/sketch.hpp"

namespace fpc {

enum class LambdaNorm : uint8_t { None = 0, Trace = 1 };

struct RDOConfig {
  MetricTag metric = MetricTag::Sse;
  int qp = 28;
  double c = 0.85;  // λ = c·2^((qp−12)/3)
  LambdaNorm lambda_norm = LambdaNorm::None;
  TauPolicy tau_policy{};
  double fd_blend = 1.0;
  int threads = 1;
};

double lambda_from_qp(int qp, double c);

// Both SSE and IDSE are evaluated on transform coefficients; the transforms
// are orthonormal, so coefficient SSE equals pixel SSE.
double distortion_sse(std::span<const double> y, std::span<const double> yhat);

// ‖Btr·(y−ŷ)‖² + τ·‖y−ŷ‖²; btr holds ell rows of 256.
double distortion_idse(std::span<const double> btr, int ell, std::span<const double> y,
                       std::span<const double> yhat, double tau);

struct FdNormalizers {
  double mu_f = 1.0;
  double mu_s = 1.0;
};

// ‖f(x)−f(x̂)‖²/μ_F + fd_blend·SSE/μ_S. Two forward passes per call.
double distortion_fd(const FeatNet& net, const Block& x, const Block& xhat, double fd_blend,
                     const FdNormalizers& norm);

// One mode candidate for a block: centered, transformed, quantized, counted.
struct Candidate {
  ModeId mode = ModeId::T16;
  Coeffs y{};
  LevelBlock levels{};
  Coeffs yhat{};
  uint64_t payload_bits = 0;
};

Candidate run_candidate(const Block& x, ModeId mode, const QuantParams& q);

struct BlockDecision {
  int index = 0;
  ModeId mode = ModeId::T16;
  double distortion = 0.0;
  uint64_t bits = 0;  // payload + mode flag
  double cost = 0.0;
  double dist_t16 = 0.0, dist_t4 = 0.0;
  uint64_t bits_t16 = 0, bits_t4 = 0;
};

// Pilot pass for the FD baseline: every block is coded in both modes at the
// target QP once, producing the per-image normalizers and the per-candidate
// distortions reused by the decision loop.
struct FdPilot {
  FdNormalizers norm;
  std::vector<double> dist;  // [block * 2 + mode]
  double distortion(int block, ModeId mode) const {
    return dist[static_cast<size_t>(block) * 2 + static_cast<size_t>(mode)];
  }
};

FdPilot run_fd_pilot(const FeatNet& net, const ImagePlane& plane, const QuantParams& q,
                     double fd_blend);

// Per-block metric context; exactly one of sj / fd is used for IDSE / FD.
struct MetricContext {
  MetricTag metric = MetricTag::Sse;
  const SketchedJacobian* sj = nullptr;
  const FdPilot* fd = nullptr;
  double tau = 0.0;
};

BlockDecision decide_block(const Block& x, int index, const QuantParams& q, double lambda_eff,
                           const MetricContext& ctx);

struct EncodeResult {
  EncodedImage image;
  ImagePlane recon;
  std::vector<BlockDecision> decisions;
  uint64_t total_bits = 0;    // container size × 8
  uint64_t payload_bits = 0;  // entropy payload only
  double total_distortion = 0.0;
  double psnr_db = 0.0;
  double lambda = 0.0;
  double lambda_eff = 0.0;
  double tau = 0.0;
  FdNormalizers fd_norm;
  uint64_t net_flops = 0;  // network work spent inside this call
};

// IDSE wants a prebuilt sketched Jacobian (shared across QPs); when absent it
// is built here from net + sketch. FD needs net; SSE needs neither.
EncodeResult encode_image(const ImagePlane& plane, const RDOConfig& cfg,
                          const FeatNet* net = nullptr, const SketchedJacobian* sj = nullptr,
                          const Sketch* sketch = nullptr);

}  // namespace fpc
