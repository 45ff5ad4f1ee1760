#include "fpc/rdo.hpp"

#include <cmath>

#include "fpc/errors.hpp"

namespace fpc {
namespace {

std::vector<double> block_features(const FeatNet& net, const Block& b) {
  Tensor t = Tensor::zeros(1, kBlockSize, kBlockSize);
  std::copy(b.begin(), b.end(), t.v.begin());
  return net.forward(t).v;
}

double pixel_sse(const Block& a, const Block& b) {
  double acc = 0.0;
  for (int i = 0; i < kBlockPixels; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

double lambda_from_qp(int qp, double c) {
  if (!(c > 0.0)) throw ValidationError("rdo: lambda constant must be positive");
  return c * std::exp2((qp - 12) / 3.0);
}

double distortion_sse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw ValidationError("rdo: sse operand length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  return acc;
}

double distortion_idse(std::span<const double> btr, int ell, std::span<const double> y,
                       std::span<const double> yhat, double tau) {
  if (y.size() != kBlockPixels || yhat.size() != kBlockPixels)
    throw ValidationError("rdo: idse expects one block of coefficients");
  if (ell <= 0 || btr.size() != static_cast<size_t>(ell) * kBlockPixels)
    throw ValidationError("rdo: sketch matrix does not match candidate mode");
  double err[kBlockPixels];
  double reg = 0.0;
  for (int i = 0; i < kBlockPixels; ++i) {
    err[i] = y[i] - yhat[i];
    reg += err[i] * err[i];
  }
  double sketched = 0.0;
  for (int j = 0; j < ell; ++j) {
    const double* row = btr.data() + static_cast<size_t>(j) * kBlockPixels;
    double dot = 0.0;
    for (int i = 0; i < kBlockPixels; ++i) dot += row[i] * err[i];
    sketched += dot * dot;
  }
  return sketched + tau * reg;
}

double distortion_fd(const FeatNet& net, const Block& x, const Block& xhat, double fd_blend,
                     const FdNormalizers& norm) {
  const std::vector<double> fx = block_features(net, x);
  const std::vector<double> fxh = block_features(net, xhat);
  double fdist = 0.0;
  for (size_t i = 0; i < fx.size(); ++i) {
    const double d = fx[i] - fxh[i];
    fdist += d * d;
  }
  return fdist / norm.mu_f + fd_blend * pixel_sse(x, xhat) / norm.mu_s;
}

Candidate run_candidate(const Block& x, ModeId mode, const QuantParams& q) {
  Candidate c;
  c.mode = mode;
  Block centered;
  for (int i = 0; i < kBlockPixels; ++i) centered[i] = x[i] - 128.0;
  c.y = dct_forward(centered, mode);
  c.levels = quantize(c.y, q);
  c.yhat = dequantize(c.levels, q);
  c.payload_bits = entropy_bit_count(c.levels, mode);
  return c;
}

FdPilot run_fd_pilot(const FeatNet& net, const ImagePlane& plane, const QuantParams& q,
                     double fd_blend) {
  const BlockGrid grid = make_grid(plane);
  FdPilot pilot;
  std::vector<double> fdist(static_cast<size_t>(grid.count()) * 2);
  std::vector<double> sse(fdist.size());
  for (int i = 0; i < grid.count(); ++i) {
    const Block x = extract_block(plane, i);
    const std::vector<double> fx = block_features(net, x);
    for (ModeId mode : {ModeId::T16, ModeId::T4}) {
      const Candidate c = run_candidate(x, mode, q);
      const Block xhat = reconstruct_block(c.levels, mode, q);
      const std::vector<double> fxh = block_features(net, xhat);
      double fd = 0.0;
      for (size_t k = 0; k < fx.size(); ++k) {
        const double d = fx[k] - fxh[k];
        fd += d * d;
      }
      const size_t slot = static_cast<size_t>(i) * 2 + static_cast<size_t>(mode);
      fdist[slot] = fd;
      sse[slot] = distortion_sse(c.y, c.yhat);
    }
  }
  double mean_f = 0.0, mean_s = 0.0;
  for (size_t k = 0; k < fdist.size(); ++k) {
    mean_f += fdist[k];
    mean_s += sse[k];
  }
  mean_f /= static_cast<double>(fdist.size());
  mean_s /= static_cast<double>(sse.size());
  pilot.norm.mu_f = mean_f > 0.0 ? mean_f : 1.0;
  pilot.norm.mu_s = mean_s > 0.0 ? mean_s : 1.0;
  pilot.dist.resize(fdist.size());
  for (size_t k = 0; k < fdist.size(); ++k)
    pilot.dist[k] = fdist[k] / pilot.norm.mu_f + fd_blend * sse[k] / pilot.norm.mu_s;
  return pilot;
}

BlockDecision decide_block(const Block& x, int index, const QuantParams& q, double lambda_eff,
                           const MetricContext& ctx) {
  BlockDecision d;
  d.index = index;
  double cost[2];
  for (ModeId mode : {ModeId::T16, ModeId::T4}) {
    const Candidate c = run_candidate(x, mode, q);
    double dist = 0.0;
    switch (ctx.metric) {
      case MetricTag::Sse:
        dist = distortion_sse(c.y, c.yhat);
        break;
      case MetricTag::Idse:
        dist = distortion_idse(ctx.sj->block_tr(index, mode), ctx.sj->ell, c.y, c.yhat, ctx.tau);
        break;
      case MetricTag::Fd:
        dist = ctx.fd->distortion(index, mode);
        break;
    }
    const uint64_t bits = c.payload_bits + 1;  // mode flag
    const int m = static_cast<int>(mode);
    cost[m] = dist + lambda_eff * static_cast<double>(bits);
    (mode == ModeId::T16 ? d.dist_t16 : d.dist_t4) = dist;
    (mode == ModeId::T16 ? d.bits_t16 : d.bits_t4) = bits;
  }
  d.mode = cost[1] < cost[0] ? ModeId::T4 : ModeId::T16;  // ties keep T16
  const bool t4 = d.mode == ModeId::T4;
  d.distortion = t4 ? d.dist_t4 : d.dist_t16;
  d.bits = t4 ? d.bits_t4 : d.bits_t16;
  d.cost = cost[t4 ? 1 : 0];
  return d;
}

EncodeResult encode_image(const ImagePlane& plane, const RDOConfig& cfg, const FeatNet* net,
                          const SketchedJacobian* sj, const Sketch* sketch) {
  const QuantParams q = QuantParams::from_qp(cfg.qp);
  const BlockGrid grid = make_grid(plane);
  const uint64_t flops_before = net ? net->flops() : 0;

  std::optional<SketchedJacobian> owned_sj;
  std::optional<FdPilot> pilot;
  MetricContext ctx;
  ctx.metric = cfg.metric;
  if (cfg.metric == MetricTag::Idse) {
    if (!sj) {
      if (!net || !sketch)
        throw ValidationError("rdo: IDSE needs a sketched Jacobian or net + sketch");
      owned_sj = build_sketched_jacobian(*net, plane, *sketch, cfg.tau_policy, cfg.threads);
      sj = &*owned_sj;
    }
    if (sj->n_blocks != grid.count())
      throw ValidationError("rdo: sketched Jacobian does not match image geometry");
    ctx.sj = sj;
    ctx.tau = sj->tau;
  } else if (cfg.metric == MetricTag::Fd) {
    if (!net) throw ValidationError("rdo: FD metric needs a network");
    pilot = run_fd_pilot(*net, plane, q, cfg.fd_blend);
    ctx.fd = &*pilot;
  }

  EncodeResult res;
  res.lambda = lambda_from_qp(cfg.qp, cfg.c);
  res.tau = ctx.tau;
  if (pilot) res.fd_norm = pilot->norm;

  double scale = 1.0;
  if (cfg.lambda_norm == LambdaNorm::Trace) {
    if (cfg.metric == MetricTag::Idse) {
      double acc = 0.0;
      for (double f : sj->frob_sq) acc += f + kBlockPixels * sj->tau;
      scale = acc / (kBlockPixels * static_cast<double>(sj->n_blocks));
    } else if (cfg.metric == MetricTag::Fd) {
      scale = (1.0 + cfg.fd_blend) / pilot->norm.mu_s;
    }
  }
  res.lambda_eff = res.lambda * scale;

  res.recon = plane;
  res.image.qp = static_cast<uint8_t>(cfg.qp);
  res.image.metric = cfg.metric;
  res.image.orig_width = static_cast<uint32_t>(plane.orig_width);
  res.image.orig_height = static_cast<uint32_t>(plane.orig_height);
  res.image.padded_width = static_cast<uint32_t>(plane.width);
  res.image.padded_height = static_cast<uint32_t>(plane.height);
  res.image.blocks.reserve(grid.count());
  res.decisions.reserve(grid.count());

  for (int i = 0; i < grid.count(); ++i) {
    const Block x = extract_block(plane, i);
    BlockDecision d = decide_block(x, i, q, res.lambda_eff, ctx);
    const Candidate chosen = run_candidate(x, d.mode, q);
    res.image.blocks.push_back({d.mode, chosen.levels, chosen.payload_bits});
    insert_block(res.recon, i, reconstruct_block(chosen.levels, d.mode, q));
    res.payload_bits += chosen.payload_bits;
    res.total_distortion += d.distortion;
    res.decisions.push_back(std::move(d));
  }

  res.total_bits = static_cast<uint64_t>(res.image.to_bytes().size()) * 8;
  res.psnr_db = psnr(plane, res.recon);
  res.net_flops = net ? net->flops() - flops_before : 0;
  return res;
}

}  // namespace fpc
