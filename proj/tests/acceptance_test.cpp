// End-to-end checks, one per release criterion. Each test prints a single
// [C#] PASS/FAIL line with the measured quantity so a full run doubles as a
// report.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fpc/eval.hpp"
#include "fpc/rng.hpp"
#include "testutil.hpp"

namespace fpc {
namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void report(int idx, const std::string& name, bool pass, const std::string& measured) {
  std::printf("[C%d] %s: %s (%s)\n", idx, name.c_str(), pass ? "PASS" : "FAIL", measured.c_str());
  std::fflush(stdout);
  EXPECT_TRUE(pass) << "[C" << idx << "] " << name << " — " << measured;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double sq_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

ImagePlane crop16(const ImagePlane& p, int x0, int y0) {
  std::vector<uint8_t> s(256);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) s[static_cast<size_t>(y) * 16 + x] = p.at(x0 + x, y0 + y);
  return make_plane(16, 16, s);
}

RDCurve synthetic_curve(const std::string& label, double rate_factor) {
  RDCurve c;
  c.label = label;
  for (double q : {30.0, 33.0, 36.0, 39.0, 42.0}) {
    RDPoint p;
    p.qp = static_cast<int>(q);
    p.psnr_db = q;
    p.bits = static_cast<uint64_t>(
        std::llround(rate_factor * std::pow(10.0, 2.0 + 0.08 * q)));
    c.points.push_back(p);
  }
  return c;
}

TEST(Acceptance, C01TransformDomainEquivalence) {
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(101);
  uint64_t ctr = 0;
  const int ell = 4;
  const double tau = 0.37;
  double max_rel = 0.0;
  for (int t = 0; t < 100; ++t) {
    const ModeId mode = t % 2 ? ModeId::T4 : ModeId::T16;
    Block x;
    for (int k = 0; k < kBlockPixels; ++k) x[k] = 255.0 * rng.uniform(ctr++) - 128.0;
    const Coeffs y = dct_forward(x, mode);
    Coeffs yhat;
    for (int k = 0; k < kBlockPixels; ++k) yhat[k] = y[k] + 4.0 * (rng.uniform(ctr++) - 0.5);

    std::vector<double> bpix(static_cast<size_t>(ell) * kBlockPixels);
    for (double& v : bpix) v = rng.gaussian(ctr++);
    const std::vector<double> btr = to_transform_domain(bpix, ell, mode);
    const double tdom = distortion_idse(btr, ell, y, yhat, tau);

    Coeffs dy;
    for (int k = 0; k < kBlockPixels; ++k) dy[k] = y[k] - yhat[k];
    const Block r = dct_inverse(dy, mode);
    double pdom = tau * sq_norm(r);
    for (int j = 0; j < ell; ++j)
      pdom += std::pow(dot({bpix.data() + static_cast<size_t>(j) * kBlockPixels, kBlockPixels}, r),
                       2.0);
    max_rel = std::max(max_rel, std::abs(tdom - pdom) / pdom);
  }
  const double elapsed = seconds_since(t0);
  report(1, "transform-domain distortion equals pixel-domain form", max_rel <= 1e-9 && elapsed < 1.0,
         "max_rel=" + fmt6(max_rel) + " over 100 cases, " + fmt6(elapsed) + "s");
}

TEST(Acceptance, C02LinearExtractorExactness) {
  FeatNet net = FeatNet::linear_arch();
  net.init_random(21);
  double max_rel = 0.0;
  int used = 0;
  for (int t = 0; t < 50; ++t) {
    const ImagePlane plane = test::corpus_image(200 + t, 16, 16);
    const Sketch id = Sketch::identity(net.output_shape(16, 16).count());
    const SketchedJacobian sj =
        build_sketched_jacobian(net, plane, id, TauPolicy::explicit_value(0.0));
    const ModeId mode = t % 2 ? ModeId::T4 : ModeId::T16;
    const QuantParams q = QuantParams::from_qp(18 + (t % 5) * 8);
    const Candidate c = run_candidate(extract_block(plane, 0), mode, q);
    const double idse = distortion_idse(sj.block_tr(0, mode), sj.ell, c.y, c.yhat, 0.0);

    Coeffs dy;
    for (int k = 0; k < kBlockPixels; ++k) dy[k] = c.yhat[k] - c.y[k];
    const Block r = dct_inverse(dy, mode);
    const Tensor tx = tensor_from_plane(plane);
    Tensor txh = tx;
    for (int k = 0; k < kBlockPixels; ++k) txh.v[k] += r[k];
    const Tensor fx = net.forward(tx);
    const Tensor fxh = net.forward(txh);
    double fd = 0.0;
    for (size_t i = 0; i < fx.v.size(); ++i) {
      const double d = fxh.v[i] - fx.v[i];
      fd += d * d;
    }
    if (fd < 1e-12) continue;  // lossless at this QP, nothing to compare
    ++used;
    max_rel = std::max(max_rel, std::abs(idse - fd) / fd);
  }
  report(2, "linear extractor makes IDSE equal feature distance",
         max_rel <= 1e-9 && used >= 40,
         "max_rel=" + fmt6(max_rel) + " on " + std::to_string(used) + "/50 lossy cases");
}

TEST(Acceptance, C03TaylorErrorShrinksWithQp) {
  const auto t0 = std::chrono::steady_clock::now();
  FeatNet net = FeatNet::softplus_arch();
  net.init_random(31);
  const ImagePlane plane = test::corpus_image(5, 128, 128);
  const BlockGrid grid = make_grid(plane);
  const Tensor tx = tensor_from_plane(plane);
  const Tensor fx = net.forward(tx);

  std::vector<double> rel;
  const std::array<int, 4> qps = {36, 28, 20, 12};
  for (int qp : qps) {
    const QuantParams q = QuantParams::from_qp(qp);
    RDOConfig cfg;
    cfg.qp = qp;
    const EncodeResult res = encode_image(plane, cfg);

    Tensor dir = Tensor::zeros(1, plane.height, plane.width);
    for (int i = 0; i < grid.count(); ++i) {
      const Candidate c = run_candidate(extract_block(plane, i), res.image.blocks[i].mode, q);
      Coeffs dy;
      for (int k = 0; k < kBlockPixels; ++k) dy[k] = c.yhat[k] - c.y[k];
      const Block r = dct_inverse(dy, res.image.blocks[i].mode);
      const int x0 = grid.origin_x(i), y0 = grid.origin_y(i);
      for (int by = 0; by < kBlockSize; ++by)
        for (int bx = 0; bx < kBlockSize; ++bx)
          dir.at(0, y0 + by, x0 + bx) = r[static_cast<size_t>(by) * kBlockSize + bx];
    }

    const Tensor jr = net.jvp(tx, dir);
    const double idse = sq_norm(jr.v);
    Tensor txh = tx;
    for (size_t k = 0; k < txh.v.size(); ++k) txh.v[k] += dir.v[k];
    const Tensor fxh = net.forward(txh);
    double fd = 0.0;
    for (size_t i = 0; i < fx.v.size(); ++i) {
      const double d = fxh.v[i] - fx.v[i];
      fd += d * d;
    }
    ASSERT_GT(fd, 0.0);
    rel.push_back(std::abs(idse - fd) / fd);
  }
  const bool monotone = rel[0] > rel[1] && rel[1] > rel[2] && rel[2] > rel[3];
  const double elapsed = seconds_since(t0);
  report(3, "linearization error decreases as QP drops 36/28/20/12", monotone && elapsed < 30.0,
         "rel_err=" + fmt6(rel[0]) + "/" + fmt6(rel[1]) + "/" + fmt6(rel[2]) + "/" + fmt6(rel[3]) +
             ", " + fmt6(elapsed) + "s");
}

// Shared by the two C4 sub-checks: compares every sketched-Jacobian entry
// against a central difference, normalized by the row's largest magnitude.
struct FdCheck {
  double max_rel = 0.0;
  int excluded = 0;
  int compared = 0;
};

FdCheck check_rows_against_fd(const FeatNet& net, const ImagePlane& plane, bool kink_filter) {
  const Sketch sk = materialize(
      {SketchKind::Rademacher, 2, 99, net.output_shape(plane.height, plane.width).count()});
  const std::vector<double> full = compute_sketched_jacobian(net, plane, sk, 1);
  const int n_p = plane.pixel_count();
  const Tensor tx = tensor_from_plane(plane);

  std::array<double, 2> scale = {0.0, 0.0};
  for (int j = 0; j < 2; ++j)
    for (int p = 0; p < n_p; ++p)
      scale[j] = std::max(scale[j], std::abs(full[static_cast<size_t>(j) * n_p + p]));

  auto project = [&](const Tensor& f, int j) { return dot(sk.row(j), f.v); };
  auto fd_at = [&](int p, double h, int j_unused_hint) {
    (void)j_unused_hint;
    Tensor plus = tx, minus = tx;
    plus.v[p] += h;
    minus.v[p] -= h;
    const Tensor fp = net.forward(plus);
    const Tensor fm = net.forward(minus);
    return std::array<double, 2>{(project(fp, 0) - project(fm, 0)) / (2.0 * h),
                                 (project(fp, 1) - project(fm, 1)) / (2.0 * h)};
  };

  FdCheck out;
  const double h = 0.25;
  for (int p = 0; p < n_p; ++p) {
    const std::array<double, 2> g = fd_at(p, h, 0);
    std::array<double, 2> g2{};
    if (kink_filter) g2 = fd_at(p, h / 2.0, 0);
    for (int j = 0; j < 2; ++j) {
      if (kink_filter && std::abs(g[j] - g2[j]) > 1e-6 * scale[j]) {
        ++out.excluded;  // a ReLU kink sits inside the stencil
        continue;
      }
      const double row_v = full[static_cast<size_t>(j) * n_p + p];
      out.max_rel = std::max(out.max_rel, std::abs(g[j] - row_v) / scale[j]);
      ++out.compared;
    }
  }
  return out;
}

TEST(Acceptance, C04SketchedRowsMatchFiniteDifferences) {
  const ImagePlane plane = test::corpus_image(7, 32, 32);

  FeatNet soft = FeatNet::softplus_arch();
  soft.init_random(41);
  const FdCheck s = check_rows_against_fd(soft, plane, false);

  FeatNet relu = FeatNet::default_arch();
  relu.init_random(43);
  const FdCheck r = check_rows_against_fd(relu, plane, true);
  const double excl_frac =
      static_cast<double>(r.excluded) / static_cast<double>(r.excluded + r.compared);

  const bool pass = s.max_rel < 1e-3 && r.max_rel < 1e-4 && excl_frac < 0.5;
  report(4, "sketched Jacobian rows match central differences", pass,
         "softplus max_rel=" + fmt6(s.max_rel) + ", relu max_rel=" + fmt6(r.max_rel) +
             " with " + fmt6(100.0 * excl_frac) + "% kink-excluded");
}

TEST(Acceptance, C05JlConcentration) {
  // Mean of the sketched norm ratio at ell=64.
  const int nf = 4096;
  CounterRng zr(55);
  uint64_t ctr = 0;
  double sum_ratio = 0.0;
  std::vector<double> z(nf);
  for (int t = 0; t < 1000; ++t) {
    for (double& v : z) v = zr.gaussian(ctr++);
    const Sketch sk = materialize({SketchKind::Rademacher, 64, 1000 + static_cast<uint64_t>(t), nf});
    sum_ratio += sq_norm(fpc::apply(sk, z)) / sq_norm(z);
  }
  const double mean = sum_ratio / 1000.0;

  // Pairwise distance preservation at the lemma's dimension for n_r=8, eps=0.5.
  const double eps = 0.5;
  const int ell = jl_min_dim(8, eps);
  const int nf2 = 512;
  std::array<std::vector<double>, 8> xs;
  for (int i = 0; i < 8; ++i) {
    xs[i].resize(nf2);
    for (double& v : xs[i]) v = zr.gaussian(ctr++);
  }
  int viol = 0, total = 0;
  for (int s = 0; s < 200; ++s) {
    const Sketch sk =
        materialize({SketchKind::Rademacher, ell, 5000 + static_cast<uint64_t>(s), nf2});
    std::array<std::vector<double>, 8> sx;
    for (int i = 0; i < 8; ++i) sx[i] = fpc::apply(sk, xs[i]);
    for (int i = 0; i < 8; ++i) {
      for (int j = i + 1; j < 8; ++j) {
        double dn = 0.0, sn = 0.0;
        for (int k = 0; k < nf2; ++k) {
          const double d = xs[i][k] - xs[j][k];
          dn += d * d;
        }
        for (int k = 0; k < ell; ++k) {
          const double d = sx[i][k] - sx[j][k];
          sn += d * d;
        }
        const double ratio = sn / dn;
        if (ratio < 1.0 - eps || ratio > 1.0 + eps) ++viol;
        ++total;
      }
    }
  }
  const double rate = static_cast<double>(viol) / total;
  const bool pass = mean >= 0.95 && mean <= 1.05 && rate <= 0.05;
  report(5, "JL sketch concentrates norms and pairwise distances", pass,
         "mean_ratio=" + fmt6(mean) + " at ell=64, violation_rate=" + fmt6(rate) + " at ell=" +
             std::to_string(ell));
}

TEST(Acceptance, C06FlopRatio) {
  const FlopEstimate e = flop_estimate(768, 768, 224, 224, 2, 2, 3.7);
  const bool pass = std::abs(e.ratio - 7.06) <= 0.01;
  report(6, "complexity model reproduces the 7.06x FD/IDSE ratio", pass,
         "ratio=" + fmt6(e.ratio));
}

TEST(Acceptance, C07MonotoneRdUnderIdse) {
  FeatNet net = FeatNet::default_arch();
  net.init_random(71);
  const std::vector<int> qps = {26, 28, 30, 32, 34, 36};

  double worst_bits_rise = 0.0;  // fractional rate increase across a QP step
  double worst_idse_drop = 0.0;  // fractional IDSE decrease across a QP step
  int fd_nonmono_blocks = 0;
  for (int img = 0; img < 10; ++img) {
    const ImagePlane plane = test::corpus_image(700 + img, 96, 96);
    const Sketch sk =
        materialize({SketchKind::Rademacher, 8, 7000 + static_cast<uint64_t>(img),
                     net.output_shape(96, 96).count()});
    RDOConfig cfg;
    cfg.metric = MetricTag::Idse;
    const RDCurve c = sweep(plane, cfg, qps, &net, &sk);
    for (size_t i = 1; i < c.points.size(); ++i) {
      if (c.points[i].bits > c.points[i - 1].bits)
        worst_bits_rise =
            std::max(worst_bits_rise, static_cast<double>(c.points[i].bits) /
                                              static_cast<double>(c.points[i - 1].bits) -
                                          1.0);
      if (c.points[i].idse < c.points[i - 1].idse)
        worst_idse_drop = std::max(worst_idse_drop, 1.0 - c.points[i].idse / c.points[i - 1].idse);
    }

    // Contrast: the per-block feature distance over the same sweep is allowed
    // to wiggle; at least one block must actually do so.
    if (img < 3) {
      const SketchedJacobian sj =
          build_sketched_jacobian(net, plane, sk, TauPolicy::paper_default());
      const BlockGrid grid = make_grid(plane);
      std::vector<std::vector<double>> block_fd(grid.count());
      for (int qp : qps) {
        RDOConfig qcfg = cfg;
        qcfg.qp = qp;
        const EncodeResult res = encode_image(plane, qcfg, nullptr, &sj, nullptr);
        for (int b = 0; b < grid.count(); ++b) {
          const int x0 = grid.origin_x(b), y0 = grid.origin_y(b);
          block_fd[b].push_back(
              feature_distance(net, crop16(plane, x0, y0), crop16(res.recon, x0, y0)));
        }
      }
      for (int b = 0; b < grid.count(); ++b)
        for (size_t i = 1; i < block_fd[b].size(); ++i)
          if (block_fd[b][i] < block_fd[b][i - 1]) {
            ++fd_nonmono_blocks;
            break;
          }
    }
  }
  const bool pass =
      worst_bits_rise <= 0.01 && worst_idse_drop <= 0.01 && fd_nonmono_blocks >= 1;
  report(7, "IDSE-RDO sweeps are monotone while per-block FD is not", pass,
         "worst_bits_rise=" + fmt6(worst_bits_rise) + ", worst_idse_drop=" +
             fmt6(worst_idse_drop) + ", nonmonotone_fd_blocks=" +
             std::to_string(fd_nonmono_blocks));
}

TEST(Acceptance, C08BdRateOracle) {
  const RDCurve base = synthetic_curve("a", 1.0);
  const RDCurve shifted = synthetic_curve("b", 1.10);
  const double zero = bd_rate_percent(base, base, QualityAxis::Psnr);
  const double ten = bd_rate_percent(base, shifted, QualityAxis::Psnr);
  const bool pass = zero == 0.0 && std::abs(ten - 10.0) <= 0.05;
  report(8, "BD-rate reproduces synthetic shifts", pass,
         "identical=" + fmt6(zero) + ", +10% shift=" + fmt6(ten));
}

TEST(Acceptance, C09CodecIntegrity) {
  const std::vector<int> qps = {4, 16, 28, 40, 51};
  bool exact = true;
  double worst_rate_rise = 0.0;
  for (int img = 0; img < 20; ++img) {
    const ImagePlane plane = test::corpus_image(900 + img, 48, 48);
    uint64_t prev_bits = 0;
    for (size_t qi = 0; qi < qps.size(); ++qi) {
      RDOConfig cfg;
      cfg.qp = qps[qi];
      const EncodeResult res = encode_image(plane, cfg);
      const EncodedImage round = EncodedImage::from_bytes(res.image.to_bytes());
      const ImagePlane dec = reconstruct_image(round);
      exact = exact && dec.width == res.recon.width && dec.height == res.recon.height &&
              dec.samples == res.recon.samples;
      if (qi > 0 && res.total_bits > prev_bits)
        worst_rate_rise = std::max(
            worst_rate_rise,
            static_cast<double>(res.total_bits) / static_cast<double>(prev_bits) - 1.0);
      prev_bits = res.total_bits;
    }
  }
  const bool pass = exact && worst_rate_rise <= 0.005;
  report(9, "decode is bit-exact and rate is monotone in QP", pass,
         std::string("bit_exact=") + (exact ? "yes" : "no") + ", worst_rate_rise=" +
             fmt6(worst_rate_rise));
}

TEST(Acceptance, C10LargeTauRecoverSse) {
  FeatNet net = FeatNet::default_arch();
  net.init_random(73);
  int match = 0, total = 0;
  for (int img = 0; img < 10; ++img) {
    const ImagePlane plane = test::corpus_image(1000 + img, 96, 96);
    const Sketch sk =
        materialize({SketchKind::Rademacher, 8, 7300 + static_cast<uint64_t>(img),
                     net.output_shape(96, 96).count()});
    SketchedJacobian sj = build_sketched_jacobian(net, plane, sk, TauPolicy::paper_default());
    sj.tau *= 1000.0;

    RDOConfig icfg;
    icfg.metric = MetricTag::Idse;
    icfg.qp = 28;
    icfg.lambda_norm = LambdaNorm::Trace;
    const EncodeResult ri = encode_image(plane, icfg, nullptr, &sj, nullptr);

    RDOConfig scfg;
    scfg.qp = 28;
    const EncodeResult rs = encode_image(plane, scfg);
    for (size_t b = 0; b < ri.decisions.size(); ++b) {
      match += ri.decisions[b].mode == rs.decisions[b].mode;
      ++total;
    }
  }
  const double frac = static_cast<double>(match) / total;
  report(10, "tau x1000 with trace normalization recovers SSE decisions", frac >= 0.95,
         "mode_match=" + fmt6(100.0 * frac) + "% of " + std::to_string(total) + " blocks");
}

// A plane whose halves pull the two metrics apart: the left half is strong
// white noise (expensive to code, nearly invisible to pooled features), the
// right half is the usual corpus content plus a guaranteed soft edge and
// texture so every image has feature-live structure.
ImagePlane contrast_plane(uint64_t seed, int side) {
  const ImagePlane base = test::corpus_image(seed, side, side);
  CounterRng rng(seed * 77 + 5);
  const double angle = 0.2 + 1.2 * rng.uniform(1);
  const double phase = 6.28 * rng.uniform(2);
  const double freq = 0.3 + 0.4 * rng.uniform(3);
  std::vector<uint8_t> s(static_cast<size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      double v = base.at(x, y);
      if (x < side / 2) {
        v += 30.0 * rng.gaussian(static_cast<uint64_t>(y) * side + x);
      } else {
        const double u = x - side * 0.75;
        const double w = y - side * 0.5;
        v += 45.0 * std::tanh(0.35 * (u * std::cos(angle) + w * std::sin(angle)));
        v += 18.0 * std::sin(freq * u + phase) * std::sin(freq * 0.8 * w);
      }
      s[static_cast<size_t>(y) * side + x] =
          static_cast<uint8_t>(std::clamp<long long>(std::llround(v), 0, 255));
    }
  }
  return make_plane(side, side, s);
}

TEST(Acceptance, C11NegativeBdRateOnFeatureAxis) {
  // Features at 1/16 resolution: the desk-scale stand-in for a detection
  // backbone's deep, heavily strided feature maps. A shallower stack barely
  // distinguishes noise from structure and the effect drowns in sketch noise.
  FeatNet net = FeatNet::make({Layer::conv(1, 8), Layer::relu(), Layer::avg_pool2(),
                               Layer::avg_pool2(), Layer::conv(8, 16), Layer::relu(),
                               Layer::avg_pool2(), Layer::avg_pool2()});
  net.init_random(111);
  const std::array<int, 4> qps = {22, 24, 26, 28};

  std::array<uint64_t, 4> bits_s{}, bits_i{};
  std::array<double, 4> fd_s{}, fd_i{};
  for (int img = 0; img < 10; ++img) {
    const ImagePlane plane = contrast_plane(1100 + img, 96);
    const Sketch sk =
        materialize({SketchKind::Rademacher, 8, 1111 + static_cast<uint64_t>(img),
                     net.output_shape(96, 96).count()});
    // The default blend (mean Frobenius norm) towers over the quadratic-form
    // weights at this scale and would pull every decision back to SSE. Anchor
    // tau at a third of the mean diagonal weight instead: small enough to keep
    // the metric input-dependent, big enough to damp sketch-noise mode flips.
    SketchedJacobian sj =
        build_sketched_jacobian(net, plane, sk, TauPolicy::explicit_value(0.0));
    double mean_diag = 0.0;
    for (double f : sj.frob_sq) mean_diag += f;
    mean_diag /= 256.0 * static_cast<double>(sj.n_blocks);
    sj.tau = 0.33 * mean_diag;
    for (size_t qi = 0; qi < qps.size(); ++qi) {
      RDOConfig scfg;
      scfg.qp = qps[qi];
      const EncodeResult rs = encode_image(plane, scfg);
      bits_s[qi] += rs.total_bits;
      fd_s[qi] += feature_distance(net, plane, rs.recon);

      RDOConfig icfg;
      icfg.metric = MetricTag::Idse;
      icfg.qp = qps[qi];
      icfg.lambda_norm = LambdaNorm::Trace;
      const EncodeResult ri = encode_image(plane, icfg, nullptr, &sj, nullptr);
      bits_i[qi] += ri.total_bits;
      fd_i[qi] += feature_distance(net, plane, ri.recon);
    }
  }
  RDCurve sse, idse;
  sse.label = "sse";
  idse.label = "idse";
  for (size_t qi = 0; qi < qps.size(); ++qi) {
    RDPoint p;
    p.qp = qps[qi];
    p.bits = bits_s[qi];
    p.feat_dist = fd_s[qi];
    sse.points.push_back(p);
    p.bits = bits_i[qi];
    p.feat_dist = fd_i[qi];
    idse.points.push_back(p);
  }
  const double bd = bd_rate_percent(sse, idse, QualityAxis::NegFeatDist);
  report(11, "IDSE-RDO wins BD-rate on the feature-distance axis", bd < 0.0,
         "bd_rate_percent=" + fmt6(bd) + " (direction only, no magnitude claim)");
}

TEST(Acceptance, C12AggregationCorrelation) {
  FeatNet net = FeatNet::default_arch();
  net.init_random(131);
  const ImagePlane plane = test::corpus_image(121, 640, 512);
  const std::vector<int> qps = {28};
  const AggregationReport rep = aggregation_correlation(plane, net, qps);
  const bool pass = rep.pairs >= 20 && std::isfinite(rep.pearson_r) &&
                    std::abs(rep.pearson_r) <= 1.0;
  report(12, "region-vs-summed feature distance correlation", pass,
         "pearson_r=" + fmt6(rep.pearson_r) + " over " + std::to_string(rep.pairs) +
             " super-blocks; reference value 0.997 reported, not asserted");
}

}  // namespace
}  // namespace fpc
