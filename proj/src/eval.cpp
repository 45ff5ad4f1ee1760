#include "fpc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fpc/errors.hpp"

namespace fpc {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Cubic least-squares fit of log10(bits) against quality, with the quality
// axis affinely mapped to [0,1] for conditioning.
struct CubicFit {
  double qmin = 0.0, qmax = 0.0;
  double coef[4] = {};

  double operator()(double q) const {
    const double t = (q - qmin) / (qmax - qmin);
    return ((coef[3] * t + coef[2]) * t + coef[1]) * t + coef[0];
  }
};

CubicFit fit_log_rate(std::span<const double> quality, std::span<const double> log_rate) {
  CubicFit f;
  f.qmin = *std::min_element(quality.begin(), quality.end());
  f.qmax = *std::max_element(quality.begin(), quality.end());
  if (!(f.qmax > f.qmin)) throw ValidationError("bdrate: degenerate quality range");

  double ata[4][4] = {};
  double atb[4] = {};
  for (size_t k = 0; k < quality.size(); ++k) {
    const double t = (quality[k] - f.qmin) / (f.qmax - f.qmin);
    double pow_t[4] = {1.0, t, t * t, t * t * t};
    for (int i = 0; i < 4; ++i) {
      atb[i] += pow_t[i] * log_rate[k];
      for (int j = 0; j < 4; ++j) ata[i][j] += pow_t[i] * pow_t[j];
    }
  }
  // Gaussian elimination with partial pivoting on the 4×4 normal equations.
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(ata[r][col]) > std::abs(ata[pivot][col])) pivot = r;
    if (std::abs(ata[pivot][col]) < 1e-12) throw ValidationError("bdrate: singular fit");
    std::swap(ata[col], ata[pivot]);
    std::swap(atb[col], atb[pivot]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double m = ata[r][col] / ata[col][col];
      for (int c = col; c < 4; ++c) ata[r][c] -= m * ata[col][c];
      atb[r] -= m * atb[col];
    }
  }
  for (int i = 0; i < 4; ++i) f.coef[i] = atb[i] / ata[i][i];
  return f;
}

double quality_of(const RDPoint& p, QualityAxis axis) {
  switch (axis) {
    case QualityAxis::Psnr: return p.psnr_db;
    case QualityAxis::NegIdse: return -p.idse;
    case QualityAxis::NegFeatDist: return -p.feat_dist;
  }
  throw ValidationError("bdrate: unknown quality axis");
}

struct AxisPoints {
  std::vector<double> quality;
  std::vector<double> log_rate;
};

AxisPoints curve_points(const RDCurve& curve, QualityAxis axis) {
  if (curve.points.size() < 4) throw ValidationError("bdrate: need at least 4 points per curve");
  std::vector<RDPoint> pts(curve.points.begin(), curve.points.end());
  std::sort(pts.begin(), pts.end(), [&](const RDPoint& a, const RDPoint& b) {
    return quality_of(a, axis) < quality_of(b, axis);
  });
  AxisPoints out;
  for (size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].bits == 0) throw ValidationError("bdrate: zero-rate point");
    const double q = quality_of(pts[i], axis);
    if (i > 0) {
      if (!(q > out.quality.back())) throw ValidationError("bdrate: duplicate quality values");
      // Rate must grow with quality, up to a small fit tolerance.
      if (static_cast<double>(pts[i].bits) < 0.98 * static_cast<double>(pts[i - 1].bits))
        throw ValidationError("bdrate: curve not monotone");
    }
    out.quality.push_back(q);
    out.log_rate.push_back(std::log10(static_cast<double>(pts[i].bits)));
  }
  return out;
}

std::string mode_label(ModeId m) { return m == ModeId::T16 ? "T16" : "T4"; }

ImagePlane plane_region(const ImagePlane& plane, int x0, int y0, int w, int h) {
  std::vector<uint8_t> samples(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      samples[static_cast<size_t>(y) * w + x] = plane.at(x0 + x, y0 + y);
  return make_plane(w, h, samples);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

constexpr const char* kCurveHeader =
    "label,qp,bits,bpp,psnr_db,idse,feat_dist,flops,jacobian_flops,sketch,ell,seed";

}  // namespace

std::string metric_to_string(MetricTag m) {
  switch (m) {
    case MetricTag::Sse: return "sse";
    case MetricTag::Idse: return "idse";
    case MetricTag::Fd: return "fd";
  }
  throw ValidationError("unknown metric tag");
}

MetricTag metric_from_string(const std::string& s) {
  if (s == "sse") return MetricTag::Sse;
  if (s == "idse") return MetricTag::Idse;
  if (s == "fd") return MetricTag::Fd;
  throw ValidationError("unknown metric: " + s);
}

double total_idse(const ImagePlane& plane, const EncodedImage& enc, const SketchedJacobian& sj) {
  const BlockGrid grid = make_grid(plane);
  if (sj.n_blocks != grid.count() || enc.blocks.size() != static_cast<size_t>(grid.count()))
    throw ValidationError("eval: image / bitstream / Jacobian geometry mismatch");
  const QuantParams q = QuantParams::from_qp(enc.qp);
  double acc = 0.0;
  for (int i = 0; i < grid.count(); ++i) {
    const CodedBlock& cb = enc.blocks[i];
    const Block x = extract_block(plane, i);
    Block centered;
    for (int k = 0; k < kBlockPixels; ++k) centered[k] = x[k] - 128.0;
    const Coeffs y = dct_forward(centered, cb.mode);
    const Coeffs yhat = dequantize(cb.levels, q);
    acc += distortion_idse(sj.block_tr(i, cb.mode), sj.ell, y, yhat, sj.tau);
  }
  return acc;
}

double feature_distance(const FeatNet& net, const ImagePlane& a, const ImagePlane& b) {
  if (a.width != b.width || a.height != b.height)
    throw ValidationError("eval: feature distance needs equal plane sizes");
  const std::vector<double> fa = net.features(a);
  const std::vector<double> fb = net.features(b);
  double acc = 0.0;
  for (size_t i = 0; i < fa.size(); ++i) {
    const double d = fa[i] - fb[i];
    acc += d * d;
  }
  return acc;
}

RDCurve sweep(const ImagePlane& plane, const RDOConfig& base, std::span<const int> qps,
              const FeatNet* net, const Sketch* sketch) {
  if (qps.empty()) throw ValidationError("sweep: empty QP list");
  for (size_t i = 1; i < qps.size(); ++i)
    if (qps[i] <= qps[i - 1]) throw ValidationError("sweep: qps must be strictly increasing");

  std::optional<SketchedJacobian> sj;
  if (net && sketch)
    sj = build_sketched_jacobian(*net, plane, *sketch, base.tau_policy, base.threads);

  std::vector<double> orig_features;
  if (net) orig_features = net->features(plane);

  RDCurve curve;
  curve.label = metric_to_string(base.metric);
  curve.jacobian_flops = sj ? sj->build_flops : 0;
  if (sketch) {
    curve.sketch_label = to_string(sketch->spec.kind);
    curve.ell = sketch->spec.ell;
    curve.seed = sketch->spec.seed;
  }
  for (int qp : qps) {
    RDOConfig cfg = base;
    cfg.qp = qp;
    const EncodeResult res = encode_image(plane, cfg, net, sj ? &*sj : nullptr, sketch);
    RDPoint p;
    p.qp = qp;
    p.bits = res.total_bits;
    p.bpp = static_cast<double>(res.total_bits) /
            (static_cast<double>(plane.orig_width) * plane.orig_height);
    p.psnr_db = res.psnr_db;
    if (sj) p.idse = total_idse(plane, res.image, *sj);
    if (net) {
      const std::vector<double> rec_features = net->features(res.recon);
      double acc = 0.0;
      for (size_t i = 0; i < orig_features.size(); ++i) {
        const double d = orig_features[i] - rec_features[i];
        acc += d * d;
      }
      p.feat_dist = acc;
    }
    p.flops = res.net_flops;
    curve.points.push_back(p);
  }
  return curve;
}

double bd_rate_percent(const RDCurve& anchor, const RDCurve& test, QualityAxis axis) {
  const AxisPoints a = curve_points(anchor, axis);
  const AxisPoints t = curve_points(test, axis);
  const double lo = std::max(a.quality.front(), t.quality.front());
  const double hi = std::min(a.quality.back(), t.quality.back());
  if (!(hi > lo)) throw ValidationError("bdrate: quality ranges do not overlap");

  const CubicFit fa = fit_log_rate(a.quality, a.log_rate);
  const CubicFit ft = fit_log_rate(t.quality, t.log_rate);

  constexpr int kSamples = 1000;
  double integral = 0.0;
  double prev = ft(lo) - fa(lo);
  for (int s = 1; s <= kSamples; ++s) {
    const double q = lo + (hi - lo) * s / kSamples;
    const double cur = ft(q) - fa(q);
    integral += 0.5 * (prev + cur) * (hi - lo) / kSamples;
    prev = cur;
  }
  const double avg_diff = integral / (hi - lo);
  return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

FlopEstimate flop_estimate(int h, int w, int hr, int wr, int n_r, int ell, double c_per_pixel) {
  if (h <= 0 || w <= 0 || hr <= 0 || wr <= 0)
    throw ValidationError("flops: dimensions must be positive");
  if (n_r < 0 || ell < 0) throw ValidationError("flops: counts must be non-negative");
  if (!(c_per_pixel > 0)) throw ValidationError("flops: per-pixel cost must be positive");
  FlopEstimate e;
  e.fd = static_cast<double>(h) * w * (n_r + 1) * c_per_pixel;
  e.idse = static_cast<double>(hr) * wr * (2 * ell + 1) * c_per_pixel;
  e.ratio = e.fd / e.idse;
  return e;
}

AggregationReport aggregation_correlation(const ImagePlane& plane, const FeatNet& net,
                                          std::span<const int> qps) {
  constexpr int kRegion = 128;
  if (qps.empty()) throw ValidationError("aggregation: empty QP list");
  const int rx = plane.width / kRegion;
  const int ry = plane.height / kRegion;
  AggregationReport rep;
  rep.regions = rx * ry;
  if (rep.regions < 20) throw ValidationError("aggregation: need at least 20 super-blocks");

  for (int qp : qps) {
    const QuantParams q = QuantParams::from_qp(qp);
    ImagePlane recon = plane;
    const BlockGrid grid = make_grid(plane);
    for (int i = 0; i < grid.count(); ++i) {
      const Candidate c = run_candidate(extract_block(plane, i), ModeId::T16, q);
      insert_block(recon, i, reconstruct_block(c.levels, ModeId::T16, q));
    }
    for (int gy = 0; gy < ry; ++gy) {
      for (int gx = 0; gx < rx; ++gx) {
        const int x0 = gx * kRegion;
        const int y0 = gy * kRegion;
        const ImagePlane ro = plane_region(plane, x0, y0, kRegion, kRegion);
        const ImagePlane rr = plane_region(recon, x0, y0, kRegion, kRegion);
        rep.whole.push_back(feature_distance(net, ro, rr));
        double sum = 0.0;
        for (int sy = 0; sy < kRegion; sy += kBlockSize) {
          for (int sx = 0; sx < kRegion; sx += kBlockSize) {
            const ImagePlane bo = plane_region(plane, x0 + sx, y0 + sy, kBlockSize, kBlockSize);
            const ImagePlane br = plane_region(recon, x0 + sx, y0 + sy, kBlockSize, kBlockSize);
            sum += feature_distance(net, bo, br);
          }
        }
        rep.summed.push_back(sum);
      }
    }
  }
  rep.pairs = static_cast<int>(rep.whole.size());

  double ma = 0.0, mb = 0.0;
  for (int i = 0; i < rep.pairs; ++i) {
    ma += rep.whole[i];
    mb += rep.summed[i];
  }
  ma /= rep.pairs;
  mb /= rep.pairs;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (int i = 0; i < rep.pairs; ++i) {
    const double da = rep.whole[i] - ma;
    const double db = rep.summed[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw ValidationError("aggregation: zero variance, correlation undefined");
  rep.pearson_r = sab / std::sqrt(saa * sbb);
  return rep;
}

void write_curves_csv(std::span<const RDCurve> curves, const std::string& path) {
  std::ostringstream out;
  out << kCurveHeader << '\n';
  for (const RDCurve& c : curves)
    for (const RDPoint& p : c.points)
      out << c.label << ',' << p.qp << ',' << p.bits << ',' << fmt(p.bpp) << ','
          << fmt(p.psnr_db) << ',' << fmt(p.idse) << ',' << fmt(p.feat_dist) << ',' << p.flops
          << ',' << c.jacobian_flops << ',' << c.sketch_label << ',' << c.ell << ',' << c.seed
          << '\n';
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("csv: cannot open " + path + " for writing");
  const std::string s = out.str();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("csv: write failed: " + path);
}

std::vector<RDCurve> read_curves_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kCurveHeader) throw IoError("csv: bad header in " + path);
  std::vector<RDCurve> curves;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 12) throw IoError("csv: malformed row in " + path);
    if (curves.empty() || curves.back().label != cells[0]) {
      curves.emplace_back();
      curves.back().label = cells[0];
    }
    RDPoint p;
    p.qp = std::stoi(cells[1]);
    p.bits = std::stoull(cells[2]);
    p.bpp = std::stod(cells[3]);
    p.psnr_db = std::stod(cells[4]);
    p.idse = std::stod(cells[5]);
    p.feat_dist = std::stod(cells[6]);
    p.flops = std::stoull(cells[7]);
    RDCurve& c = curves.back();
    c.jacobian_flops = std::stoull(cells[8]);
    c.sketch_label = cells[9];
    c.ell = std::stoi(cells[10]);
    c.seed = std::stoull(cells[11]);
    c.points.push_back(p);
  }
  return curves;
}

void write_decisions_csv(std::span<const BlockDecision> decisions, const std::string& path) {
  std::ostringstream out;
  out << "index,mode,distortion,bits,cost\n";
  for (const BlockDecision& d : decisions)
    out << d.index << ',' << mode_label(d.mode) << ',' << fmt(d.distortion) << ',' << d.bits << ','
        << fmt(d.cost) << '\n';
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("csv: cannot open " + path + " for writing");
  const std::string s = out.str();
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw IoError("csv: write failed: " + path);
}

}  // namespace fpc
