#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpc/rdo.hpp"

namespace fpc {

struct RDPoint {
  int qp = 0;
  uint64_t bits = 0;  // full container
  double bpp = 0.0;
  double psnr_db = 0.0;
  double idse = 0.0;       // 0 when no sketched Jacobian is available
  double feat_dist = 0.0;  // whole-image ‖f(x)−f(x̂)‖²; 0 without a net
  uint64_t flops = 0;      // network flops spent inside the encode call
};

struct RDCurve {
  std::string label;
  std::vector<RDPoint> points;
  uint64_t jacobian_flops = 0;  // one-time per-image sketch cost
  // Reproducibility metadata, carried into the CSV.
  std::string sketch_label = "none";
  int ell = 0;
  uint64_t seed = 0;
};

enum class QualityAxis : uint8_t { Psnr = 0, NegIdse = 1, NegFeatDist = 2 };

std::string metric_to_string(MetricTag m);
MetricTag metric_from_string(const std::string& s);

// IDSE of the coded residuals under a given sketched Jacobian, independent of
// the metric that drove the mode decisions.
double total_idse(const ImagePlane& plane, const EncodedImage& enc, const SketchedJacobian& sj);

double feature_distance(const FeatNet& net, const ImagePlane& a, const ImagePlane& b);

// One encode per QP. The sketched Jacobian is built once per image and shared
// across QPs; when net + sketch are given, IDSE and feature-distance columns
// are reported for any metric.
RDCurve sweep(const ImagePlane& plane, const RDOConfig& base, std::span<const int> qps,
              const FeatNet* net = nullptr, const Sketch* sketch = nullptr);

// Bjøntegaard delta-rate in percent: cubic fit of log10(rate) against the
// chosen quality axis, rate difference integrated over the common quality
// interval.
double bd_rate_percent(const RDCurve& anchor, const RDCurve& test, QualityAxis axis);

struct FlopEstimate {
  double fd = 0.0;
  double idse = 0.0;
  double ratio = 0.0;
};

// fd = h·w·(n_r+1)·C, idse = h'·w'·(2ℓ+1)·C.
FlopEstimate flop_estimate(int h, int w, int hr, int wr, int n_r, int ell, double c_per_pixel);

struct AggregationReport {
  int regions = 0;
  int pairs = 0;
  double pearson_r = 0.0;
  std::vector<double> whole;   // per (region, qp): region-level feature distance
  std::vector<double> summed;  // matching sum of 16×16 block feature distances
};

// Fixed T16 reconstruction per QP; correlates region-level feature distance
// with the sum over the region's 64 sub-blocks.
AggregationReport aggregation_correlation(const ImagePlane& plane, const FeatNet& net,
                                          std::span<const int> qps);

void write_curves_csv(std::span<const RDCurve> curves, const std::string& path);
std::vector<RDCurve> read_curves_csv(const std::string& path);
void write_decisions_csv(std::span<const BlockDecision> decisions, const std::string& path);

}  // namespace fpc
