#include "fpc/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fpc/errors.hpp"
#include "fpc/rng.hpp"

namespace fpc {

namespace {

// Orthonormal DCT-II matrix of size n, row k = basis function k.
std::vector<double> dct_matrix(int n) {
  std::vector<double> c(static_cast<size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    double a = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int m = 0; m < n; ++m) {
      c[static_cast<size_t>(k) * n + m] = a * std::cos(M_PI * (2 * m + 1) * k / (2.0 * n));
    }
  }
  return c;
}

void validate_spec(const SketchSpec& spec) {
  if (spec.n_f < 1) throw ValidationError("sketch source dimension must be positive");
  if (spec.ell < 1 || spec.ell > spec.n_f) {
    throw ValidationError("sketch target dimension must satisfy 1 <= ell <= n_f");
  }
}

}  // namespace

SketchKind sketch_kind_from_string(const std::string& s) {
  if (s == "rademacher") return SketchKind::Rademacher;
  if (s == "gaussian") return SketchKind::Gaussian;
  if (s == "dcttop16") return SketchKind::DctTop16;
  throw ValidationError("unknown sketch kind '" + s + "'");
}

std::string to_string(SketchKind kind) {
  switch (kind) {
    case SketchKind::Rademacher:
      return "rademacher";
    case SketchKind::Gaussian:
      return "gaussian";
    case SketchKind::DctTop16:
      return "dcttop16";
  }
  return "?";
}

Sketch Sketch::identity(int n_f) {
  Sketch s;
  s.spec = SketchSpec{SketchKind::Rademacher, n_f, 0, n_f};
  s.rows.assign(static_cast<size_t>(n_f) * n_f, 0.0);
  for (int i = 0; i < n_f; ++i) s.rows[static_cast<size_t>(i) * n_f + i] = 1.0;
  return s;
}

int jl_min_dim(int n_r, double epsilon) {
  if (n_r < 2) throw ValidationError("jl_min_dim requires n_r >= 2");
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw ValidationError("jl_min_dim requires 0 < epsilon < 1");
  }
  double bound = 8.0 * std::log(static_cast<double>(n_r)) / (epsilon * epsilon);
  return static_cast<int>(std::floor(bound)) + 1;
}

Sketch materialize(const SketchSpec& spec) {
  validate_spec(spec);
  if (spec.kind == SketchKind::DctTop16) {
    throw ValidationError("dcttop16 sketch needs feature geometry and features");
  }
  Sketch s;
  s.spec = spec;
  s.rows.resize(static_cast<size_t>(spec.ell) * spec.n_f);
  CounterRng rng(spec.seed);
  double scale = 1.0 / std::sqrt(static_cast<double>(spec.ell));
  size_t n = s.rows.size();
  if (spec.kind == SketchKind::Rademacher) {
    for (size_t i = 0; i < n; ++i) s.rows[i] = rng.sign(i) * scale;
  } else {
    for (size_t i = 0; i < n; ++i) s.rows[i] = rng.gaussian(i) * scale;
  }
  return s;
}

Sketch materialize(const SketchSpec& spec, const FeatureShape& geometry,
                   std::span<const double> features) {
  validate_spec(spec);
  if (spec.kind != SketchKind::DctTop16) return materialize(spec);
  if (geometry.count() != spec.n_f) {
    throw ValidationError("feature geometry does not match sketch n_f");
  }
  if (features.size() != static_cast<size_t>(spec.n_f)) {
    throw ValidationError("feature vector length does not match sketch n_f");
  }
  int ch = geometry.ch, fh = geometry.h, fw = geometry.w;
  int spatial = fh * fw;
  int kept_per_ch = std::min(16, spatial);

  std::vector<double> drow = dct_matrix(fh);
  std::vector<double> dcol = dct_matrix(fw);

  Sketch s;
  s.spec = spec;
  s.retained.reserve(static_cast<size_t>(ch) * kept_per_ch);

  // Per-channel 2-D DCT of the feature map; keep the largest coefficients.
  std::vector<double> coef(static_cast<size_t>(spatial));
  std::vector<double> tmp(static_cast<size_t>(spatial));
  for (int c = 0; c < ch; ++c) {
    const double* fmap = features.data() + static_cast<size_t>(c) * spatial;
    for (int u = 0; u < fh; ++u) {
      for (int x = 0; x < fw; ++x) {
        double acc = 0.0;
        for (int y = 0; y < fh; ++y) acc += drow[static_cast<size_t>(u) * fh + y] * fmap[y * fw + x];
        tmp[static_cast<size_t>(u) * fw + x] = acc;
      }
    }
    for (int u = 0; u < fh; ++u) {
      for (int v = 0; v < fw; ++v) {
        double acc = 0.0;
        for (int x = 0; x < fw; ++x) acc += dcol[static_cast<size_t>(v) * fw + x] * tmp[static_cast<size_t>(u) * fw + x];
        coef[static_cast<size_t>(u) * fw + v] = acc;
      }
    }
    std::vector<int> idx(static_cast<size_t>(spatial));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + kept_per_ch, idx.end(), [&](int a, int b) {
      double ma = std::abs(coef[a]), mb = std::abs(coef[b]);
      return ma != mb ? ma > mb : a < b;  // deterministic tie order
    });
    std::sort(idx.begin(), idx.begin() + kept_per_ch);
    for (int k = 0; k < kept_per_ch; ++k) {
      s.retained.push_back(c * spatial + idx[k]);
    }
  }

  // Rademacher reduction over the retained coordinates; each retained
  // coordinate contributes its DCT basis image to the dense row.
  int kept = static_cast<int>(s.retained.size());
  s.rows.assign(static_cast<size_t>(spec.ell) * spec.n_f, 0.0);
  CounterRng rng(spec.seed);
  double scale = 1.0 / std::sqrt(static_cast<double>(spec.ell));
  for (int j = 0; j < spec.ell; ++j) {
    double* row = s.rows.data() + static_cast<size_t>(j) * spec.n_f;
    for (int k = 0; k < kept; ++k) {
      double p = rng.sign(static_cast<uint64_t>(j) * kept + k) * scale;
      int flat = s.retained[k];
      int c = flat / spatial;
      int u = (flat % spatial) / fw;
      int v = flat % fw;
      double* target = row + static_cast<size_t>(c) * spatial;
      for (int y = 0; y < fh; ++y) {
        double ry = p * drow[static_cast<size_t>(u) * fh + y];
        for (int x = 0; x < fw; ++x) {
          target[y * fw + x] += ry * dcol[static_cast<size_t>(v) * fw + x];
        }
      }
    }
  }
  return s;
}

std::vector<double> apply(const Sketch& sketch, std::span<const double> z) {
  if (z.size() != static_cast<size_t>(sketch.spec.n_f)) {
    throw ValidationError("apply: vector length does not match sketch n_f");
  }
  std::vector<double> out(static_cast<size_t>(sketch.spec.ell), 0.0);
  for (int j = 0; j < sketch.spec.ell; ++j) {
    const double* row = sketch.rows.data() + static_cast<size_t>(j) * sketch.spec.n_f;
    double acc = 0.0;
    for (size_t i = 0; i < z.size(); ++i) acc += row[i] * z[i];
    out[j] = acc;
  }
  return out;
}

}  // namespace fpc
