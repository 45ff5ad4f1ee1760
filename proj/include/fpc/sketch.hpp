#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpc/featnet.hpp"

namespace fpc {

enum class SketchKind : uint8_t { Rademacher = 0, Gaussian = 1, DctTop16 = 2 };

SketchKind sketch_kind_from_string(const std::string& s);
std::string to_string(SketchKind kind);

struct SketchSpec {
  SketchKind kind = SketchKind::Rademacher;
  int ell = 0;
  uint64_t seed = 0;
  int n_f = 0;
};

// Dense row-major ell x n_f projection. Scalings make ||S z||^2 an unbiased
// estimate of ||z||^2 (restricted to the retained subspace for DctTop16).
struct Sketch {
  SketchSpec spec;
  std::vector<double> rows;      // ell * n_f
  std::vector<int> retained;     // DctTop16: kept coefficient indices, 16 per channel

  std::span<const double> row(int j) const {
    return {rows.data() + static_cast<size_t>(j) * spec.n_f, static_cast<size_t>(spec.n_f)};
  }
  static Sketch identity(int n_f);
};

// Smallest integer strictly greater than 8 ln(n_r) / eps^2.
int jl_min_dim(int n_r, double epsilon);

// Rademacher and Gaussian kinds; DctTop16 is image-adaptive and needs the
// overload below.
Sketch materialize(const SketchSpec& spec);

// DctTop16: orthonormal DCT over each feature channel's spatial map, keep the
// 16 largest-magnitude coefficients per channel (from the given features),
// reduce the retained coordinates with a Rademacher matrix.
Sketch materialize(const SketchSpec& spec, const FeatureShape& geometry,
                   std::span<const double> features);

std::vector<double> apply(const Sketch& sketch, std::span<const double> z);

}  // namespace fpc
