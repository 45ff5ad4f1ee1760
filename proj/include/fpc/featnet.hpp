#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fpc/image.hpp"

namespace fpc {

// CHW tensor of doubles. Weights are stored in single precision; all
// evaluation math runs in double.
struct Tensor {
  int ch = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  static Tensor zeros(int ch, int h, int w) {
    return Tensor{ch, h, w, std::vector<double>(static_cast<size_t>(ch) * h * w, 0.0)};
  }
  double& at(int c, int y, int x) {
    return v[(static_cast<size_t>(c) * h + y) * w + x];
  }
  double at(int c, int y, int x) const {
    return v[(static_cast<size_t>(c) * h + y) * w + x];
  }
  size_t size() const { return v.size(); }
};

// Raw pixel values in [0, 255]; the net applies its own input scaling.
Tensor tensor_from_plane(const ImagePlane& plane);

enum class LayerKind : uint8_t { Conv3x3 = 0, Relu = 1, Softplus = 2, AvgPool2 = 3 };

struct Layer {
  LayerKind kind = LayerKind::Relu;
  int in_ch = 0;   // Conv3x3 only
  int out_ch = 0;  // Conv3x3 only
  float beta = 10.0f;          // Softplus only
  std::vector<float> weights;  // out_ch * in_ch * 9, [oc][ic][ky][kx]
  std::vector<float> bias;     // out_ch

  static Layer conv(int in_ch, int out_ch);
  static Layer relu() { return of_kind(LayerKind::Relu); }
  static Layer avg_pool2() { return of_kind(LayerKind::AvgPool2); }
  static Layer softplus(float beta) {
    Layer l = of_kind(LayerKind::Softplus);
    l.beta = beta;
    return l;
  }

 private:
  static Layer of_kind(LayerKind k) {
    Layer l;
    l.kind = k;
    return l;
  }
};

struct FeatureShape {
  int ch = 0;
  int h = 0;
  int w = 0;
  int count() const { return ch * h * w; }
};

class FeatNet {
 public:
  // Linear stacks (no ReLU/Softplus) are rejected unless explicitly allowed;
  // they only make sense as test configurations.
  static FeatNet make(std::vector<Layer> layers, bool allow_linear = false);

  // Conv(1->8) ReLU Pool Conv(8->16) ReLU Pool. Small, but the Jacobian is
  // genuinely input-dependent.
  static FeatNet default_arch();
  // Same stack with Softplus nonlinearities; gradient checks avoid the ReLU
  // kink with this one.
  static FeatNet softplus_arch(float beta = 10.0f);
  // Conv Pool Conv Pool, fully linear. Test configurations only.
  static FeatNet linear_arch();

  void init_random(uint64_t seed);
  static FeatNet load(const std::string& path);
  void save(const std::string& path) const;

  const std::vector<Layer>& layers() const { return layers_; }
  FeatureShape output_shape(int h, int w) const;

  Tensor forward(const Tensor& x) const;
  std::vector<double> features(const ImagePlane& plane) const;

  // Layer inputs captured during one forward pass; lets many VJPs reuse a
  // single evaluation.
  struct Trace {
    std::vector<Tensor> inputs;  // inputs.front() is the normalized image
    Tensor output;
  };
  Trace trace(const Tensor& x) const;

  // v^T J_f(x) as a pixel-indexed vector; exact reverse mode.
  std::vector<double> vjp(const Trace& tr, std::span<const double> cotangent) const;
  std::vector<double> vjp(const Tensor& x, std::span<const double> cotangent) const;

  // J_f(x) d; exact forward mode.
  Tensor jvp(const Tensor& x, const Tensor& direction) const;

  // (f(x + h d) - f(x - h d)) / 2h.
  Tensor finite_diff_jvp(const Tensor& x, const Tensor& direction, double h) const;

  // Multiply count of one forward pass at the given input size.
  uint64_t forward_flops(int h, int w) const;

  uint64_t flops() const { return counters_->flops.load(); }
  uint64_t forward_count() const { return counters_->forwards.load(); }
  uint64_t vjp_count() const { return counters_->vjps.load(); }
  void reset_counters() const;

 private:
  struct Counters {
    std::atomic<uint64_t> flops{0};
    std::atomic<uint64_t> forwards{0};
    std::atomic<uint64_t> vjps{0};
  };

  std::vector<Layer> layers_;
  mutable std::shared_ptr<Counters> counters_ = std::make_shared<Counters>();
};

}  // namespace fpc
