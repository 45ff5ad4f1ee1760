#include "fpc/featnet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "fpc/errors.hpp"
#include "fpc/rng.hpp"

namespace fpc {

namespace {

constexpr double kInputScale = 1.0 / 255.0;
constexpr char kMagic[4] = {'F', 'P', 'N', 'W'};
constexpr uint16_t kVersion = 1;

double softplus_value(double x, double beta) {
  // Stable for large |beta * x|.
  return std::max(x, 0.0) + std::log1p(std::exp(-beta * std::abs(x))) / beta;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_conv_shapes(const Layer& l) {
  if (l.in_ch <= 0 || l.out_ch <= 0) throw ValidationError("conv channels must be positive");
  if (l.weights.size() != static_cast<size_t>(l.out_ch) * l.in_ch * 9 ||
      l.bias.size() != static_cast<size_t>(l.out_ch)) {
    throw ValidationError("conv weight shapes do not match the layer spec");
  }
  for (float v : l.weights) {
    if (!std::isfinite(v)) throw ValidationError("non-finite conv weight");
  }
  for (float v : l.bias) {
    if (!std::isfinite(v)) throw ValidationError("non-finite conv bias");
  }
}

void store_f32_le(std::vector<uint8_t>& out, float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((u >> (8 * i)) & 0xFF));
}

float load_f32_le(const uint8_t* p) {
  uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

Tensor tensor_from_plane(const ImagePlane& plane) {
  Tensor t = Tensor::zeros(1, plane.height, plane.width);
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      t.at(0, y, x) = static_cast<double>(plane.at(x, y));
    }
  }
  return t;
}

Layer Layer::conv(int in_ch, int out_ch) {
  Layer l;
  l.kind = LayerKind::Conv3x3;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.weights.assign(static_cast<size_t>(out_ch) * in_ch * 9, 0.0f);
  l.bias.assign(static_cast<size_t>(out_ch), 0.0f);
  return l;
}

FeatNet FeatNet::make(std::vector<Layer> layers, bool allow_linear) {
  if (layers.empty()) throw ValidationError("net must have at least one layer");
  int ch = 1;
  bool has_nonlinearity = false;
  for (const Layer& l : layers) {
    switch (l.kind) {
      case LayerKind::Conv3x3:
        if (l.in_ch != ch) throw ValidationError("conv in_ch does not chain with previous layer");
        check_conv_shapes(l);
        ch = l.out_ch;
        break;
      case LayerKind::Relu:
        has_nonlinearity = true;
        break;
      case LayerKind::Softplus:
        if (!(l.beta > 0.0f)) throw ValidationError("softplus beta must be positive");
        has_nonlinearity = true;
        break;
      case LayerKind::AvgPool2:
        break;
      default:
        throw ValidationError("unknown layer kind");
    }
  }
  if (!has_nonlinearity && !allow_linear) {
    throw ValidationError("net has no nonlinearity (pass allow_linear for test configurations)");
  }
  FeatNet net;
  net.layers_ = std::move(layers);
  return net;
}

FeatNet FeatNet::default_arch() {
  return make({Layer::conv(1, 8), Layer::relu(), Layer::avg_pool2(), Layer::conv(8, 16),
               Layer::relu(), Layer::avg_pool2()});
}

FeatNet FeatNet::softplus_arch(float beta) {
  return make({Layer::conv(1, 8), Layer::softplus(beta), Layer::avg_pool2(), Layer::conv(8, 16),
               Layer::softplus(beta), Layer::avg_pool2()});
}

FeatNet FeatNet::linear_arch() {
  return make({Layer::conv(1, 8), Layer::avg_pool2(), Layer::conv(8, 16), Layer::avg_pool2()},
              /*allow_linear=*/true);
}

void FeatNet::init_random(uint64_t seed) {
  CounterRng rng(seed);
  uint64_t draw = 0;
  for (Layer& l : layers_) {
    if (l.kind != LayerKind::Conv3x3) continue;
    double std = std::sqrt(2.0 / (l.in_ch * 9));
    for (float& w : l.weights) {
      w = static_cast<float>(std * rng.gaussian(draw++));
    }
    for (float& b : l.bias) b = 0.0f;
  }
}

FeatureShape FeatNet::output_shape(int h, int w) const {
  if (h <= 0 || w <= 0) throw ValidationError("input dimensions must be positive");
  int ch = 1;
  for (const Layer& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv3x3:
        ch = l.out_ch;
        break;
      case LayerKind::AvgPool2:
        if (h % 2 || w % 2) throw ValidationError("pool input dimensions must be even");
        h /= 2;
        w /= 2;
        break;
      default:
        break;
    }
  }
  return FeatureShape{ch, h, w};
}

namespace {

Tensor conv_forward(const Layer& l, const Tensor& in) {
  Tensor out = Tensor::zeros(l.out_ch, in.h, in.w);
  for (int oc = 0; oc < l.out_ch; ++oc) {
    const float* wbase = l.weights.data() + static_cast<size_t>(oc) * l.in_ch * 9;
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        double acc = static_cast<double>(l.bias[oc]);
        for (int ic = 0; ic < l.in_ch; ++ic) {
          const float* w = wbase + ic * 9;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = y + ky - 1;
            if (iy < 0 || iy >= in.h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int ix = x + kx - 1;
              if (ix < 0 || ix >= in.w) continue;
              acc += static_cast<double>(w[ky * 3 + kx]) * in.at(ic, iy, ix);
            }
          }
        }
        out.at(oc, y, x) = acc;
      }
    }
  }
  return out;
}

// Adjoint of conv_forward with respect to its input (scatter form).
Tensor conv_backward(const Layer& l, const Tensor& go, int in_h, int in_w) {
  Tensor gi = Tensor::zeros(l.in_ch, in_h, in_w);
  for (int oc = 0; oc < l.out_ch; ++oc) {
    const float* wbase = l.weights.data() + static_cast<size_t>(oc) * l.in_ch * 9;
    for (int y = 0; y < go.h; ++y) {
      for (int x = 0; x < go.w; ++x) {
        double g = go.at(oc, y, x);
        for (int ic = 0; ic < l.in_ch; ++ic) {
          const float* w = wbase + ic * 9;
          for (int ky = 0; ky < 3; ++ky) {
            int iy = y + ky - 1;
            if (iy < 0 || iy >= in_h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int ix = x + kx - 1;
              if (ix < 0 || ix >= in_w) continue;
              gi.at(ic, iy, ix) += static_cast<double>(w[ky * 3 + kx]) * g;
            }
          }
        }
      }
    }
  }
  return gi;
}

Tensor pool_forward(const Tensor& in) {
  if (in.h % 2 || in.w % 2) throw ValidationError("pool input dimensions must be even");
  Tensor out = Tensor::zeros(in.ch, in.h / 2, in.w / 2);
  for (int c = 0; c < in.ch; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        out.at(c, y, x) = 0.25 * (in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1) +
                                  in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
  return out;
}

Tensor pool_backward(const Tensor& go) {
  Tensor gi = Tensor::zeros(go.ch, go.h * 2, go.w * 2);
  for (int c = 0; c < go.ch; ++c) {
    for (int y = 0; y < go.h; ++y) {
      for (int x = 0; x < go.w; ++x) {
        double g = 0.25 * go.at(c, y, x);
        gi.at(c, 2 * y, 2 * x) = g;
        gi.at(c, 2 * y, 2 * x + 1) = g;
        gi.at(c, 2 * y + 1, 2 * x) = g;
        gi.at(c, 2 * y + 1, 2 * x + 1) = g;
      }
    }
  }
  return gi;
}

Tensor layer_forward(const Layer& l, const Tensor& in) {
  switch (l.kind) {
    case LayerKind::Conv3x3: {
      if (in.ch != l.in_ch) throw ValidationError("conv input channel mismatch");
      return conv_forward(l, in);
    }
    case LayerKind::Relu: {
      Tensor out = in;
      for (double& v : out.v) v = v > 0.0 ? v : 0.0;
      return out;
    }
    case LayerKind::Softplus: {
      Tensor out = in;
      double beta = static_cast<double>(l.beta);
      for (double& v : out.v) v = softplus_value(v, beta);
      return out;
    }
    case LayerKind::AvgPool2:
      return pool_forward(in);
  }
  throw ValidationError("unknown layer kind");
}

}  // namespace

uint64_t FeatNet::forward_flops(int h, int w) const {
  // Multiplies of a straightforward zero-padded evaluation, counting every
  // kernel tap. Input normalization costs one multiply per pixel.
  uint64_t flops = static_cast<uint64_t>(h) * w;
  int ch = 1;
  for (const Layer& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv3x3:
        flops += static_cast<uint64_t>(l.out_ch) * l.in_ch * 9 * h * w;
        ch = l.out_ch;
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::Softplus:
        flops += 2ull * ch * h * w;
        break;
      case LayerKind::AvgPool2:
        h /= 2;
        w /= 2;
        flops += static_cast<uint64_t>(ch) * h * w;
        break;
    }
  }
  return flops;
}

Tensor FeatNet::forward(const Tensor& x) const {
  Tensor cur = x;
  for (double& v : cur.v) v *= kInputScale;
  for (const Layer& l : layers_) {
    cur = layer_forward(l, cur);
  }
  counters_->flops.fetch_add(forward_flops(x.h, x.w), std::memory_order_relaxed);
  counters_->forwards.fetch_add(1, std::memory_order_relaxed);
  return cur;
}

std::vector<double> FeatNet::features(const ImagePlane& plane) const {
  return forward(tensor_from_plane(plane)).v;
}

FeatNet::Trace FeatNet::trace(const Tensor& x) const {
  Trace tr;
  tr.inputs.reserve(layers_.size());
  Tensor cur = x;
  for (double& v : cur.v) v *= kInputScale;
  for (const Layer& l : layers_) {
    tr.inputs.push_back(cur);
    cur = layer_forward(l, tr.inputs.back());
  }
  tr.output = std::move(cur);
  counters_->flops.fetch_add(forward_flops(x.h, x.w), std::memory_order_relaxed);
  counters_->forwards.fetch_add(1, std::memory_order_relaxed);
  return tr;
}

std::vector<double> FeatNet::vjp(const Trace& tr, std::span<const double> cotangent) const {
  if (cotangent.size() != tr.output.size()) {
    throw ValidationError("cotangent length does not match feature dimension");
  }
  Tensor g = tr.output;
  std::copy(cotangent.begin(), cotangent.end(), g.v.begin());

  uint64_t flops = 0;
  for (size_t k = layers_.size(); k-- > 0;) {
    const Layer& l = layers_[k];
    const Tensor& in = tr.inputs[k];
    switch (l.kind) {
      case LayerKind::Conv3x3:
        g = conv_backward(l, g, in.h, in.w);
        flops += static_cast<uint64_t>(l.out_ch) * l.in_ch * 9 * in.h * in.w;
        break;
      case LayerKind::Relu:
        for (size_t i = 0; i < g.v.size(); ++i) {
          g.v[i] = in.v[i] > 0.0 ? g.v[i] : 0.0;  // derivative 0 at exactly 0
        }
        break;
      case LayerKind::Softplus: {
        double beta = static_cast<double>(l.beta);
        for (size_t i = 0; i < g.v.size(); ++i) {
          g.v[i] *= sigmoid(beta * in.v[i]);
        }
        flops += 2 * g.v.size();
        break;
      }
      case LayerKind::AvgPool2:
        g = pool_backward(g);
        flops += g.v.size() / 4;
        break;
    }
  }
  for (double& v : g.v) v *= kInputScale;
  flops += g.v.size();
  counters_->flops.fetch_add(flops, std::memory_order_relaxed);
  counters_->vjps.fetch_add(1, std::memory_order_relaxed);
  return std::move(g.v);
}

std::vector<double> FeatNet::vjp(const Tensor& x, std::span<const double> cotangent) const {
  return vjp(trace(x), cotangent);
}

Tensor FeatNet::jvp(const Tensor& x, const Tensor& direction) const {
  if (direction.ch != x.ch || direction.h != x.h || direction.w != x.w) {
    throw ValidationError("jvp direction shape mismatch");
  }
  Tensor val = x;
  Tensor tan = direction;
  for (double& v : val.v) v *= kInputScale;
  for (double& v : tan.v) v *= kInputScale;
  for (const Layer& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv3x3: {
        if (val.ch != l.in_ch) throw ValidationError("conv input channel mismatch");
        Tensor new_val = conv_forward(l, val);
        Tensor new_tan = conv_forward(l, tan);
        // conv_forward adds the bias; the tangent path is bias-free
        for (int oc = 0; oc < l.out_ch; ++oc) {
          for (int y = 0; y < new_tan.h; ++y) {
            for (int x2 = 0; x2 < new_tan.w; ++x2) {
              new_tan.at(oc, y, x2) -= static_cast<double>(l.bias[oc]);
            }
          }
        }
        val = std::move(new_val);
        tan = std::move(new_tan);
        break;
      }
      case LayerKind::Relu:
        for (size_t i = 0; i < val.v.size(); ++i) {
          tan.v[i] = val.v[i] > 0.0 ? tan.v[i] : 0.0;
        }
        val = layer_forward(l, val);
        break;
      case LayerKind::Softplus: {
        double beta = static_cast<double>(l.beta);
        for (size_t i = 0; i < val.v.size(); ++i) {
          tan.v[i] *= sigmoid(beta * val.v[i]);
        }
        val = layer_forward(l, val);
        break;
      }
      case LayerKind::AvgPool2:
        val = pool_forward(val);
        tan = pool_forward(tan);
        break;
    }
  }
  counters_->flops.fetch_add(2 * forward_flops(x.h, x.w), std::memory_order_relaxed);
  return tan;
}

Tensor FeatNet::finite_diff_jvp(const Tensor& x, const Tensor& direction, double h) const {
  if (!(h > 0.0)) throw ValidationError("finite difference step must be positive");
  Tensor plus = x;
  Tensor minus = x;
  for (size_t i = 0; i < x.v.size(); ++i) {
    plus.v[i] += h * direction.v[i];
    minus.v[i] -= h * direction.v[i];
  }
  Tensor fp = forward(plus);
  Tensor fm = forward(minus);
  for (size_t i = 0; i < fp.v.size(); ++i) {
    fp.v[i] = (fp.v[i] - fm.v[i]) / (2.0 * h);
  }
  return fp;
}

void FeatNet::reset_counters() const {
  counters_->flops.store(0);
  counters_->forwards.store(0);
  counters_->vjps.store(0);
}

void FeatNet::save(const std::string& path) const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(static_cast<uint8_t>(kVersion & 0xFF));
  out.push_back(static_cast<uint8_t>(kVersion >> 8));
  out.push_back(static_cast<uint8_t>(layers_.size() & 0xFF));
  out.push_back(static_cast<uint8_t>(layers_.size() >> 8));
  for (const Layer& l : layers_) {
    out.push_back(static_cast<uint8_t>(l.kind));
    if (l.kind == LayerKind::Conv3x3) {
      out.push_back(static_cast<uint8_t>(l.in_ch & 0xFF));
      out.push_back(static_cast<uint8_t>(l.in_ch >> 8));
      out.push_back(static_cast<uint8_t>(l.out_ch & 0xFF));
      out.push_back(static_cast<uint8_t>(l.out_ch >> 8));
    } else if (l.kind == LayerKind::Softplus) {
      store_f32_le(out, l.beta);
    }
  }
  for (const Layer& l : layers_) {
    if (l.kind != LayerKind::Conv3x3) continue;
    for (float w : l.weights) store_f32_le(out, w);
    for (float b : l.bias) store_f32_le(out, b);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

FeatNet FeatNet::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  size_t pos = 0;
  auto need = [&](size_t n) {
    if (pos + n > bytes.size()) throw IoError("weights: truncated file '" + path + "'");
  };
  need(8);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("weights: bad magic");
  uint16_t version = static_cast<uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kVersion) throw IoError("weights: unsupported version");
  uint16_t count = static_cast<uint16_t>(bytes[6] | (bytes[7] << 8));
  pos = 8;

  std::vector<Layer> layers;
  layers.reserve(count);
  for (uint16_t i = 0; i < count; ++i) {
    need(1);
    uint8_t kind = bytes[pos++];
    if (kind > 3) throw IoError("weights: unknown layer kind");
    switch (static_cast<LayerKind>(kind)) {
      case LayerKind::Conv3x3: {
        need(4);
        int in_ch = bytes[pos] | (bytes[pos + 1] << 8);
        int out_ch = bytes[pos + 2] | (bytes[pos + 3] << 8);
        pos += 4;
        layers.push_back(Layer::conv(in_ch, out_ch));
        break;
      }
      case LayerKind::Softplus: {
        need(4);
        layers.push_back(Layer::softplus(load_f32_le(bytes.data() + pos)));
        pos += 4;
        break;
      }
      case LayerKind::Relu:
        layers.push_back(Layer::relu());
        break;
      case LayerKind::AvgPool2:
        layers.push_back(Layer::avg_pool2());
        break;
    }
  }
  for (Layer& l : layers) {
    if (l.kind != LayerKind::Conv3x3) continue;
    need((l.weights.size() + l.bias.size()) * 4);
    for (float& w : l.weights) {
      w = load_f32_le(bytes.data() + pos);
      pos += 4;
    }
    for (float& b : l.bias) {
      b = load_f32_le(bytes.data() + pos);
      pos += 4;
    }
  }
  if (pos != bytes.size()) throw IoError("weights: trailing bytes in '" + path + "'");
  return make(std::move(layers), /*allow_linear=*/true);
}

}  // namespace fpc
