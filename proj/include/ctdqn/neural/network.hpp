#pragma once

#include <cmath>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ctdqn/rng.hpp"

// Minimal feed-forward network core: dense and 2-D convolution layers with
// manual backpropagation, double precision throughout. Layers are plain value
// types; a Network owns its parameters and is freely copyable/movable. The
// batched entry points exist because training samples 64 transitions per step
// and the big image network is memory-bandwidth-bound; all kernels accumulate
// in a fixed order so results are bit-reproducible.

namespace ctdqn::neural {

enum class Activation { kRelu, kLinear };

inline const char* to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "linear";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  throw std::invalid_argument("unknown activation: " + s);
}

// Spatial shape, height x width x channels. Dense data uses {1, 1, n}.
struct Shape3 {
  int h = 1;
  int w = 1;
  int c = 0;

  int size() const { return h * w * c; }
  bool operator==(const Shape3&) const = default;
};

struct DenseLayer {
  int in = 0;
  int out = 0;
  Activation activation = Activation::kLinear;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out
};

struct ConvLayer {
  int count = 0;  // number of filters
  int kh = 0;
  int kw = 0;
  int in_channels = 0;
  int stride = 1;
  Activation activation = Activation::kLinear;
  std::vector<double> filters;  // count x kh x kw x in_channels
  std::vector<double> bias;     // count

  // floor((n - k)/s) + 1 per spatial dimension.
  Shape3 output_shape(const Shape3& in) const {
    Shape3 out;
    out.h = (in.h - kh) / stride + 1;
    out.w = (in.w - kw) / stride + 1;
    out.c = count;
    return out;
  }
};

using Layer = std::variant<DenseLayer, ConvLayer>;

// Per-layer pre-activations and activations retained for backpropagation.
// `batch` rows per array; the single-sample API uses batch == 1.
struct ForwardCache {
  int batch = 0;
  std::vector<double> input;                // batch x input_size
  std::vector<std::vector<double>> preact;  // per layer, batch x out_size
  std::vector<std::vector<double>> act;     // per layer, batch x out_size
};

// One gradient array per parameter array, shapes mirroring the layer storage.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  void set_zero() {
    for (auto& g : weights) std::fill(g.begin(), g.end(), 0.0);
    for (auto& g : bias) std::fill(g.begin(), g.end(), 0.0);
  }
};

namespace detail {

// Dot product with eight independent accumulators reduced in a fixed order.
// Vectorizes without -ffast-math and gives the same bits for every call.
inline double dot8(const double* a, const double* b, int n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int k = 0;
  for (; k + 8 <= n; k += 8) {
    for (int l = 0; l < 8; ++l) acc[l] += a[k + l] * b[k + l];
  }
  for (int l = 0; k < n; ++k, ++l) acc[l] += a[k] * b[k];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

inline void axpy(double alpha, const double* x, double* y, int n) {
  for (int k = 0; k < n; ++k) y[k] += alpha * x[k];
}

constexpr int kDenseBlock = 2048;  // K-blocking: one pass over big weight matrices

// Y (M x N) = bias + X (M x K) * W(N x K)^T
inline void dense_forward(const double* x, int m_rows, int k_dim,
                          const double* w, const double* bias, int n_dim,
                          double* y) {
  for (int m = 0; m < m_rows; ++m)
    for (int n = 0; n < n_dim; ++n) y[m * n_dim + n] = bias[n];
  for (int k0 = 0; k0 < k_dim; k0 += kDenseBlock) {
    const int kb = std::min(kDenseBlock, k_dim - k0);
    for (int m = 0; m < m_rows; ++m)
      for (int n = 0; n < n_dim; ++n)
        y[m * n_dim + n] += dot8(x + m * k_dim + k0, w + n * k_dim + k0, kb);
  }
}

// dX (M x K) += dZ (M x N) * W (N x K); dX must be zero-initialized by caller.
inline void dense_backward_input(const double* dz, int m_rows, int n_dim,
                                 const double* w, int k_dim, double* dx) {
  for (int k0 = 0; k0 < k_dim; k0 += kDenseBlock) {
    const int kb = std::min(kDenseBlock, k_dim - k0);
    for (int m = 0; m < m_rows; ++m)
      for (int n = 0; n < n_dim; ++n)
        axpy(dz[m * n_dim + n], w + n * k_dim + k0, dx + m * k_dim + k0, kb);
  }
}

// dW (N x K) += dZ^T (N x M) * X (M x K); db (N) += column sums of dZ.
inline void dense_backward_params(const double* dz, const double* x, int m_rows,
                                  int n_dim, int k_dim, double* dw, double* db) {
  for (int m = 0; m < m_rows; ++m)
    for (int n = 0; n < n_dim; ++n) db[n] += dz[m * n_dim + n];
  for (int k0 = 0; k0 < k_dim; k0 += kDenseBlock) {
    const int kb = std::min(kDenseBlock, k_dim - k0);
    for (int m = 0; m < m_rows; ++m)
      for (int n = 0; n < n_dim; ++n)
        axpy(dz[m * n_dim + n], x + m * k_dim + k0, dw + n * k_dim + k0, kb);
  }
}

// Patch-matrix gather for convolution: col is (oh*ow) x (kh*kw*c), one row per
// output pixel. Image layout is (y*w + x)*c + channel.
inline void im2col(const double* img, const Shape3& in, int kh, int kw,
                   int stride, int oh, int ow, double* col) {
  const int patch = kh * kw * in.c;
  const int seg = kw * in.c;  // one kernel row is contiguous in the image
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* row = col + (oy * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        const double* src = img + ((oy * stride + ky) * in.w + ox * stride) * in.c;
        std::memcpy(row + ky * seg, src, sizeof(double) * seg);
      }
    }
  }
}

// Scatter-add of the patch-matrix gradient back onto the input image.
inline void col2im_add(const double* col, const Shape3& in, int kh, int kw,
                       int stride, int oh, int ow, double* img) {
  const int patch = kh * kw * in.c;
  const int seg = kw * in.c;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* row = col + (oy * ow + ox) * patch;
      for (int ky = 0; ky < kh; ++ky) {
        double* dst = img + ((oy * stride + ky) * in.w + ox * stride) * in.c;
        axpy(1.0, row + ky * seg, dst, seg);
      }
    }
  }
}

}  // namespace detail

// Standalone convolution, the building block behind Network's conv layers.
// Output layout is (oy*ow + ox)*count + filter. Pre-activation only; the
// caller applies the activation.
inline std::vector<double> conv2d_forward(const ConvLayer& layer,
                                          std::span<const double> image,
                                          const Shape3& in_shape) {
  if (in_shape.c != layer.in_channels)
    throw std::invalid_argument("conv2d_forward: channel mismatch");
  if (in_shape.h < layer.kh || in_shape.w < layer.kw)
    throw std::invalid_argument("conv2d_forward: kernel larger than image");
  if (static_cast<int>(image.size()) != in_shape.size())
    throw std::invalid_argument("conv2d_forward: image size mismatch");
  const Shape3 out = layer.output_shape(in_shape);
  const int patch = layer.kh * layer.kw * layer.in_channels;
  std::vector<double> col(static_cast<size_t>(out.h) * out.w * patch);
  detail::im2col(image.data(), in_shape, layer.kh, layer.kw, layer.stride,
                 out.h, out.w, col.data());
  std::vector<double> z(static_cast<size_t>(out.size()));
  for (int px = 0; px < out.h * out.w; ++px) {
    const double* row = col.data() + static_cast<size_t>(px) * patch;
    for (int f = 0; f < layer.count; ++f)
      z[static_cast<size_t>(px) * layer.count + f] =
          layer.bias[f] +
          detail::dot8(row, layer.filters.data() + static_cast<size_t>(f) * patch, patch);
  }
  return z;
}

class Network {
 public:
  Network() = default;
  explicit Network(Shape3 input_shape) : input_shape_(input_shape) {
    if (input_shape.size() <= 0)
      throw std::invalid_argument("network input shape must be non-empty");
  }

  Network& add_dense(int out, Activation act) {
    if (out <= 0) throw std::invalid_argument("dense layer needs out > 0");
    DenseLayer layer;
    layer.in = current_shape().size();
    layer.out = out;
    layer.activation = act;
    layer.weights.assign(static_cast<size_t>(layer.in) * out, 0.0);
    layer.bias.assign(static_cast<size_t>(out), 0.0);
    layers_.emplace_back(std::move(layer));
    shapes_.push_back(Shape3{1, 1, out});
    return *this;
  }

  Network& add_conv(int count, int kernel, int stride, Activation act) {
    const Shape3 in = current_shape();
    if (in.h < kernel || in.w < kernel)
      throw std::invalid_argument("conv kernel larger than input");
    if (stride <= 0 || count <= 0 || kernel <= 0)
      throw std::invalid_argument("conv layer parameters must be positive");
    ConvLayer layer;
    layer.count = count;
    layer.kh = layer.kw = kernel;
    layer.in_channels = in.c;
    layer.stride = stride;
    layer.activation = act;
    layer.filters.assign(static_cast<size_t>(count) * kernel * kernel * in.c, 0.0);
    layer.bias.assign(static_cast<size_t>(count), 0.0);
    const Shape3 out = layer.output_shape(in);
    if (out.h < 1 || out.w < 1)
      throw std::invalid_argument("conv output would be empty");
    layers_.emplace_back(std::move(layer));
    shapes_.push_back(out);
    return *this;
  }

  // He-uniform for relu layers, uniform +-1/sqrt(fan_in) for linear ones,
  // zero biases. Draw order is fixed (layer order, then array order).
  void init_params(Rng& rng) {
    for (auto& layer : layers_) {
      if (auto* d = std::get_if<DenseLayer>(&layer)) {
        const double limit = d->activation == Activation::kRelu
                                 ? std::sqrt(6.0 / d->in)
                                 : 1.0 / std::sqrt(static_cast<double>(d->in));
        for (auto& w : d->weights) w = rng.uniform(-limit, limit);
        std::fill(d->bias.begin(), d->bias.end(), 0.0);
      } else {
        auto& c = std::get<ConvLayer>(layer);
        const int fan_in = c.kh * c.kw * c.in_channels;
        const double limit = c.activation == Activation::kRelu
                                 ? std::sqrt(6.0 / fan_in)
                                 : 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& w : c.filters) w = rng.uniform(-limit, limit);
        std::fill(c.bias.begin(), c.bias.end(), 0.0);
      }
    }
  }

  const Shape3& input_shape() const { return input_shape_; }
  int input_size() const { return input_shape_.size(); }
  int output_size() const {
    return shapes_.empty() ? input_shape_.size() : shapes_.back().size();
  }
  size_t layer_count() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Shape3& shape_after(size_t layer) const { return shapes_.at(layer); }

  bool same_architecture(const Network& other) const {
    if (!(input_shape_ == other.input_shape_)) return false;
    if (layers_.size() != other.layers_.size()) return false;
    for (size_t i = 0; i < layers_.size(); ++i) {
      const Layer& a = layers_[i];
      const Layer& b = other.layers_[i];
      if (a.index() != b.index()) return false;
      if (const auto* da = std::get_if<DenseLayer>(&a)) {
        const auto& db = std::get<DenseLayer>(b);
        if (da->in != db.in || da->out != db.out || da->activation != db.activation)
          return false;
      } else {
        const auto& ca = std::get<ConvLayer>(a);
        const auto& cb = std::get<ConvLayer>(b);
        if (ca.count != cb.count || ca.kh != cb.kh || ca.kw != cb.kw ||
            ca.in_channels != cb.in_channels || ca.stride != cb.stride ||
            ca.activation != cb.activation)
          return false;
      }
    }
    return true;
  }

  Gradients make_gradients() const {
    Gradients g;
    g.weights.reserve(layers_.size());
    g.bias.reserve(layers_.size());
    for (const auto& layer : layers_) {
      if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        g.weights.emplace_back(d->weights.size(), 0.0);
        g.bias.emplace_back(d->bias.size(), 0.0);
      } else {
        const auto& c = std::get<ConvLayer>(layer);
        g.weights.emplace_back(c.filters.size(), 0.0);
        g.bias.emplace_back(c.bias.size(), 0.0);
      }
    }
    return g;
  }

  // Single input, no cache retained.
  std::vector<double> forward(std::span<const double> input) const {
    ForwardCache cache;
    return forward(input, cache);
  }

  std::vector<double> forward(std::span<const double> input,
                              ForwardCache& cache) const {
    if (static_cast<int>(input.size()) != input_size())
      throw std::invalid_argument("network forward: input shape mismatch");
    forward_batch(input, 1, cache);
    return cache.act.back();
  }

  // `inputs` is batch x input_size row-major.
  void forward_batch(std::span<const double> inputs, int batch,
                     ForwardCache& cache) const {
    if (static_cast<int>(inputs.size()) != batch * input_size())
      throw std::invalid_argument("network forward: batch input size mismatch");
    cache.batch = batch;
    cache.input.assign(inputs.begin(), inputs.end());
    cache.preact.resize(layers_.size());
    cache.act.resize(layers_.size());

    const double* x = cache.input.data();
    Shape3 shape = input_shape_;
    for (size_t li = 0; li < layers_.size(); ++li) {
      const int out_size = shapes_[li].size();
      auto& z = cache.preact[li];
      auto& a = cache.act[li];
      z.assign(static_cast<size_t>(batch) * out_size, 0.0);
      if (const auto* d = std::get_if<DenseLayer>(&layers_[li])) {
        detail::dense_forward(x, batch, d->in, d->weights.data(), d->bias.data(),
                              d->out, z.data());
      } else {
        const auto& c = std::get<ConvLayer>(layers_[li]);
        const Shape3 out = c.output_shape(shape);
        const int patch = c.kh * c.kw * c.in_channels;
        scratch_col_.resize(static_cast<size_t>(out.h) * out.w * patch);
        for (int m = 0; m < batch; ++m) {
          const double* img = x + static_cast<size_t>(m) * shape.size();
          detail::im2col(img, shape, c.kh, c.kw, c.stride, out.h, out.w,
                         scratch_col_.data());
          double* zm = z.data() + static_cast<size_t>(m) * out.size();
          for (int px = 0; px < out.h * out.w; ++px) {
            const double* row = scratch_col_.data() + static_cast<size_t>(px) * patch;
            for (int f = 0; f < c.count; ++f)
              zm[static_cast<size_t>(px) * c.count + f] =
                  c.bias[f] + detail::dot8(
                                  row, c.filters.data() + static_cast<size_t>(f) * patch,
                                  patch);
          }
        }
      }
      a = z;
      if (activation_of(li) == Activation::kRelu)
        for (auto& v : a) v = v > 0.0 ? v : 0.0;
      x = a.data();
      shape = shapes_[li];
    }
  }

  // dLoss_dOutput is batch x output_size, matching the cache's batch. Gradients
  // are accumulated into `grads` (caller controls zeroing).
  void backward(const ForwardCache& cache, std::span<const double> dloss_doutput,
                Gradients& grads) const {
    if (cache.preact.size() != layers_.size() || cache.act.size() != layers_.size())
      throw std::invalid_argument("network backward: cache does not match network");
    if (cache.batch <= 0)
      throw std::invalid_argument("network backward: empty cache");
    const int batch = cache.batch;
    if (static_cast<int>(dloss_doutput.size()) != batch * output_size())
      throw std::invalid_argument("network backward: output gradient size mismatch");
    if (static_cast<int>(cache.input.size()) != batch * input_size())
      throw std::invalid_argument("network backward: cache does not match network");
    for (size_t li = 0; li < layers_.size(); ++li) {
      const size_t expect = static_cast<size_t>(batch) * shapes_[li].size();
      if (cache.preact[li].size() != expect || cache.act[li].size() != expect)
        throw std::invalid_argument("network backward: cache does not match network");
    }
    if (grads.weights.size() != layers_.size() || grads.bias.size() != layers_.size())
      throw std::invalid_argument("network backward: gradient buffers mismatch");

    // dLoss/dz of the current layer, walking backwards.
    std::vector<double> delta(dloss_doutput.begin(), dloss_doutput.end());
    for (size_t li = layers_.size(); li-- > 0;) {
      const auto& z = cache.preact[li];
      if (activation_of(li) == Activation::kRelu)
        for (size_t i = 0; i < delta.size(); ++i)
          if (z[i] <= 0.0) delta[i] = 0.0;

      const double* layer_input =
          li == 0 ? cache.input.data() : cache.act[li - 1].data();
      const Shape3 in_shape = li == 0 ? input_shape_ : shapes_[li - 1];
      std::vector<double> dprev(static_cast<size_t>(batch) * in_shape.size(), 0.0);

      if (const auto* d = std::get_if<DenseLayer>(&layers_[li])) {
        detail::dense_backward_params(delta.data(), layer_input, batch, d->out,
                                      d->in, grads.weights[li].data(),
                                      grads.bias[li].data());
        if (li > 0)
          detail::dense_backward_input(delta.data(), batch, d->out,
                                       d->weights.data(), d->in, dprev.data());
      } else {
        const auto& c = std::get<ConvLayer>(layers_[li]);
        const Shape3 out = shapes_[li];
        const int patch = c.kh * c.kw * c.in_channels;
        const int npx = out.h * out.w;
        scratch_col_.resize(static_cast<size_t>(npx) * patch);
        scratch_dcol_.resize(static_cast<size_t>(npx) * patch);
        for (int m = 0; m < batch; ++m) {
          const double* img = layer_input + static_cast<size_t>(m) * in_shape.size();
          const double* dz = delta.data() + static_cast<size_t>(m) * out.size();
          detail::im2col(img, in_shape, c.kh, c.kw, c.stride, out.h, out.w,
                         scratch_col_.data());
          const bool need_dinput = li > 0;
          for (int px = 0; px < npx; ++px) {
            const double* col_row = scratch_col_.data() + static_cast<size_t>(px) * patch;
            double* dcol_row = scratch_dcol_.data() + static_cast<size_t>(px) * patch;
            if (need_dinput) std::fill(dcol_row, dcol_row + patch, 0.0);
            for (int f = 0; f < c.count; ++f) {
              const double g = dz[static_cast<size_t>(px) * c.count + f];
              grads.bias[li][f] += g;
              detail::axpy(g, col_row,
                           grads.weights[li].data() + static_cast<size_t>(f) * patch,
                           patch);
              if (need_dinput)
                detail::axpy(g, c.filters.data() + static_cast<size_t>(f) * patch,
                             dcol_row, patch);
            }
          }
          if (need_dinput)
            detail::col2im_add(scratch_dcol_.data(), in_shape, c.kh, c.kw, c.stride,
                               out.h, out.w,
                               dprev.data() + static_cast<size_t>(m) * in_shape.size());
        }
      }
      delta = std::move(dprev);
    }
  }

 private:
  Activation activation_of(size_t li) const {
    if (const auto* d = std::get_if<DenseLayer>(&layers_[li])) return d->activation;
    return std::get<ConvLayer>(layers_[li]).activation;
  }

  Shape3 current_shape() const {
    return shapes_.empty() ? input_shape_ : shapes_.back();
  }

  Shape3 input_shape_{};
  std::vector<Layer> layers_;
  std::vector<Shape3> shapes_;
  mutable std::vector<double> scratch_col_;
  mutable std::vector<double> scratch_dcol_;
};

}  // namespace ctdqn::neural
