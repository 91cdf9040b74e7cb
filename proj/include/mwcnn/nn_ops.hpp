#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mwcnn/detail/rng.hpp"
#include "mwcnn/tensor.hpp"

namespace mwcnn {

// Convolution layer parameters. weights is [out_maps, in_maps, kernel_h,
// kernel_w], bias is [out_maps].
template <typename T>
struct ConvLayerParamsT {
  TensorT<T> weights;
  TensorT<T> bias;
};
using ConvLayerParams = ConvLayerParamsT<float>;

// Dense layer parameters. weights is [out_features, in_features].
template <typename T>
struct DenseLayerParamsT {
  TensorT<T> weights;
  TensorT<T> bias;
};
using DenseLayerParams = DenseLayerParamsT<float>;

// Max-pooling along the time axis. ceil_mode allows a partial final window,
// which is what the architecture's shape arithmetic requires.
struct PoolSpec {
  int kernel_w = 1;
  int stride_w = 1;
  bool ceil_mode = true;
};

// Output width of a ceil/floor-mode pool over an input of width w.
inline int pool_output_width(int w, const PoolSpec& spec) {
  if (spec.kernel_w < 1 || spec.stride_w < 1) throw ShapeError("pool kernel and stride must be >= 1");
  if (spec.kernel_w > w)
    throw ShapeError("pool kernel " + std::to_string(spec.kernel_w) + " exceeds input width " + std::to_string(w));
  int out;
  if (spec.ceil_mode)
    out = static_cast<int>((w - spec.kernel_w + spec.stride_w - 1) / spec.stride_w) + 1;
  else
    out = (w - spec.kernel_w) / spec.stride_w + 1;
  // A window must start inside the input; only reachable when stride > kernel.
  while (out > 1 && static_cast<std::int64_t>(out - 1) * spec.stride_w >= w) --out;
  return out;
}

// Valid (no padding) cross-correlation, stride 1, summed over input maps,
// plus bias. input [Fi,H,W] -> output [Fo, H-kh+1, W-kw+1].
template <typename T>
TensorT<T> conv2d_valid(const TensorT<T>& input, const ConvLayerParamsT<T>& params) {
  if (input.rank() != 3) throw ShapeError("conv input must be rank 3, got " + input.shape_str());
  if (params.weights.rank() != 4) throw ShapeError("conv weights must be rank 4, got " + params.weights.shape_str());
  const int fi = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int fo = params.weights.dim(0), wfi = params.weights.dim(1);
  const int kh = params.weights.dim(2), kw = params.weights.dim(3);
  if (wfi != fi)
    throw ShapeError("conv weights expect " + std::to_string(wfi) + " input maps, input has " + std::to_string(fi));
  if (params.bias.rank() != 1 || params.bias.dim(0) != fo)
    throw ShapeError("conv bias shape " + params.bias.shape_str() + " does not match " + std::to_string(fo) + " maps");
  if (kh > h || kw > w)
    throw ShapeError("conv kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " exceeds input " +
                     input.shape_str());
  const int oh = h - kh + 1, ow = w - kw + 1;

  TensorT<T> out({fo, oh, ow});
  for (int o = 0; o < fo; ++o) {
    T* dst = out.data() + static_cast<std::size_t>(o) * oh * ow;
    const T b = params.bias[o];
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) dst[i] = b;
    for (int i = 0; i < fi; ++i) {
      for (int y = 0; y < kh; ++y) {
        for (int x = 0; x < kw; ++x) {
          const T wv = params.weights[((static_cast<std::int64_t>(o) * fi + i) * kh + y) * kw + x];
          for (int r = 0; r < oh; ++r) {
            const T* src = input.data() + (static_cast<std::size_t>(i) * h + (r + y)) * w + x;
            T* row = dst + static_cast<std::size_t>(r) * ow;
            for (int c = 0; c < ow; ++c) row[c] += wv * src[c];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
struct ConvGradsT {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

// Analytic gradients of conv2d_valid with respect to input, weights, bias.
template <typename T>
ConvGradsT<T> conv2d_grads(const TensorT<T>& input, const ConvLayerParamsT<T>& params,
                           const TensorT<T>& upstream) {
  const int fi = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int fo = params.weights.dim(0);
  const int kh = params.weights.dim(2), kw = params.weights.dim(3);
  const int oh = h - kh + 1, ow = w - kw + 1;
  if (upstream.shape() != std::vector<int>{fo, oh, ow})
    throw ShapeError("conv upstream shape " + upstream.shape_str() + " does not match forward output [" +
                     std::to_string(fo) + "," + std::to_string(oh) + "," + std::to_string(ow) + "]");
  if (params.weights.dim(1) != fi) throw ShapeError("conv weights/input map mismatch");

  ConvGradsT<T> g{TensorT<T>({fi, h, w}), TensorT<T>(params.weights.shape()), TensorT<T>({fo})};
  for (int o = 0; o < fo; ++o) {
    const T* up = upstream.data() + static_cast<std::size_t>(o) * oh * ow;
    T bsum = 0;
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(oh) * ow; ++i) bsum += up[i];
    g.bias[o] = bsum;
    for (int i = 0; i < fi; ++i) {
      for (int y = 0; y < kh; ++y) {
        for (int x = 0; x < kw; ++x) {
          const std::int64_t widx = ((static_cast<std::int64_t>(o) * fi + i) * kh + y) * kw + x;
          const T wv = params.weights[widx];
          T wsum = 0;
          for (int r = 0; r < oh; ++r) {
            const T* src = input.data() + (static_cast<std::size_t>(i) * h + (r + y)) * w + x;
            T* gin = g.input.data() + (static_cast<std::size_t>(i) * h + (r + y)) * w + x;
            const T* uprow = up + static_cast<std::size_t>(r) * ow;
            for (int c = 0; c < ow; ++c) {
              wsum += src[c] * uprow[c];
              gin[c] += wv * uprow[c];
            }
          }
          g.weights[widx] = wsum;
        }
      }
    }
  }
  return g;
}

template <typename T>
struct PoolResultT {
  TensorT<T> output;
  // Flat index into the input tensor of the max chosen for each output cell.
  std::vector<std::int64_t> argmax;
};

// Time-axis max pooling with ceil-mode partial final window. Ties go to the
// lowest index so the backward pass is deterministic.
template <typename T>
PoolResultT<T> maxpool(const TensorT<T>& input, const PoolSpec& spec) {
  if (input.rank() != 3) throw ShapeError("pool input must be rank 3, got " + input.shape_str());
  const int f = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int wo = pool_output_width(w, spec);

  PoolResultT<T> res{TensorT<T>({f, h, wo}), {}};
  res.argmax.resize(static_cast<std::size_t>(f) * h * wo);
  std::int64_t oi = 0;
  for (int m = 0; m < f; ++m) {
    for (int r = 0; r < h; ++r) {
      const T* row = input.data() + (static_cast<std::size_t>(m) * h + r) * w;
      const std::int64_t row_base = (static_cast<std::int64_t>(m) * h + r) * w;
      for (int c = 0; c < wo; ++c, ++oi) {
        const int start = c * spec.stride_w;
        const int end = std::min(start + spec.kernel_w, w);
        int best = start;
        T best_v = row[start];
        for (int i = start + 1; i < end; ++i) {
          if (row[i] > best_v) {
            best_v = row[i];
            best = i;
          }
        }
        res.output[oi] = best_v;
        res.argmax[static_cast<std::size_t>(oi)] = row_base + best;
      }
    }
  }
  return res;
}

// Routes each upstream value to the recorded argmax position. Overlapping
// windows accumulate.
template <typename T>
TensorT<T> maxpool_grads(const std::vector<std::int64_t>& argmax, const TensorT<T>& upstream,
                         const std::vector<int>& input_shape) {
  if (static_cast<std::int64_t>(argmax.size()) != upstream.size())
    throw ShapeError("pool argmax count does not match upstream size");
  TensorT<T> grad(input_shape);
  const std::int64_t n = grad.size();
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    const std::int64_t idx = argmax[i];
    if (idx < 0 || idx >= n)
      throw ShapeError("pool argmax index " + std::to_string(idx) + " out of bounds for " + grad.shape_str());
    grad[idx] += upstream[static_cast<std::int64_t>(i)];
  }
  return grad;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& input) {
  TensorT<T> out(input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? input[i] : T(0);
  return out;
}

// Derivative at 0 is defined as 0.
template <typename T>
TensorT<T> relu_grad(const TensorT<T>& input, const TensorT<T>& upstream) {
  if (!input.same_shape(upstream))
    throw ShapeError("relu grad shape mismatch: " + input.shape_str() + " vs " + upstream.shape_str());
  TensorT<T> out(input.shape());
  for (std::int64_t i = 0; i < input.size(); ++i) out[i] = input[i] > T(0) ? upstream[i] : T(0);
  return out;
}

// W.x + b. input [in] -> [out].
template <typename T>
TensorT<T> dense(const TensorT<T>& input, const DenseLayerParamsT<T>& params) {
  if (input.rank() != 1) throw ShapeError("dense input must be rank 1, got " + input.shape_str());
  const int out_n = params.weights.dim(0), in_n = params.weights.dim(1);
  if (input.dim(0) != in_n)
    throw ShapeError("dense input length " + std::to_string(input.dim(0)) + " does not match in_features " +
                     std::to_string(in_n));
  if (params.bias.dim(0) != out_n) throw ShapeError("dense bias length mismatch");
  TensorT<T> out({out_n});
  for (int o = 0; o < out_n; ++o) {
    const T* wrow = params.weights.data() + static_cast<std::size_t>(o) * in_n;
    T acc = params.bias[o];
    for (int i = 0; i < in_n; ++i) acc += wrow[i] * input[i];
    out[o] = acc;
  }
  return out;
}

template <typename T>
struct DenseGradsT {
  TensorT<T> input;
  TensorT<T> weights;
  TensorT<T> bias;
};

// Standard linear-map adjoints.
template <typename T>
DenseGradsT<T> dense_grads(const TensorT<T>& input, const DenseLayerParamsT<T>& params,
                           const TensorT<T>& upstream) {
  const int out_n = params.weights.dim(0), in_n = params.weights.dim(1);
  if (input.dim(0) != in_n) throw ShapeError("dense grads input length mismatch");
  if (upstream.rank() != 1 || upstream.dim(0) != out_n)
    throw ShapeError("dense upstream shape " + upstream.shape_str() + " does not match out_features " +
                     std::to_string(out_n));
  DenseGradsT<T> g{TensorT<T>({in_n}), TensorT<T>(params.weights.shape()), upstream};
  for (int o = 0; o < out_n; ++o) {
    const T u = upstream[o];
    const T* wrow = params.weights.data() + static_cast<std::size_t>(o) * in_n;
    T* gw = g.weights.data() + static_cast<std::size_t>(o) * in_n;
    for (int i = 0; i < in_n; ++i) {
      gw[i] = u * input[i];
      g.input[i] += u * wrow[i];
    }
  }
  return g;
}

template <typename T>
struct SoftmaxXentT {
  TensorT<T> probs;
  T loss;
  TensorT<T> grad_logits;
};

// Numerically stabilized softmax over the logits.
template <typename T>
TensorT<T> softmax(const TensorT<T>& logits) {
  TensorT<T> probs(logits.shape());
  T m = logits[0];
  for (std::int64_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);
  T z = 0;
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - m);
    z += probs[i];
  }
  for (std::int64_t i = 0; i < logits.size(); ++i) probs[i] /= z;
  return probs;
}

// Softmax + cross-entropy, fused for stability: loss = -ln probs[label],
// grad_logits = probs - onehot(label).
template <typename T>
SoftmaxXentT<T> softmax_xent(const TensorT<T>& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw ShapeError("label " + std::to_string(label) + " out of range for " + logits.shape_str());
  T m = logits[0];
  for (std::int64_t i = 1; i < logits.size(); ++i) m = std::max(m, logits[i]);
  T z = 0;
  for (std::int64_t i = 0; i < logits.size(); ++i) z += std::exp(logits[i] - m);
  SoftmaxXentT<T> res{TensorT<T>(logits.shape()), T(0), TensorT<T>(logits.shape())};
  for (std::int64_t i = 0; i < logits.size(); ++i) res.probs[i] = std::exp(logits[i] - m) / z;
  res.loss = std::log(z) - (logits[label] - m);
  res.grad_logits = res.probs;
  res.grad_logits[label] -= T(1);
  return res;
}

template <typename T>
struct DropoutResultT {
  TensorT<T> output;
  // Per-element factor: 0 for dropped, 1/(1-rate) for kept (1 in eval mode).
  TensorT<T> mask;
};

// Inverted dropout: survivors are scaled at train time so eval is identity.
template <typename T>
DropoutResultT<T> dropout(const TensorT<T>& input, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw InputError("dropout rate must be in [0,1), got " + std::to_string(rate));
  DropoutResultT<T> res{TensorT<T>(input.shape()), TensorT<T>(input.shape())};
  if (!training || rate == 0.0) {
    res.output = input;
    res.mask = TensorT<T>::full(input.shape(), T(1));
    return res;
  }
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const bool keep = rng.uniform01() >= rate;
    const T factor = keep ? keep_scale : T(0);
    res.mask[i] = factor;
    res.output[i] = input[i] * factor;
  }
  return res;
}

// Backward of dropout: multiply by the same mask/scale.
template <typename T>
TensorT<T> dropout_grad(const TensorT<T>& mask, const TensorT<T>& upstream) {
  if (!mask.same_shape(upstream)) throw ShapeError("dropout grad shape mismatch");
  TensorT<T> out(mask.shape());
  for (std::int64_t i = 0; i < mask.size(); ++i) out[i] = mask[i] * upstream[i];
  return out;
}

}  // namespace mwcnn
