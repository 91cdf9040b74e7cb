#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mwcnn/dataset.hpp"
#include "mwcnn/detail/binio.hpp"
#include "mwcnn/detail/sha256.hpp"
#include "mwcnn/nn_ops.hpp"

namespace mwcnn {

// ---------------------------------------------------------------------------
// Architecture description
// ---------------------------------------------------------------------------

struct ConvSpec {
  int out_maps = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;  // always 1 in this architecture
  bool relu = true;
};

struct DropoutSpec {
  double rate = 0.2;
};

struct DenseSpec {
  int out_features = 0;
  bool relu = false;
};

struct SoftmaxSpec {};

using LayerSpec = std::variant<ConvSpec, PoolSpec, DropoutSpec, DenseSpec, SoftmaxSpec>;

// Declarative layer list: four convolution/max-pooling feature blocks and a
// three-layer classifier head, with dropout after the last pooling layer and
// softmax after the final dense layer.
struct ArchSpec {
  int n_channels = 0;
  int n_timesteps = 0;
  int n_maps = 20;
  std::vector<LayerSpec> layers;
};

// Pooling (kernel_w, stride_w) for the four pooling layers.
using PoolPlan = std::array<std::pair<int, int>, 4>;

inline PoolPlan pool_plan_for_window(int window_seconds) {
  switch (window_seconds) {
    case 8: return {{{2, 2}, {4, 4}, {4, 4}, {3, 3}}};
    case 5: return {{{2, 2}, {2, 2}, {3, 3}, {4, 4}}};
    case 2: return {{{2, 2}, {2, 2}, {3, 3}, {2, 2}}};
    default:
      throw InputError("unsupported window length " + std::to_string(window_seconds) +
                       " s (supported: 2, 5, 8) and no pooling override given");
  }
}

// Builds the detector architecture for a window of the given length.
// Convolution kernels are fixed (1x11 temporal, channels x 1 spatial, then
// 1x10, 1x10, 1x11); pooling sizes depend on the window length unless an
// explicit override is supplied. ceil_pool enables the partial final pooling
// window; the floor alternative exists only as a diagnostic.
inline ArchSpec build_arch(int window_seconds, double fs, int n_channels, int n_maps = 20,
                           std::optional<PoolPlan> pool_override = std::nullopt, double dropout_rate = 0.2,
                           bool ceil_pool = true) {
  const PoolPlan pools = pool_override ? *pool_override : pool_plan_for_window(window_seconds);
  ArchSpec arch;
  arch.n_channels = n_channels;
  arch.n_timesteps = static_cast<int>(std::llround(window_seconds * fs));
  arch.n_maps = n_maps;
  const std::array<std::pair<int, int>, 5> conv_kernels = {
      {{1, 11}, {n_channels, 1}, {1, 10}, {1, 10}, {1, 11}}};
  auto pool = [&](int i) {
    return PoolSpec{pools[static_cast<std::size_t>(i)].first, pools[static_cast<std::size_t>(i)].second,
                    ceil_pool};
  };
  arch.layers = {
      ConvSpec{n_maps, conv_kernels[0].first, conv_kernels[0].second, 1, true},
      ConvSpec{n_maps, conv_kernels[1].first, conv_kernels[1].second, 1, true},
      pool(0),
      ConvSpec{n_maps, conv_kernels[2].first, conv_kernels[2].second, 1, true},
      pool(1),
      ConvSpec{n_maps, conv_kernels[3].first, conv_kernels[3].second, 1, true},
      pool(2),
      ConvSpec{n_maps, conv_kernels[4].first, conv_kernels[4].second, 1, true},
      pool(3),
      DropoutSpec{dropout_rate},
      DenseSpec{100, true},
      DenseSpec{50, true},
      DenseSpec{2, false},
      SoftmaxSpec{},
  };
  return arch;
}

// ---------------------------------------------------------------------------
// Shape trace
// ---------------------------------------------------------------------------

// Output shape of one numbered layer (conv/pool/dense); dropout and softmax
// are shape-preserving attachments and get no row.
struct TraceEntry {
  enum class Kind { conv, pool, dense } kind = Kind::conv;
  int maps = 0, height = 0, width = 0;  // conv/pool
  int features = 0;                     // dense

  // Formatted as height x width x maps, the convention of the published
  // structure table; dense rows are the bare feature count.
  std::string table_string() const {
    if (kind == Kind::dense) return std::to_string(features);
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(maps);
  }
};

// Symbolic forward shape computation; touches no data.
inline std::vector<TraceEntry> shape_trace(const ArchSpec& arch) {
  std::vector<TraceEntry> trace;
  int maps = 1, h = arch.n_channels, w = arch.n_timesteps;
  int features = -1;  // >= 0 once flattened
  int row = 0;
  for (const auto& layer : arch.layers) {
    ++row;
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      if (features >= 0) throw ShapeError("layer " + std::to_string(row) + ": convolution after flatten");
      const int oh = h - conv->kernel_h + 1, ow = w - conv->kernel_w + 1;
      if (oh <= 0 || ow <= 0)
        throw ShapeError("layer " + std::to_string(row) + " (conv " + std::to_string(conv->kernel_h) + "x" +
                         std::to_string(conv->kernel_w) + "): nonpositive output " + std::to_string(oh) + "x" +
                         std::to_string(ow));
      maps = conv->out_maps;
      h = oh;
      w = ow;
      trace.push_back({TraceEntry::Kind::conv, maps, h, w, 0});
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      if (features >= 0) throw ShapeError("layer " + std::to_string(row) + ": pooling after flatten");
      int ow;
      try {
        ow = pool_output_width(w, *pool);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(row) + ": " + e.what());
      }
      w = ow;
      trace.push_back({TraceEntry::Kind::pool, maps, h, w, 0});
    } else if (const auto* dense_spec = std::get_if<DenseSpec>(&layer)) {
      if (features < 0) features = maps * h * w;
      if (dense_spec->out_features <= 0)
        throw ShapeError("layer " + std::to_string(row) + ": nonpositive dense width");
      features = dense_spec->out_features;
      trace.push_back({TraceEntry::Kind::dense, 0, 0, 0, features});
    }
    // DropoutSpec and SoftmaxSpec preserve shape and are not numbered rows.
  }
  return trace;
}

// Flattened feature count entering the first dense layer.
inline int flatten_size(const ArchSpec& arch) {
  int maps = 1, h = arch.n_channels, w = arch.n_timesteps;
  for (const auto& layer : arch.layers) {
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      maps = conv->out_maps;
      h = h - conv->kernel_h + 1;
      w = w - conv->kernel_w + 1;
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      w = pool_output_width(w, *pool);
    } else if (std::holds_alternative<DenseSpec>(layer)) {
      break;
    }
  }
  return maps * h * w;
}

// ---------------------------------------------------------------------------
// Canonical serialization and fingerprint
// ---------------------------------------------------------------------------

inline std::string canonical_arch_string(const ArchSpec& arch) {
  std::ostringstream os;
  os << "mwcnn-arch-v1\n";
  os << "input " << arch.n_channels << " " << arch.n_timesteps << " " << arch.n_maps << "\n";
  for (const auto& layer : arch.layers) {
    if (const auto* c = std::get_if<ConvSpec>(&layer))
      os << "conv " << c->out_maps << " " << c->kernel_h << " " << c->kernel_w << " " << c->stride
         << (c->relu ? " relu" : "") << "\n";
    else if (const auto* p = std::get_if<PoolSpec>(&layer))
      os << "pool " << p->kernel_w << " " << p->stride_w << (p->ceil_mode ? " ceil" : " floor") << "\n";
    else if (const auto* d = std::get_if<DropoutSpec>(&layer)) {
      os << "dropout ";
      os.precision(6);
      os << std::fixed << d->rate << "\n";
      os.unsetf(std::ios::fixed);
    } else if (const auto* f = std::get_if<DenseSpec>(&layer))
      os << "dense " << f->out_features << (f->relu ? " relu" : "") << "\n";
    else
      os << "softmax\n";
  }
  return os.str();
}

inline std::array<std::uint8_t, 32> arch_fingerprint(const ArchSpec& arch) {
  return detail::sha256(canonical_arch_string(arch));
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

// Weight/bias tensors in layer order: for each conv or dense layer, its
// weights tensor followed by its bias tensor.
template <typename T>
struct ModelParamsT {
  ArchSpec arch;
  std::vector<TensorT<T>> tensors;

  std::size_t tensor_count() const { return tensors.size(); }
};
using ModelParams = ModelParamsT<float>;

namespace detail {

// Indices into arch.layers of the layers that own parameters.
inline std::vector<int> param_layer_indices(const ArchSpec& arch) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(arch.layers.size()); ++i)
    if (std::holds_alternative<ConvSpec>(arch.layers[static_cast<std::size_t>(i)]) ||
        std::holds_alternative<DenseSpec>(arch.layers[static_cast<std::size_t>(i)]))
      idx.push_back(i);
  return idx;
}

// Shapes of the parameter tensors in canonical order.
inline std::vector<std::vector<int>> param_shapes(const ArchSpec& arch) {
  std::vector<std::vector<int>> shapes;
  int maps = 1, h = arch.n_channels, w = arch.n_timesteps;
  int features = -1;
  for (const auto& layer : arch.layers) {
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      shapes.push_back({conv->out_maps, maps, conv->kernel_h, conv->kernel_w});
      shapes.push_back({conv->out_maps});
      maps = conv->out_maps;
      h = h - conv->kernel_h + 1;
      w = w - conv->kernel_w + 1;
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      w = pool_output_width(w, *pool);
    } else if (const auto* dense_spec = std::get_if<DenseSpec>(&layer)) {
      if (features < 0) features = maps * h * w;
      shapes.push_back({dense_spec->out_features, features});
      shapes.push_back({dense_spec->out_features});
      features = dense_spec->out_features;
    }
  }
  return shapes;
}

}  // namespace detail

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Deterministic for a fixed seed.
template <typename T = float>
ModelParamsT<T> init_params(const ArchSpec& arch, std::uint64_t seed) {
  ModelParamsT<T> params;
  params.arch = arch;
  Rng rng = derive_rng(seed, {0x696e6974ULL});
  for (const auto& shape : detail::param_shapes(arch)) {
    TensorT<T> t(shape);
    if (shape.size() >= 2) {
      std::int64_t fan_in = 1, fan_out = shape[0];
      for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
      if (shape.size() == 4) {
        // conv: fans count kernel area
        fan_in = static_cast<std::int64_t>(shape[1]) * shape[2] * shape[3];
        fan_out = static_cast<std::int64_t>(shape[0]) * shape[2] * shape[3];
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

template <typename T>
struct LayerTapeT {
  TensorT<T> input;                 // input to a conv/dense layer
  TensorT<T> pre_act;               // conv/dense output before ReLU
  std::vector<std::int64_t> argmax;  // pool
  std::vector<int> input_shape;     // pool input / pre-flatten shape
  TensorT<T> mask;                  // dropout factors (empty in eval mode)
  std::vector<int> output_shape;    // shape leaving the layer
};

template <typename T>
struct ForwardResultT {
  TensorT<T> logits;
  TensorT<T> probs;
  std::vector<LayerTapeT<T>> tape;  // one entry per arch layer
};

enum class RunMode { train, eval };

// Executes the layer sequence on one window ([n_channels, n_timesteps]).
// Dropout draws from `rng` in train mode only. The tape carries everything
// the backward pass needs.
template <typename T>
ForwardResultT<T> forward(const ModelParamsT<T>& params, const TensorT<T>& window, RunMode mode, Rng* rng = nullptr) {
  const ArchSpec& arch = params.arch;
  if (window.shape() != std::vector<int>{arch.n_channels, arch.n_timesteps})
    throw ShapeError("window shape " + window.shape_str() + " does not match architecture input [" +
                     std::to_string(arch.n_channels) + "," + std::to_string(arch.n_timesteps) + "]");
  if (mode == RunMode::train && rng == nullptr) throw InputError("train-mode forward requires an RNG");

  ForwardResultT<T> res;
  res.tape.resize(arch.layers.size());
  TensorT<T> x = window.reshaped({1, arch.n_channels, arch.n_timesteps});
  std::size_t tensor_idx = 0;
  for (std::size_t li = 0; li < arch.layers.size(); ++li) {
    auto& tape = res.tape[li];
    const auto& layer = arch.layers[li];
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      ConvLayerParamsT<T> p{params.tensors[tensor_idx], params.tensors[tensor_idx + 1]};
      tensor_idx += 2;
      tape.input = x;
      TensorT<T> z = conv2d_valid(x, p);
      if (conv->relu) {
        tape.pre_act = z;
        x = relu(z);
      } else {
        x = std::move(z);
      }
    } else if (const auto* pool = std::get_if<PoolSpec>(&layer)) {
      tape.input_shape = x.shape();
      auto r = maxpool(x, *pool);
      tape.argmax = std::move(r.argmax);
      x = std::move(r.output);
    } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
      if (mode == RunMode::train && drop->rate > 0.0) {
        auto r = dropout(x, drop->rate, *rng, true);
        tape.mask = std::move(r.mask);
        x = std::move(r.output);
      }
    } else if (const auto* dense_spec = std::get_if<DenseSpec>(&layer)) {
      if (x.rank() != 1) {
        tape.input_shape = x.shape();
        x = x.flattened();
      }
      DenseLayerParamsT<T> p{params.tensors[tensor_idx], params.tensors[tensor_idx + 1]};
      tensor_idx += 2;
      tape.input = x;
      TensorT<T> z = dense(x, p);
      if (dense_spec->relu) {
        tape.pre_act = z;
        x = relu(z);
      } else {
        x = std::move(z);
      }
    } else {
      res.logits = x;
      res.probs = softmax(x);
    }
    tape.output_shape = x.shape();
  }
  if (res.probs.empty()) {
    // No softmax layer (diagnostic architectures): treat x as logits.
    res.logits = x;
    res.probs = softmax(x);
  }
  return res;
}

// Gradients in the same canonical order as ModelParamsT::tensors, plus the
// gradient with respect to the input window.
template <typename T>
struct ModelGradsT {
  std::vector<TensorT<T>> tensors;
  TensorT<T> input;
};

template <typename T>
ModelGradsT<T> backward(const ModelParamsT<T>& params, const ForwardResultT<T>& fwd, int label) {
  const ArchSpec& arch = params.arch;
  ModelGradsT<T> grads;
  grads.tensors.resize(params.tensors.size());

  if (label < 0 || label >= fwd.probs.size())
    throw ShapeError("label " + std::to_string(label) + " out of range for " + fwd.probs.shape_str());
  // d(loss)/d(logits) of softmax cross-entropy.
  TensorT<T> g = fwd.probs;
  g[label] -= T(1);

  std::size_t tensor_idx = params.tensors.size();
  for (std::size_t li = arch.layers.size(); li-- > 0;) {
    const auto& layer = arch.layers[li];
    const auto& tape = fwd.tape[li];
    if (const auto* conv = std::get_if<ConvSpec>(&layer)) {
      if (conv->relu) g = relu_grad(tape.pre_act, g);
      tensor_idx -= 2;
      ConvLayerParamsT<T> p{params.tensors[tensor_idx], params.tensors[tensor_idx + 1]};
      auto cg = conv2d_grads(tape.input, p, g);
      grads.tensors[tensor_idx] = std::move(cg.weights);
      grads.tensors[tensor_idx + 1] = std::move(cg.bias);
      g = std::move(cg.input);
    } else if (std::holds_alternative<PoolSpec>(layer)) {
      g = maxpool_grads(tape.argmax, g, tape.input_shape);
    } else if (std::holds_alternative<DropoutSpec>(layer)) {
      if (!tape.mask.empty()) g = dropout_grad(tape.mask, g);
    } else if (const auto* dense_spec = std::get_if<DenseSpec>(&layer)) {
      if (dense_spec->relu) g = relu_grad(tape.pre_act, g);
      tensor_idx -= 2;
      DenseLayerParamsT<T> p{params.tensors[tensor_idx], params.tensors[tensor_idx + 1]};
      auto dg = dense_grads(tape.input, p, g);
      grads.tensors[tensor_idx] = std::move(dg.weights);
      grads.tensors[tensor_idx + 1] = std::move(dg.bias);
      g = std::move(dg.input);
      if (!tape.input_shape.empty()) g = g.reshaped(tape.input_shape);
    }
    // softmax handled by the cross-entropy gradient above
  }
  grads.input = std::move(g);
  return grads;
}

// Eval-mode classification. Ties break toward FS.
template <typename T>
std::pair<Label, TensorT<T>> predict(const ModelParamsT<T>& params, const TensorT<T>& window) {
  auto fwd = forward(params, window, RunMode::eval);
  const Label label = fwd.probs[1] > fwd.probs[0] ? Label::MW : Label::FS;
  return {label, std::move(fwd.probs)};
}

// ---------------------------------------------------------------------------
// Weight persistence
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

// MWNW container: magic "MWNW", version u32, 32-byte fingerprint of the
// canonical architecture serialization, then per parameterized layer:
// layer index u16, tensor count u8, and per tensor rank u8, dims u32 each,
// float32 LE payload.
inline void save_params(const ModelParams& params, const std::string& path) {
  auto os = detail::open_out(path);
  detail::put_bytes(os, "MWNW", 4);
  detail::put_le<std::uint32_t>(os, kWeightsFormatVersion);
  const auto fp = arch_fingerprint(params.arch);
  detail::put_bytes(os, fp.data(), fp.size());
  const auto layer_idx = detail::param_layer_indices(params.arch);
  for (std::size_t j = 0; j < layer_idx.size(); ++j) {
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(layer_idx[j]));
    detail::put_le<std::uint8_t>(os, 2);
    for (std::size_t t = 2 * j; t < 2 * j + 2; ++t) {
      const Tensor& tensor = params.tensors[t];
      detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
      for (int d = 0; d < tensor.rank(); ++d)
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.dim(d)));
      detail::put_bytes(os, tensor.data(), sizeof(float) * static_cast<std::size_t>(tensor.size()));
    }
  }
  if (!os) throw InputError("write failed: " + path);
}

// Loads weights for the given architecture; refuses files whose fingerprint
// does not match.
inline ModelParams load_params(const ArchSpec& arch, const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "MWNW", "MWNW weights");
  const auto version = detail::get_le<std::uint32_t>(is, "version");
  if (version != kWeightsFormatVersion)
    throw ParseError("MWNW version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kWeightsFormatVersion) + ")");
  std::array<std::uint8_t, 32> fp{};
  detail::get_bytes(is, fp.data(), fp.size(), "fingerprint");
  const auto expected = arch_fingerprint(arch);
  if (fp != expected)
    throw FingerprintError("weights file " + path + " was trained on a different architecture (fingerprint " +
                           detail::hex(fp) + ", expected " + detail::hex(expected) + ")");

  ModelParams params;
  params.arch = arch;
  const auto layer_idx = detail::param_layer_indices(arch);
  const auto shapes = detail::param_shapes(arch);
  for (std::size_t j = 0; j < layer_idx.size(); ++j) {
    const auto stored_idx = detail::get_le<std::uint16_t>(is, "layer index");
    if (stored_idx != static_cast<std::uint16_t>(layer_idx[j]))
      throw ParseError("MWNW layer record " + std::to_string(j) + " has index " + std::to_string(stored_idx) +
                       ", expected " + std::to_string(layer_idx[j]));
    const auto tcount = detail::get_le<std::uint8_t>(is, "tensor count");
    if (tcount != 2) throw ParseError("MWNW layer record declares " + std::to_string(tcount) + " tensors, expected 2");
    for (std::size_t t = 2 * j; t < 2 * j + 2; ++t) {
      const auto rank = detail::get_le<std::uint8_t>(is, "tensor rank");
      const auto& want = shapes[t];
      if (rank != want.size())
        throw ParseError("MWNW tensor rank " + std::to_string(rank) + " does not match architecture");
      std::vector<int> dims(rank);
      for (auto& d : dims) d = static_cast<int>(detail::get_le<std::uint32_t>(is, "tensor dim"));
      if (dims != want) throw ParseError("MWNW tensor shape does not match architecture");
      Tensor tensor(dims);
      detail::get_bytes(is, tensor.data(), sizeof(float) * static_cast<std::size_t>(tensor.size()), "tensor payload");
      params.tensors.push_back(std::move(tensor));
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw ParseError("MWNW file has trailing bytes");
  return params;
}

}  // namespace mwcnn
