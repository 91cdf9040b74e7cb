#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include "mwcnn/nn_ops.hpp"

namespace mwcnn {

// Central-difference verification of analytic gradients. Everything here
// runs in double precision; the checked code paths are the same templates
// the float training path instantiates.

// Max over elements of |analytic - numeric| / max(|analytic|, |numeric|, floor).
// `point` is copied and perturbed one element at a time.
inline double finite_diff_max_rel_error(const std::function<double(const TensorD&)>& loss,
                                        TensorD point, const TensorD& analytic,
                                        double h = 1e-6, double floor = 1e-3) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = loss(point);
    point[i] = saved - h;
    const double down = loss(point);
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, rel);
  }
  return worst;
}

namespace gradcheck {

inline TensorD random_tensor(std::vector<int> shape, Rng& rng) {
  TensorD t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

inline double project(const TensorD& t, const TensorD& direction) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i) acc += t[i] * direction[i];
  return acc;
}

// Checks grad_input, grad_weights and grad_bias of a small random conv
// against finite differences of the projected output. Returns the worst
// relative error over all three. `inject_error` offsets one element of the
// analytic weight gradient; the fault-injection path of the self-checks
// uses it to prove the comparison can fail.
inline double check_conv(std::uint64_t seed, int fi = 2, int h = 3, int w = 5, int fo = 2, int kh = 1,
                         int kw = 3, double step = 1e-6, double inject_error = 0.0) {
  Rng rng(seed);
  const TensorD input = random_tensor({fi, h, w}, rng);
  ConvLayerParamsT<double> p{random_tensor({fo, fi, kh, kw}, rng), random_tensor({fo}, rng)};
  const TensorD direction = random_tensor({fo, h - kh + 1, w - kw + 1}, rng);
  auto analytic = conv2d_grads(input, p, direction);
  analytic.weights[0] += inject_error;

  double worst = finite_diff_max_rel_error(
      [&](const TensorD& x) { return project(conv2d_valid(x, p), direction); }, input, analytic.input, step);
  worst = std::max(worst, finite_diff_max_rel_error(
                              [&](const TensorD& wts) {
                                ConvLayerParamsT<double> q{wts, p.bias};
                                return project(conv2d_valid(input, q), direction);
                              },
                              p.weights, analytic.weights, step));
  worst = std::max(worst, finite_diff_max_rel_error(
                              [&](const TensorD& b) {
                                ConvLayerParamsT<double> q{p.weights, b};
                                return project(conv2d_valid(input, q), direction);
                              },
                              p.bias, analytic.bias, step));
  return worst;
}

inline double check_dense(std::uint64_t seed, int in_n = 5, int out_n = 3, double step = 1e-6) {
  Rng rng(seed);
  const TensorD input = random_tensor({in_n}, rng);
  DenseLayerParamsT<double> p{random_tensor({out_n, in_n}, rng), random_tensor({out_n}, rng)};
  const TensorD direction = random_tensor({out_n}, rng);
  const auto analytic = dense_grads(input, p, direction);

  double worst = finite_diff_max_rel_error(
      [&](const TensorD& x) { return project(dense(x, p), direction); }, input, analytic.input, step);
  worst = std::max(worst, finite_diff_max_rel_error(
                              [&](const TensorD& wts) {
                                DenseLayerParamsT<double> q{wts, p.bias};
                                return project(dense(input, q), direction);
                              },
                              p.weights, analytic.weights, step));
  worst = std::max(worst, finite_diff_max_rel_error(
                              [&](const TensorD& b) {
                                DenseLayerParamsT<double> q{p.weights, b};
                                return project(dense(input, q), direction);
                              },
                              p.bias, analytic.bias, step));
  return worst;
}

// ReLU is checked away from the kink at 0; random uniforms land there with
// probability zero.
inline double check_relu(std::uint64_t seed, int n = 64, double step = 1e-6) {
  Rng rng(seed);
  const TensorD input = random_tensor({n}, rng);
  const TensorD direction = random_tensor({n}, rng);
  const TensorD analytic = relu_grad(input, direction);
  return finite_diff_max_rel_error([&](const TensorD& x) { return project(relu(x), direction); }, input,
                                   analytic, step);
}

inline double check_maxpool(std::uint64_t seed, int f = 2, int h = 2, int w = 13, double step = 1e-6) {
  Rng rng(seed);
  const PoolSpec spec{3, 2, true};
  const TensorD input = random_tensor({f, h, w}, rng);
  auto fwd = maxpool(input, spec);
  const TensorD direction = random_tensor(fwd.output.shape(), rng);
  const TensorD analytic = maxpool_grads(fwd.argmax, direction, input.shape());
  return finite_diff_max_rel_error(
      [&](const TensorD& x) { return project(maxpool(x, spec).output, direction); }, input, analytic, step);
}

inline double check_softmax_xent(std::uint64_t seed, int n = 2, double step = 1e-6) {
  Rng rng(seed);
  const TensorD logits = random_tensor({n}, rng);
  const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  const auto res = softmax_xent(logits, label);
  return finite_diff_max_rel_error([&](const TensorD& x) { return softmax_xent(x, label).loss; }, logits,
                                   res.grad_logits, step);
}

// Dropout backward is checked against a frozen mask; with the mask fixed the
// map is linear in the input.
inline double check_dropout(std::uint64_t seed, int n = 64, double rate = 0.2, double step = 1e-6) {
  Rng rng(seed);
  const TensorD input = random_tensor({n}, rng);
  Rng mask_rng(seed + 1);
  const TensorD mask = dropout(input, rate, mask_rng, true).mask;
  const TensorD direction = random_tensor({n}, rng);
  const TensorD analytic = dropout_grad(mask, direction);
  auto apply_mask = [&](const TensorD& x) {
    TensorD out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
    return out;
  };
  return finite_diff_max_rel_error([&](const TensorD& x) { return project(apply_mask(x), direction); },
                                   input, analytic, step);
}

}  // namespace gradcheck
}  // namespace mwcnn
