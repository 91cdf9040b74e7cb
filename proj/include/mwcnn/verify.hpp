#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "mwcnn/gradcheck.hpp"
#include "mwcnn/metrics.hpp"
#include "mwcnn/model.hpp"
#include "mwcnn/train.hpp"

namespace mwcnn {

// Executable self-checks: the published shape table, finite-difference
// gradient checks, the Adam update arithmetic, and the published confusion
// counts. Runnable without any dataset.

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Test hooks that deliberately break one piece so the corresponding check
// must fail; used to prove the checks can fail at all.
struct VerifyOptions {
  bool floor_pool_mode = false;       // replaces ceil-mode pooling
  bool perturb_conv_backward = false;  // injects an error into conv gradients
};

inline const std::vector<std::string>& table1_expected_shapes() {
  static const std::vector<std::string> rows = {
      "64x8182x20", "1x8182x20", "1x4091x20", "1x4082x20", "1x1021x20", "1x1012x20",
      "1x253x20",   "1x243x20",  "1x81x20",   "100",       "50",        "2"};
  return rows;
}

// A small architecture whose full forward/backward is cheap enough to check
// against finite differences: one conv block and a dense head on a 2-channel,
// 16-step input.
inline ArchSpec micro_arch() {
  ArchSpec arch;
  arch.n_channels = 2;
  arch.n_timesteps = 16;
  arch.n_maps = 4;
  arch.layers = {
      ConvSpec{4, 2, 5, 1, true},
      PoolSpec{2, 2, true},
      DenseSpec{2, false},
      SoftmaxSpec{},
  };
  return arch;
}

// Worst relative error of the composed network gradients (all parameters and
// the input) against central finite differences, double precision.
inline double micro_net_gradcheck(std::uint64_t seed, double step = 1e-6) {
  const ArchSpec arch = micro_arch();
  auto params = init_params<double>(arch, seed);
  Rng rng(seed + 17);
  TensorD window = gradcheck::random_tensor({arch.n_channels, arch.n_timesteps}, rng);
  const int label = static_cast<int>(rng.below(2));

  auto loss_at = [&](const ModelParamsT<double>& p, const TensorD& x) {
    auto fwd = forward(p, x, RunMode::eval);
    return static_cast<double>(softmax_xent(fwd.logits, label).loss);
  };

  auto fwd = forward(params, window, RunMode::eval);
  auto analytic = backward(params, fwd, label);

  double worst = finite_diff_max_rel_error([&](const TensorD& x) { return loss_at(params, x); }, window,
                                           analytic.input, step);
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    worst = std::max(worst, finite_diff_max_rel_error(
                                [&](const TensorD& tensor) {
                                  ModelParamsT<double> p = params;
                                  p.tensors[t] = tensor;
                                  return loss_at(p, window);
                                },
                                params.tensors[t], analytic.tensors[t], step));
  }
  return worst;
}

namespace detail {

inline CheckResult check_table1(const VerifyOptions& opt) {
  CheckResult res{"table1-shapes", true, ""};
  const ArchSpec arch = build_arch(8, 1024.0, 64, 20, std::nullopt, 0.2, !opt.floor_pool_mode);
  const auto trace = shape_trace(arch);
  const auto& expected = table1_expected_shapes();
  std::ostringstream detail;
  if (trace.size() != expected.size()) {
    res.passed = false;
    detail << "trace has " << trace.size() << " rows, expected " << expected.size();
  } else {
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (trace[i].table_string() != expected[i]) {
        res.passed = false;
        if (detail.tellp() > 0) detail << "; ";
        detail << "row " << (i + 1) << " got " << trace[i].table_string() << ", expected " << expected[i];
      }
    }
  }
  res.detail = res.passed ? "all 12 output sizes match" : detail.str();
  return res;
}

inline CheckResult check_gradients(const VerifyOptions& opt) {
  CheckResult res{"gradient-checks", true, ""};
  std::ostringstream detail;

  const double conv_err =
      gradcheck::check_conv(0, 2, 3, 5, 2, 1, 3, 1e-6, opt.perturb_conv_backward ? 1e-2 : 0.0);
  const double dense_err = gradcheck::check_dense(0);
  const double micro_err = micro_net_gradcheck(0);
  detail << "conv " << conv_err << " (tol 1e-5), dense " << dense_err << " (tol 1e-6), micro-net "
         << micro_err << " (tol 1e-4)";
  res.passed = conv_err <= 1e-5 && dense_err <= 1e-6 && micro_err <= 1e-4;
  res.detail = detail.str();
  return res;
}

inline CheckResult check_adam() {
  CheckResult res{"adam-updates", true, ""};
  TrainConfig cfg;
  TensorT<double> param({1}), grad({1}), m({1}), v({1});
  grad[0] = 1.0;
  // With a constant unit gradient the bias corrections cancel and every step
  // moves by exactly -lr / (1 + eps).
  const double expected_step = -cfg.learning_rate / (1.0 + cfg.adam_eps);
  double worst = 0.0;
  for (std::int64_t t = 1; t <= 3; ++t) {
    const double before = param[0];
    adam_update_tensor(param, grad, m, v, t, cfg);
    worst = std::max(worst, std::abs((param[0] - before) - expected_step));
  }
  std::ostringstream detail;
  detail << "max deviation from hand-computed steps: " << worst << " (tol 1e-12)";
  res.passed = worst <= 1e-12;
  res.detail = detail.str();
  return res;
}

inline CheckResult check_metrics() {
  CheckResult res{"table2-metrics", true, ""};
  const ConfusionCounts counts{441, 431, 34, 44};
  const Metrics m = metrics(counts);
  const double acc_pct = 100.0 * m.accuracy;
  const double prec_pct = 100.0 * *m.precision;
  const double npv_pct = 100.0 * *m.npv;
  std::ostringstream detail;
  detail.precision(4);
  detail << std::fixed << "accuracy " << acc_pct << "% vs 91.78%, precision " << prec_pct
         << "% vs 92.84%, npv " << npv_pct << "% vs 90.73%";
  res.passed = std::abs(acc_pct - 91.78) <= 0.02 && std::abs(prec_pct - 92.84) <= 0.01 &&
               std::abs(npv_pct - 90.73) <= 0.02;
  res.detail = detail.str();
  return res;
}

}  // namespace detail

inline std::vector<CheckResult> run_self_checks(const VerifyOptions& opt = {}) {
  return {
      detail::check_table1(opt),
      detail::check_gradients(opt),
      detail::check_adam(),
      detail::check_metrics(),
  };
}

}  // namespace mwcnn
