#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "mwcnn/metrics.hpp"
#include "mwcnn/model.hpp"

namespace mwcnn {

// ---------------------------------------------------------------------------
// Configuration and Adam
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout_rate = 0.2;  // consumed by build_arch; kept here so one config describes a run
  std::uint64_t seed = 0;
  int n_jobs = 1;  // parallel cross-validation repetitions (0 = hardware)

  void validate() const {
    if (epochs < 1) throw InputError("epochs must be >= 1");
    if (batch_size < 1) throw InputError("batch_size must be >= 1");
    if (!(learning_rate >= 0)) throw InputError("learning_rate must be nonnegative");
    if (dropout_rate < 0 || dropout_rate >= 1) throw InputError("dropout_rate must be in [0,1)");
  }
};

// First/second moment estimates per parameter tensor, plus the shared step
// counter.
template <typename T>
struct AdamStateT {
  std::vector<TensorT<T>> m;
  std::vector<TensorT<T>> v;
  std::int64_t t = 0;
};
using AdamState = AdamStateT<float>;

template <typename T>
AdamStateT<T> make_adam_state(const ModelParamsT<T>& params) {
  AdamStateT<T> s;
  for (const auto& p : params.tensors) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

// One Adam update of a single tensor. `t` is the already-incremented step.
template <typename T>
void adam_update_tensor(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& m, TensorT<T>& v,
                        std::int64_t t, const TrainConfig& cfg) {
  if (!param.same_shape(grad)) throw ShapeError("adam: gradient shape " + grad.shape_str() +
                                                " does not match parameter " + param.shape_str());
  const T b1 = static_cast<T>(cfg.adam_beta1), b2 = static_cast<T>(cfg.adam_beta2);
  const T lr = static_cast<T>(cfg.learning_rate), eps = static_cast<T>(cfg.adam_eps);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t)));
  for (std::int64_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    const T m_hat = m[i] / c1;
    const T v_hat = v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

// Full Adam step over all model tensors; increments the timestep before use.
template <typename T>
void adam_step(ModelParamsT<T>& params, const ModelGradsT<T>& grads, AdamStateT<T>& state,
               const TrainConfig& cfg) {
  if (grads.tensors.size() != params.tensors.size()) throw ShapeError("adam: gradient/parameter count mismatch");
  ++state.t;
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    adam_update_tensor(params.tensors[i], grads.tensors[i], state.m[i], state.v[i], state.t, cfg);
}

// ---------------------------------------------------------------------------
// Fold plan
// ---------------------------------------------------------------------------

// Stratified k-fold partition. Repetition r tests on fold r and validates on
// fold (r+1) mod k; the remaining k-2 folds train.
struct FoldPlan {
  int k = 10;
  std::vector<std::vector<int>> folds;  // sample indices per fold

  struct Split {
    std::vector<int> train, val, test;
  };

  Split split(int repetition) const {
    Split s;
    const int test_fold = repetition % k;
    const int val_fold = (repetition + 1) % k;
    for (int f = 0; f < k; ++f) {
      const auto& fold = folds[static_cast<std::size_t>(f)];
      auto& dst = (f == test_fold) ? s.test : (f == val_fold) ? s.val : s.train;
      dst.insert(dst.end(), fold.begin(), fold.end());
    }
    return s;
  }
};

inline FoldPlan make_folds(const Dataset& ds, int k, std::uint64_t seed) {
  if (static_cast<int>(ds.samples.size()) < k)
    throw InputError("dataset of " + std::to_string(ds.samples.size()) + " samples cannot be split into " +
                     std::to_string(k) + " folds");
  std::vector<int> by_class[2];
  for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i)
    by_class[static_cast<int>(ds.samples[static_cast<std::size_t>(i)].label)].push_back(i);

  FoldPlan plan;
  plan.k = k;
  plan.folds.assign(static_cast<std::size_t>(k), {});
  Rng rng = derive_rng(seed, {0x666f6c64ULL});
  // Deal the classes round-robin in opposite fold orders so the leftover
  // samples of each class land on different folds; fold sizes then differ by
  // at most one while per-fold class counts stay within +-1.
  for (int c = 0; c < 2; ++c) {
    auto& cls = by_class[c];
    rng.shuffle(cls.begin(), cls.end());
    for (std::size_t j = 0; j < cls.size(); ++j) {
      const std::size_t fold = (c == 0) ? j % static_cast<std::size_t>(k)
                                        : static_cast<std::size_t>(k) - 1 - j % static_cast<std::size_t>(k);
      plan.folds[fold].push_back(cls[j]);
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

namespace detail {

template <typename T>
double accuracy_on(const ModelParamsT<T>& params, const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  for (int i : indices) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    correct += (predict(params, s.data.template cast<T>()).first == s.label) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace detail

struct TrainOutcome {
  ModelParams params;  // parameters from the epoch with the best validation accuracy
  TrainHistory history;
  int best_epoch = 0;  // 1-based
};

// Mini-batch Adam over shuffled batches. Per-epoch shuffling and per-sample
// dropout masks derive from (seed, stream, epoch, ...), so a (config, data)
// pair fully determines the outcome. Returns the checkpoint with the highest
// validation accuracy; ties keep the earlier epoch.
inline TrainOutcome train_model(const Dataset& ds, const std::vector<int>& train_idx,
                                const std::vector<int>& val_idx, const ArchSpec& arch,
                                const TrainConfig& cfg, std::uint64_t stream = 0) {
  cfg.validate();
  if (train_idx.empty() || val_idx.empty()) throw InputError("training and validation sets must be nonempty");

  ModelParams params = init_params<float>(arch, detail::splitmix64(cfg.seed) ^ stream);
  AdamState adam = make_adam_state(params);
  TrainOutcome out;
  double best_val = -1.0;

  std::vector<int> order = train_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = derive_rng(cfg.seed, {stream, static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    std::size_t correct = 0;
    const int n = static_cast<int>(order.size());
    for (int batch_start = 0, batch_no = 0; batch_start < n; batch_start += cfg.batch_size, ++batch_no) {
      const int batch_end = std::min(batch_start + cfg.batch_size, n);
      const int batch_n = batch_end - batch_start;

      ModelGradsT<float> total;
      total.tensors.reserve(params.tensors.size());
      for (const auto& p : params.tensors) total.tensors.emplace_back(p.shape());

      for (int bi = batch_start; bi < batch_end; ++bi) {
        const auto& sample = ds.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(bi)])];
        Rng dropout_rng = derive_rng(cfg.seed, {stream, static_cast<std::uint64_t>(epoch), 0xd709ULL,
                                                static_cast<std::uint64_t>(bi)});
        auto fwd = forward(params, sample.data, RunMode::train, &dropout_rng);
        const int label = static_cast<int>(sample.label);
        const auto sx = softmax_xent(fwd.logits, label);
        if (!std::isfinite(static_cast<double>(sx.loss)))
          throw TrainingDiverged("loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_no + 1));
        loss_sum += sx.loss;
        correct += (fwd.probs[1] > fwd.probs[0] ? Label::MW : Label::FS) == sample.label ? 1 : 0;
        auto grads = backward(params, fwd, label);
        for (std::size_t t = 0; t < total.tensors.size(); ++t) {
          auto& acc = total.tensors[t];
          const auto& g = grads.tensors[t];
          for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
      }
      const float inv = 1.0f / static_cast<float>(batch_n);
      for (auto& t : total.tensors)
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] *= inv;
      adam_step(params, total, adam, cfg);
    }

    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    rec.val_accuracy = detail::accuracy_on(params, ds, val_idx);
    out.history.push_back(rec);
    if (rec.val_accuracy > best_val) {
      best_val = rec.val_accuracy;
      out.params = params;
      out.best_epoch = epoch;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

template <typename T>
ConfusionCounts evaluate(const ModelParamsT<T>& params, const Dataset& ds, const std::vector<int>& indices) {
  std::vector<Label> preds, labels;
  preds.reserve(indices.size());
  labels.reserve(indices.size());
  for (int i : indices) {
    const auto& s = ds.samples[static_cast<std::size_t>(i)];
    preds.push_back(predict(params, s.data.template cast<T>()).first);
    labels.push_back(s.label);
  }
  return confusion(preds, labels);
}

struct RepetitionResult {
  ConfusionCounts counts;
  TrainHistory history;
  ModelParams params;
  int best_epoch = 0;
};

struct CvResult {
  std::vector<RepetitionResult> repetitions;
  ConfusionCounts pooled;
};

// Ten-fold cross-validation: trains k independent models and pools the test
// predictions of every repetition by summation. Repetitions are independent
// (own RNG streams) and may run in parallel without changing any result.
inline CvResult run_cv(const Dataset& ds, const ArchSpec& arch, const TrainConfig& cfg, int k = 10) {
  const FoldPlan plan = make_folds(ds, k, cfg.seed);
  CvResult res;
  res.repetitions.resize(static_cast<std::size_t>(k));

  int jobs = cfg.n_jobs == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : cfg.n_jobs;
  jobs = std::max(1, std::min(jobs, k));

  auto run_rep = [&](int r) {
    const auto split = plan.split(r);
    auto outcome = train_model(ds, split.train, split.val, arch, cfg, static_cast<std::uint64_t>(r));
    RepetitionResult rep;
    rep.counts = evaluate(outcome.params, ds, split.test);
    rep.history = std::move(outcome.history);
    rep.params = std::move(outcome.params);
    rep.best_epoch = outcome.best_epoch;
    res.repetitions[static_cast<std::size_t>(r)] = std::move(rep);
  };

  if (jobs == 1) {
    for (int r = 0; r < k; ++r) run_rep(r);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&, j] {
        try {
          for (int r = next.fetch_add(1); r < k; r = next.fetch_add(1)) run_rep(r);
        } catch (...) {
          errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<ConfusionCounts> per_rep;
  for (const auto& rep : res.repetitions) per_rep.push_back(rep.counts);
  res.pooled = pool_counts(per_rep);
  return res;
}

namespace detail {

// Shuffles each class and takes per-class counts chosen by largest
// remainder, so the selection is stratified and hits `total` exactly.
inline std::vector<int> stratified_take(std::vector<int> by_class[2], int total, Rng& rng,
                                        bool remove_taken) {
  const double n0 = static_cast<double>(by_class[0].size());
  const double n1 = static_cast<double>(by_class[1].size());
  const double n = n0 + n1;
  int take[2];
  take[0] = static_cast<int>(std::floor(total * n0 / n));
  take[1] = static_cast<int>(std::floor(total * n1 / n));
  const double rem0 = total * n0 / n - take[0];
  const double rem1 = total * n1 / n - take[1];
  while (take[0] + take[1] < total) {
    if (rem0 >= rem1 && take[0] < static_cast<int>(n0))
      ++take[0];
    else if (take[1] < static_cast<int>(n1))
      ++take[1];
    else if (take[0] < static_cast<int>(n0))
      ++take[0];
    else
      throw InputError("stratified split of " + std::to_string(total) + " exceeds available samples");
  }
  std::vector<int> out;
  for (int c = 0; c < 2; ++c) {
    auto& cls = by_class[c];
    rng.shuffle(cls.begin(), cls.end());
    if (take[c] > static_cast<int>(cls.size()))
      throw InputError("stratified split needs more class-" + std::to_string(c) + " samples than available");
    out.insert(out.end(), cls.begin(), cls.begin() + take[c]);
    if (remove_taken) cls.erase(cls.begin(), cls.begin() + take[c]);
  }
  return out;
}

}  // namespace detail

struct CrossSubjectSplit {
  std::vector<int> train, val, test;
};

// Split for the cross-subject experiment. Runs 1 and 2 train on one subject
// (80% train, 20% validation, stratified) and test on every sample of the
// other; run 3 draws a stratified 40%/10%/50% split from the mixed dataset.
// With 475 samples per subject these sizes are exactly 380/95/475.
inline CrossSubjectSplit make_cross_subject_split(const Dataset& ds, int run, std::uint64_t seed) {
  if (run < 1 || run > 3) throw InputError("cross-subject run must be 1, 2 or 3");

  std::vector<int> subjects;
  for (const auto& s : ds.samples)
    if (std::find(subjects.begin(), subjects.end(), s.subject_id) == subjects.end())
      subjects.push_back(s.subject_id);
  std::sort(subjects.begin(), subjects.end());

  Rng rng = derive_rng(seed, {0x73756274ULL, static_cast<std::uint64_t>(run)});
  CrossSubjectSplit split;

  if (run <= 2) {
    if (subjects.size() != 2)
      throw InputError("cross-subject runs 1 and 2 need exactly 2 subjects, dataset has " +
                       std::to_string(subjects.size()));
    const int train_subject = (run == 1) ? subjects[0] : subjects[1];
    std::vector<int> by_class[2];
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i) {
      const auto& s = ds.samples[static_cast<std::size_t>(i)];
      if (s.subject_id == train_subject)
        by_class[static_cast<int>(s.label)].push_back(i);
      else
        split.test.push_back(i);
    }
    const int n_subj = static_cast<int>(by_class[0].size() + by_class[1].size());
    if (n_subj != 475)
      std::cerr << "warning: subject " << train_subject << " has " << n_subj
                << " samples (design size is 475); scaling to an 80%/20% train/validation split\n";
    const int n_train = static_cast<int>(std::llround(0.8 * n_subj));
    split.train = detail::stratified_take(by_class, n_train, rng, true);
    for (int c = 0; c < 2; ++c) split.val.insert(split.val.end(), by_class[c].begin(), by_class[c].end());
  } else {
    std::vector<int> by_class[2];
    for (int i = 0; i < static_cast<int>(ds.samples.size()); ++i)
      by_class[static_cast<int>(ds.samples[static_cast<std::size_t>(i)].label)].push_back(i);
    const int n = static_cast<int>(ds.samples.size());
    const int n_train = static_cast<int>(std::llround(0.4 * n));
    const int n_val = static_cast<int>(std::llround(0.1 * n));
    split.train = detail::stratified_take(by_class, n_train, rng, true);
    split.val = detail::stratified_take(by_class, n_val, rng, true);
    for (int c = 0; c < 2; ++c) split.test.insert(split.test.end(), by_class[c].begin(), by_class[c].end());
  }
  return split;
}

inline RepetitionResult run_cross_subject(const Dataset& ds, const ArchSpec& arch, const TrainConfig& cfg,
                                          int run) {
  const CrossSubjectSplit split = make_cross_subject_split(ds, run, cfg.seed);
  auto outcome = train_model(ds, split.train, split.val, arch, cfg, 0x100ULL + static_cast<std::uint64_t>(run));
  RepetitionResult rep;
  rep.counts = evaluate(outcome.params, ds, split.test);
  rep.history = std::move(outcome.history);
  rep.params = std::move(outcome.params);
  rep.best_epoch = outcome.best_epoch;
  return rep;
}

}  // namespace mwcnn
