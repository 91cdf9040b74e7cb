// mwcnn: command line front end for the EEG mind-wandering detector.
//
//   mwcnn prepare --config run.json     build the windowed dataset
//   mwcnn train   --config run.json     run the configured experiment
//   mwcnn predict --config run.json     classify windows with saved weights
//   mwcnn verify                        dataset-free self checks
//
// Exit codes: 0 success, 1 internal error, 2 input error, 3 compatibility
// error (weights/architecture fingerprint mismatch).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mwcnn/mwcnn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RecordingRef {
  std::string path;
  std::optional<int> subject;
  std::optional<int> session;
};

// JSON-backed run configuration; command line flags override single fields.
struct RunConfig {
  std::vector<RecordingRef> recordings;
  std::string events_path;
  std::string dataset_path;
  std::vector<std::string> dataset_paths;  // window_lengths experiment
  std::string weights_path;
  std::string out_dir = ".";
  int window_seconds = 8;
  std::string experiment = "cv";
  mwcnn::TrainConfig train;
  int cv_folds = 10;
  bool apply_filter = true;
  double band_low_hz = 0.5;
  double band_high_hz = 50.0;
  int filter_taps = 0;
  bool zscore_per_channel = true;
  std::optional<mwcnn::PoolPlan> pool_plan;  // overrides the per-window-length pooling table
};

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mwcnn::InputError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw mwcnn::ParseError("config " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  try {
    if (j.contains("recordings")) {
      for (const auto& r : j.at("recordings")) {
        RecordingRef ref;
        if (r.is_string()) {
          ref.path = r.get<std::string>();
        } else {
          ref.path = r.at("path").get<std::string>();
          if (r.contains("subject")) ref.subject = r.at("subject").get<int>();
          if (r.contains("session")) ref.session = r.at("session").get<int>();
        }
        cfg.recordings.push_back(std::move(ref));
      }
    }
    cfg.events_path = j.value("events", "");
    cfg.dataset_path = j.value("dataset", "");
    if (j.contains("datasets")) cfg.dataset_paths = j.at("datasets").get<std::vector<std::string>>();
    cfg.weights_path = j.value("weights", "");
    cfg.out_dir = j.value("out", ".");
    cfg.window_seconds = j.value("window_seconds", 8);
    cfg.experiment = j.value("experiment", "cv");
    cfg.train.epochs = j.value("epochs", 100);
    cfg.train.batch_size = j.value("batch_size", 16);
    cfg.train.learning_rate = j.value("learning_rate", 1e-3);
    cfg.train.adam_beta1 = j.value("adam_beta1", 0.9);
    cfg.train.adam_beta2 = j.value("adam_beta2", 0.999);
    cfg.train.adam_eps = j.value("adam_eps", 1e-8);
    cfg.train.dropout_rate = j.value("dropout_rate", 0.2);
    cfg.train.seed = j.value("seed", std::uint64_t{0});
    cfg.train.n_jobs = j.value("n_jobs", 1);
    cfg.cv_folds = j.value("cv_folds", 10);
    cfg.apply_filter = j.value("apply_filter", true);
    cfg.band_low_hz = j.value("band_low_hz", 0.5);
    cfg.band_high_hz = j.value("band_high_hz", 50.0);
    cfg.filter_taps = j.value("filter_taps", 0);
    cfg.zscore_per_channel = j.value("zscore_per_channel", true);
    if (j.contains("pool_plan")) {
      const auto& pp = j.at("pool_plan");
      if (pp.size() != 4) throw mwcnn::InputError("pool_plan must list 4 [kernel, stride] pairs");
      mwcnn::PoolPlan plan;
      for (std::size_t i = 0; i < 4; ++i)
        plan[i] = {pp.at(i).at(0).get<int>(), pp.at(i).at(1).get<int>()};
      cfg.pool_plan = plan;
    }
  } catch (const json::exception& e) {
    throw mwcnn::ParseError("config " + path + ": " + e.what());
  }
  return cfg;
}

mwcnn::EegRecording load_recording(const RecordingRef& ref) {
  if (!fs::exists(ref.path)) throw mwcnn::InputError("recording file does not exist: " + ref.path);
  std::ifstream probe(ref.path, std::ios::binary);
  char head[8] = {};
  probe.read(head, 8);
  mwcnn::EegRecording rec;
  if (probe.gcount() >= 8 && static_cast<unsigned char>(head[0]) == 0xff && std::string(head + 1, 7) == "BIOSEMI")
    rec = mwcnn::read_bdf(ref.path);
  else
    rec = mwcnn::read_raw_matrix(ref.path);
  if (ref.subject) rec.subject_id = *ref.subject;
  if (ref.session) rec.session_id = *ref.session;
  return rec;
}

mwcnn::ArchSpec arch_for_dataset(const mwcnn::Dataset& ds, const RunConfig& cfg) {
  return mwcnn::build_arch(ds.window_seconds, ds.sampling_rate, ds.n_channels, 20, cfg.pool_plan,
                           cfg.train.dropout_rate);
}

int cmd_prepare(const RunConfig& cfg) {
  if (cfg.recordings.empty()) throw mwcnn::InputError("config lists no recordings");
  if (cfg.events_path.empty()) throw mwcnn::InputError("config has no events path");
  if (cfg.dataset_path.empty()) throw mwcnn::InputError("config has no dataset output path");
  if (!fs::exists(cfg.events_path)) throw mwcnn::InputError("events file does not exist: " + cfg.events_path);

  const auto all_events = mwcnn::read_events_csv(cfg.events_path);
  mwcnn::BuildOptions opt;
  opt.window_seconds = cfg.window_seconds;
  opt.seed = cfg.train.seed;
  opt.apply_filter = cfg.apply_filter;
  opt.band_low_hz = cfg.band_low_hz;
  opt.band_high_hz = cfg.band_high_hz;
  opt.filter_taps = cfg.filter_taps;
  opt.zscore_per_channel = cfg.zscore_per_channel;

  // Recordings are processed one at a time so only one continuous session is
  // resident at once.
  mwcnn::Dataset ds;
  mwcnn::BuildStats stats;
  bool first = true;
  for (const auto& ref : cfg.recordings) {
    const auto rec = load_recording(ref);
    if (first) {
      ds.window_seconds = opt.window_seconds;
      ds.sampling_rate = rec.sampling_rate;
      ds.n_channels = rec.n_channels();
      first = false;
    } else if (rec.sampling_rate != ds.sampling_rate || rec.n_channels() != ds.n_channels) {
      throw mwcnn::InputError("recording " + ref.path + " disagrees on channel count or sampling rate");
    }
    const auto session_events = mwcnn::events_for_session(all_events, rec.session_id);
    auto windows = mwcnn::build_windows_for_recording(rec, session_events, opt, stats);
    for (auto& w : windows) ds.samples.push_back(std::move(w));
  }
  if (stats.mw_windows == 0)
    throw mwcnn::InputError("no MW window could be extracted (" + std::to_string(stats.skipped_presses) +
                            " presses skipped)");

  if (const auto dir = fs::path(cfg.dataset_path).parent_path(); !dir.empty()) fs::create_directories(dir);
  mwcnn::save_dataset(ds, cfg.dataset_path);
  std::cout << "MW: " << stats.mw_windows << ", FS: " << stats.fs_windows
            << ", skipped presses: " << stats.skipped_presses << "\n";
  std::cout << "wrote " << ds.samples.size() << " windows to " << cfg.dataset_path << "\n";
  return 0;
}

void append_history(std::vector<mwcnn::EpochRow>& rows, int repetition, const mwcnn::TrainHistory& h) {
  for (std::size_t e = 0; e < h.size(); ++e)
    rows.push_back({repetition, static_cast<int>(e + 1), h[e].train_loss, h[e].train_accuracy,
                    h[e].val_accuracy});
}

void print_pooled(const std::string& name, const mwcnn::ConfusionCounts& counts) {
  const auto m = mwcnn::metrics(counts);
  std::printf("%s: tp=%lld tn=%lld fp=%lld fn=%lld accuracy=%.5f\n", name.c_str(),
              static_cast<long long>(counts.tp), static_cast<long long>(counts.tn),
              static_cast<long long>(counts.fp), static_cast<long long>(counts.fn), m.accuracy);
}

int cmd_train(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  std::vector<mwcnn::ReportRow> report;
  std::vector<mwcnn::EpochRow> history;

  if (cfg.experiment == "cv") {
    if (cfg.dataset_path.empty()) throw mwcnn::InputError("cv experiment needs a dataset path");
    const auto ds = mwcnn::load_dataset(cfg.dataset_path);
    const auto arch = arch_for_dataset(ds, cfg);
    const auto res = mwcnn::run_cv(ds, arch, cfg.train, cfg.cv_folds);
    for (std::size_t r = 0; r < res.repetitions.size(); ++r) {
      const auto& rep = res.repetitions[r];
      report.push_back({"cv_rep" + std::to_string(r), rep.counts});
      append_history(history, static_cast<int>(r), rep.history);
      mwcnn::save_params(rep.params, (out / ("cv_rep" + std::to_string(r) + ".mwnw")).string());
    }
    report.push_back({"cv_pooled", res.pooled});
    print_pooled("cv_pooled", res.pooled);
  } else if (cfg.experiment == "cross_subject") {
    if (cfg.dataset_path.empty()) throw mwcnn::InputError("cross_subject experiment needs a dataset path");
    const auto ds = mwcnn::load_dataset(cfg.dataset_path);
    const auto arch = arch_for_dataset(ds, cfg);
    for (int run = 1; run <= 3; ++run) {
      const auto rep = mwcnn::run_cross_subject(ds, arch, cfg.train, run);
      const std::string name = "cross_subject_run" + std::to_string(run);
      report.push_back({name, rep.counts});
      append_history(history, run, rep.history);
      mwcnn::save_params(rep.params, (out / (name + ".mwnw")).string());
      print_pooled(name, rep.counts);
    }
  } else if (cfg.experiment == "window_lengths") {
    if (cfg.dataset_paths.empty())
      throw mwcnn::InputError("window_lengths experiment needs a \"datasets\" list in the config");
    for (std::size_t d = 0; d < cfg.dataset_paths.size(); ++d) {
      const auto ds = mwcnn::load_dataset(cfg.dataset_paths[d]);
      const auto arch = arch_for_dataset(ds, cfg);
      const auto res = mwcnn::run_cv(ds, arch, cfg.train, cfg.cv_folds);
      const std::string name = "window_" + std::to_string(ds.window_seconds) + "s";
      report.push_back({name, res.pooled});
      for (std::size_t r = 0; r < res.repetitions.size(); ++r) {
        append_history(history, static_cast<int>(100 * (d + 1) + r), res.repetitions[r].history);
        mwcnn::save_params(res.repetitions[r].params,
                           (out / (name + "_rep" + std::to_string(r) + ".mwnw")).string());
      }
      print_pooled(name, res.pooled);
    }
  } else {
    throw mwcnn::InputError("unknown experiment \"" + cfg.experiment +
                            "\" (expected cv, cross_subject or window_lengths)");
  }

  mwcnn::export_report(report, (out / "report.csv").string());
  mwcnn::export_history(history, (out / "history.csv").string());
  std::cout << "report: " << (out / "report.csv").string() << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  if (cfg.weights_path.empty()) throw mwcnn::InputError("predict needs a weights path in the config");
  if (cfg.dataset_path.empty()) throw mwcnn::InputError("predict needs a dataset path (the window source)");
  const auto ds = mwcnn::load_dataset(cfg.dataset_path);
  const auto arch = arch_for_dataset(ds, cfg);
  const auto params = mwcnn::load_params(arch, cfg.weights_path);
  for (const auto& s : ds.samples) {
    const auto [label, probs] = mwcnn::predict(params, s.data);
    std::printf("%s p=%.5f\n", mwcnn::to_string(label), static_cast<double>(probs[static_cast<int>(label)]));
  }
  return 0;
}

int cmd_verify(const mwcnn::VerifyOptions& opt) {
  const auto results = mwcnn::run_self_checks(opt);
  int failures = 0;
  for (const auto& r : results) {
    std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    failures += r.passed ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG mind-wandering detector"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> window_override;
  std::optional<std::string> experiment_override;
  std::optional<std::string> out_override;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "run configuration JSON");
    if (config_required) opt->required();
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("--window-seconds", window_override, "override the window length (2, 5 or 8)")
        ->check(CLI::IsMember({2, 5, 8}));
    sub->add_option("--experiment", experiment_override, "override the experiment selector")
        ->check(CLI::IsMember({"cv", "cross_subject", "window_lengths"}));
    sub->add_option("--out", out_override, "override the output directory");
  };

  auto* prepare = app.add_subcommand("prepare", "extract the windowed dataset from recordings");
  add_common(prepare, true);
  auto* train = app.add_subcommand("train", "run the configured experiment");
  add_common(train, true);
  auto* predict = app.add_subcommand("predict", "classify windows with saved weights");
  add_common(predict, true);
  auto* verify = app.add_subcommand("verify", "run dataset-free self checks");
  add_common(verify, false);

  mwcnn::VerifyOptions verify_opt;
  verify->add_flag("--inject-floor-pool", verify_opt.floor_pool_mode,
                   "fault injection: floor-mode pooling (check must fail)")
      ->group("");
  verify->add_flag("--inject-grad-bug", verify_opt.perturb_conv_backward,
                   "fault injection: perturbed conv backward (check must fail)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (verify->parsed()) return cmd_verify(verify_opt);

    RunConfig cfg = load_config(config_path);
    if (seed_override) cfg.train.seed = *seed_override;
    if (window_override) cfg.window_seconds = *window_override;
    if (experiment_override) cfg.experiment = *experiment_override;
    if (out_override) cfg.out_dir = *out_override;

    if (prepare->parsed()) return cmd_prepare(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (predict->parsed()) return cmd_predict(cfg);
    return 1;
  } catch (const mwcnn::FingerprintError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const mwcnn::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mwcnn::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
