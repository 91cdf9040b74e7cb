#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mwcnn/dataset.hpp"

namespace mwcnn {

// MW is the positive class throughout.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
};

inline ConfusionCounts confusion(const std::vector<Label>& predictions, const std::vector<Label>& labels) {
  if (predictions.size() != labels.size())
    throw InputError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw InputError("confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_mw = predictions[i] == Label::MW;
    const bool is_mw = labels[i] == Label::MW;
    if (pred_mw && is_mw) ++c.tp;
    else if (!pred_mw && !is_mw) ++c.tn;
    else if (pred_mw) ++c.fp;
    else ++c.fn;
  }
  return c;
}

inline ConfusionCounts pool_counts(const std::vector<ConfusionCounts>& parts) {
  if (parts.empty()) throw InputError("pool_counts: empty list");
  ConfusionCounts sum;
  for (const auto& c : parts) {
    sum.tp += c.tp;
    sum.tn += c.tn;
    sum.fp += c.fp;
    sum.fn += c.fn;
  }
  return sum;
}

// Derived rates. Rates with a zero denominator are undefined and reported as
// such (never 0 or 1). The published result table labels precision and NPV
// as "sensitivity" and "specificity"; both conventions are computed so
// reports can show them side by side.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> sensitivity;  // tp / (tp + fn)
  std::optional<double> specificity;  // tn / (tn + fp)
  std::optional<double> precision;    // tp / (tp + fp)
  std::optional<double> npv;          // tn / (tn + fn)
};

inline Metrics metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw InputError("metrics: empty confusion counts");
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) throw InputError("metrics: negative count");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn > 0) m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tn + c.fn > 0) m.npv = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fn);
  return m;
}

namespace detail {

inline std::string format_rate(const std::optional<double>& r) {
  if (!r) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(5) << *r;
  return os.str();
}

inline std::string format_rate(double r) { return format_rate(std::optional<double>(r)); }

}  // namespace detail

// One named experiment result for the report CSV.
struct ReportRow {
  std::string experiment;
  ConfusionCounts counts;
};

// report CSV: one row per experiment with the raw counts and all five rates.
inline void export_report(const std::vector<ReportRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open report for writing: " + path);
  os << "experiment,tp,tn,fp,fn,accuracy,sensitivity,specificity,precision,npv\n";
  for (const auto& row : rows) {
    const Metrics m = metrics(row.counts);
    os << row.experiment << ',' << row.counts.tp << ',' << row.counts.tn << ',' << row.counts.fp << ','
       << row.counts.fn << ',' << detail::format_rate(m.accuracy) << ',' << detail::format_rate(m.sensitivity)
       << ',' << detail::format_rate(m.specificity) << ',' << detail::format_rate(m.precision) << ','
       << detail::format_rate(m.npv) << '\n';
  }
  if (!os) throw InputError("write failed: " + path);
}

struct EpochRow {
  int repetition = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

// history CSV: per-repetition, per-epoch training curves (the data behind an
// accuracy-vs-epoch plot).
inline void export_history(const std::vector<EpochRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot open history for writing: " + path);
  os << "repetition,epoch,train_loss,train_acc,val_acc\n";
  os << std::fixed << std::setprecision(5);
  for (const auto& r : rows)
    os << r.repetition << ',' << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << ','
       << r.val_accuracy << '\n';
  if (!os) throw InputError("write failed: " + path);
}

// Channels x time CSV of one window, for external plotting or inspection.
// The header row carries the channel labels.
inline void dump_window_csv(const Tensor& window, const std::string& path,
                            const std::vector<std::string>& channel_labels = {}) {
  if (window.rank() != 2) throw InputError("window dump expects a [channels, time] tensor");
  std::ofstream os(path);
  if (!os) throw InputError("cannot open window dump for writing: " + path);
  const int channels = window.dim(0), t = window.dim(1);
  os << "channel";
  for (int i = 0; i < t; ++i) os << ",t" << i;
  os << '\n';
  os << std::setprecision(9);
  for (int c = 0; c < channels; ++c) {
    if (c < static_cast<int>(channel_labels.size()))
      os << channel_labels[static_cast<std::size_t>(c)];
    else
      os << "ch" << c;
    for (int i = 0; i < t; ++i) os << ',' << window.at(c, i);
    os << '\n';
  }
  if (!os) throw InputError("write failed: " + path);
}

}  // namespace mwcnn
