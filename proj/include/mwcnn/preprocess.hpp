#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mwcnn/dataset.hpp"
#include "mwcnn/detail/fft.hpp"
#include "mwcnn/detail/rng.hpp"
#include "mwcnn/eeg_io.hpp"

namespace mwcnn {

// ---------------------------------------------------------------------------
// FIR bandpass design and zero-phase filtering
// ---------------------------------------------------------------------------

// Linear-phase windowed-sinc bandpass. Built as the difference of two
// Hamming-windowed lowpass kernels, each normalized to unit DC gain, so the
// bandpass DC gain is zero by construction.
struct FilterKernel {
  std::vector<double> taps;  // odd count, symmetric
  double low_hz = 0.0;
  double high_hz = 0.0;
  double sampling_rate = 0.0;

  // Samples at each end of a zero-phase-filtered signal considered
  // unreliable: each pass smears the zero-padding boundary over half the
  // kernel, and the backward pass doubles that.
  std::int64_t edge_margin() const { return static_cast<std::int64_t>(taps.size()) - 1; }
};

namespace detail {

// Mirrored construction keeps the taps bit-exactly symmetric.
inline std::vector<double> hamming_lowpass_unit_dc(double fs, double cutoff_hz, int n_taps) {
  std::vector<double> h(static_cast<std::size_t>(n_taps));
  const int mid = (n_taps - 1) / 2;
  const double x = 2.0 * M_PI * cutoff_hz / fs;
  for (int m = 0; m <= mid; ++m) {
    double v = (m == 0) ? x : std::sin(x * m) / m;
    // Hamming window in the centered index: 0.54 + 0.46 cos(2 pi m / (N-1))
    v *= 0.54 + 0.46 * std::cos(2.0 * M_PI * m / (n_taps - 1));
    h[static_cast<std::size_t>(mid + m)] = v;
    h[static_cast<std::size_t>(mid - m)] = v;
  }
  double sum = 0.0;
  for (double v : h) sum += v;
  for (auto& v : h) v /= sum;
  return h;
}

}  // namespace detail

// n_taps = 0 picks the default width of 4*fs rounded up to odd (4097 taps
// at 1024 Hz), which keeps the 0.5 Hz edge usable.
inline FilterKernel design_bandpass(double fs, double low_hz, double high_hz, int n_taps = 0) {
  if (n_taps == 0) n_taps = static_cast<int>(4.0 * fs) | 1;
  if (!(fs > 0)) throw InputError("sampling rate must be positive");
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0))
    throw InputError("bandpass requires 0 < low < high < fs/2, got [" + std::to_string(low_hz) + ", " +
                     std::to_string(high_hz) + ") at fs " + std::to_string(fs));
  if (n_taps < 3 || n_taps % 2 == 0)
    throw InputError("tap count must be odd and >= 3, got " + std::to_string(n_taps));

  const auto lp_high = detail::hamming_lowpass_unit_dc(fs, high_hz, n_taps);
  const auto lp_low = detail::hamming_lowpass_unit_dc(fs, low_hz, n_taps);
  FilterKernel k;
  k.taps.resize(static_cast<std::size_t>(n_taps));
  for (std::size_t i = 0; i < k.taps.size(); ++i) k.taps[i] = lp_high[i] - lp_low[i];
  k.low_hz = low_hz;
  k.high_hz = high_hz;
  k.sampling_rate = fs;
  return k;
}

// Single-pass magnitude response |H(f)| from the DFT of the taps. The
// forward-backward application squares this.
inline double filter_gain(const FilterKernel& k, double freq_hz) {
  std::complex<double> acc(0.0, 0.0);
  const double w = 2.0 * M_PI * freq_hz / k.sampling_rate;
  for (std::size_t m = 0; m < k.taps.size(); ++m)
    acc += k.taps[m] * std::exp(std::complex<double>(0.0, -w * static_cast<double>(m)));
  return std::abs(acc);
}

namespace detail {

// "Same"-length convolution with zero padding: full linear convolution
// cropped by half the kernel at each side.
inline std::vector<double> convolve_same(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t half = h.size() / 2;
  auto full = convolve(x, h);
  return std::vector<double>(full.begin() + static_cast<std::ptrdiff_t>(half),
                             full.begin() + static_cast<std::ptrdiff_t>(half + x.size()));
}

}  // namespace detail

// Forward-backward FIR application: zero phase shift, squared magnitude
// response. Output has the recording's shape; the first and last
// kernel.edge_margin() samples of each channel are unreliable and window
// extraction must avoid them.
inline EegRecording filter_zero_phase(const EegRecording& rec, const FilterKernel& kernel) {
  const std::int64_t n = rec.n_samples();
  if (n <= 3 * static_cast<std::int64_t>(kernel.taps.size()))
    throw InputError("recording of " + std::to_string(n) + " samples is too short for a " +
                     std::to_string(kernel.taps.size()) + "-tap zero-phase filter (needs > 3x taps)");
  EegRecording out = rec;
  std::vector<double> buf(static_cast<std::size_t>(n));
  for (int c = 0; c < rec.n_channels(); ++c) {
    const float* src = rec.data.data() + static_cast<std::size_t>(c) * n;
    for (std::int64_t i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = src[i];
    auto fwd = detail::convolve_same(buf, kernel.taps);
    std::reverse(fwd.begin(), fwd.end());
    auto bwd = detail::convolve_same(fwd, kernel.taps);
    std::reverse(bwd.begin(), bwd.end());
    float* dst = out.data.data() + static_cast<std::size_t>(c) * n;
    for (std::int64_t i = 0; i < n; ++i) dst[i] = static_cast<float>(bwd[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Window extraction
// ---------------------------------------------------------------------------

namespace detail {

struct Span {
  std::int64_t begin = 0;
  std::int64_t end = 0;  // half-open
  bool overlaps(std::int64_t b, std::int64_t e) const { return b < end && begin < e; }
};

// Pairs question_start/question_end events into closed intervals.
inline std::vector<Span> questionnaire_spans(const std::vector<Event>& events) {
  std::vector<Span> spans;
  std::optional<std::int64_t> open;
  for (const auto& e : events) {
    if (e.kind == EventKind::question_start) {
      if (open) throw InputError("question_start at sample " + std::to_string(e.sample_index) +
                                 " before previous questionnaire ended");
      open = e.sample_index;
    } else if (e.kind == EventKind::question_end) {
      if (!open) throw InputError("question_end at sample " + std::to_string(e.sample_index) +
                                  " without matching question_start");
      spans.push_back({*open, e.sample_index + 1});
      open.reset();
    }
  }
  if (open) throw InputError("questionnaire starting at sample " + std::to_string(*open) + " never ends");
  return spans;
}

inline WindowSample cut_window(const EegRecording& rec, std::int64_t offset, std::int64_t length, Label label) {
  WindowSample s;
  const std::int64_t n = rec.n_samples();
  s.data = Tensor({rec.n_channels(), static_cast<int>(length)});
  for (int c = 0; c < rec.n_channels(); ++c) {
    const float* src = rec.data.data() + static_cast<std::size_t>(c) * n + offset;
    float* dst = s.data.data() + static_cast<std::size_t>(c) * length;
    std::copy(src, src + length, dst);
  }
  s.label = label;
  s.subject_id = rec.subject_id;
  s.session_id = rec.session_id;
  s.origin_offset = offset;
  return s;
}

}  // namespace detail

// MW window placement: each window starts 10 s before its button press.
// For 8 s windows this leaves a 2 s gap before the press; shorter windows
// keep the same start and shorten on the right, preserving that exclusion.
inline std::int64_t mw_window_start(std::int64_t press, double fs) {
  return press - static_cast<std::int64_t>(std::llround(10.0 * fs));
}

struct MwExtraction {
  std::vector<WindowSample> windows;
  int skipped = 0;  // presses whose window would fall outside the usable range
};

// `margin` excludes the unreliable filter edges at both ends of the
// recording (0 when the recording was not filtered).
inline MwExtraction extract_mw_windows(const EegRecording& rec, const std::vector<Event>& events,
                                       int window_seconds, std::int64_t margin = 0) {
  const double fs = rec.sampling_rate;
  const auto length = static_cast<std::int64_t>(std::llround(window_seconds * fs));
  if (length < 1) throw InputError("window length must be at least one sample");
  MwExtraction out;
  for (const auto& e : events) {
    if (e.kind != EventKind::button_press) continue;
    const std::int64_t start = mw_window_start(e.sample_index, fs);
    if (start < margin || start + length > rec.n_samples() - margin) {
      ++out.skipped;
      continue;
    }
    out.windows.push_back(detail::cut_window(rec, start, length, Label::MW));
  }
  return out;
}

// FS windows are sampled uniformly from the admissible region: at or after
// the first counting_start, away from every MW window, every 2 s pre-press
// region, every questionnaire interval, the filter margins, and each other.
inline std::vector<WindowSample> extract_fs_windows(const EegRecording& rec, const std::vector<Event>& events,
                                                    int window_seconds, int count, Rng& rng,
                                                    std::int64_t margin = 0) {
  const double fs = rec.sampling_rate;
  const auto length = static_cast<std::int64_t>(std::llround(window_seconds * fs));
  const std::int64_t n = rec.n_samples();
  if (count == 0) return {};

  std::optional<std::int64_t> counting_start;
  for (const auto& e : events)
    if (e.kind == EventKind::counting_start) {
      counting_start = e.sample_index;
      break;
    }
  if (!counting_start) throw InputError("no counting_start event; FS windows are undefined");

  const auto two_s = static_cast<std::int64_t>(std::llround(2.0 * fs));
  std::vector<detail::Span> blocked = detail::questionnaire_spans(events);
  for (const auto& e : events) {
    if (e.kind != EventKind::button_press) continue;
    const std::int64_t mw_start = mw_window_start(e.sample_index, fs);
    if (mw_start >= margin && mw_start + length <= n - margin)
      blocked.push_back({mw_start, mw_start + length});
    blocked.push_back({e.sample_index - two_s, e.sample_index + 1});
  }

  // Free intervals inside [lo, hi) after removing blocked spans.
  const std::int64_t lo = std::max(*counting_start, margin);
  const std::int64_t hi = n - margin;
  std::sort(blocked.begin(), blocked.end(),
            [](const detail::Span& a, const detail::Span& b) { return a.begin < b.begin; });
  std::vector<detail::Span> free_spans;
  std::int64_t cursor = lo;
  for (const auto& b : blocked) {
    if (b.end <= cursor) continue;
    if (b.begin > cursor) free_spans.push_back({cursor, std::min(b.begin, hi)});
    cursor = std::max(cursor, b.end);
    if (cursor >= hi) break;
  }
  if (cursor < hi) free_spans.push_back({cursor, hi});

  std::vector<detail::Span> usable;
  std::int64_t capacity = 0;
  std::int64_t placeable = 0;
  for (const auto& f : free_spans) {
    const std::int64_t len = f.end - f.begin;
    if (len >= length) {
      usable.push_back(f);
      capacity += len / length;
      placeable += len - length + 1;
    }
  }
  if (capacity < count)
    throw InputError("cannot place " + std::to_string(count) + " FS windows of " +
                     std::to_string(window_seconds) + " s in session " + std::to_string(rec.session_id) +
                     "; at most " + std::to_string(capacity) + " achievable");

  std::vector<std::int64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  const std::int64_t max_attempts = 200 * static_cast<std::int64_t>(count) + 200;
  for (std::int64_t attempt = 0; attempt < max_attempts && std::ssize(chosen) < count; ++attempt) {
    std::int64_t r = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(placeable)));
    std::int64_t start = -1;
    for (const auto& f : usable) {
      const std::int64_t starts_here = f.end - f.begin - length + 1;
      if (r < starts_here) {
        start = f.begin + r;
        break;
      }
      r -= starts_here;
    }
    bool clash = false;
    for (std::int64_t s : chosen)
      if (start < s + length && s < start + length) {
        clash = true;
        break;
      }
    if (!clash) chosen.push_back(start);
  }

  if (std::ssize(chosen) < count) {
    // Rejection sampling fragmented out; fall back to window-aligned slots,
    // which always realize the capacity bound.
    chosen.clear();
    std::vector<std::int64_t> slots;
    for (const auto& f : usable)
      for (std::int64_t s = f.begin; s + length <= f.end; s += length) slots.push_back(s);
    rng.shuffle(slots.begin(), slots.end());
    chosen.assign(slots.begin(), slots.begin() + count);
  }

  std::sort(chosen.begin(), chosen.end());
  std::vector<WindowSample> out;
  out.reserve(chosen.size());
  for (std::int64_t s : chosen) out.push_back(detail::cut_window(rec, s, length, Label::FS));
  return out;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Z-score with population (n) standard deviation. Channels with std below
// 1e-8 are zeroed.
inline void zscore_channels_inplace(Tensor& w) {
  const int channels = w.dim(0), t = w.dim(1);
  for (int c = 0; c < channels; ++c) {
    float* row = w.data() + static_cast<std::size_t>(c) * t;
    double mean = 0.0;
    for (int i = 0; i < t; ++i) mean += row[i];
    mean /= t;
    double var = 0.0;
    for (int i = 0; i < t; ++i) var += (row[i] - mean) * (row[i] - mean);
    const double std_dev = std::sqrt(var / t);
    if (std_dev < 1e-8) {
      std::fill(row, row + t, 0.0f);
    } else {
      for (int i = 0; i < t; ++i) row[i] = static_cast<float>((row[i] - mean) / std_dev);
    }
  }
}

// Alternative scope: one mean/std over the whole window.
inline void zscore_whole_inplace(Tensor& w) {
  const std::int64_t n = w.size();
  double mean = 0.0;
  for (std::int64_t i = 0; i < n; ++i) mean += w[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::int64_t i = 0; i < n; ++i) var += (w[i] - mean) * (w[i] - mean);
  const double std_dev = std::sqrt(var / static_cast<double>(n));
  for (std::int64_t i = 0; i < n; ++i)
    w[i] = std_dev < 1e-8 ? 0.0f : static_cast<float>((w[i] - mean) / std_dev);
}

inline WindowSample zscore(WindowSample w) {
  zscore_channels_inplace(w.data);
  return w;
}

// ---------------------------------------------------------------------------
// Dataset construction
// ---------------------------------------------------------------------------

struct RecordingBundle {
  EegRecording recording;
  std::vector<Event> events;
};

struct BuildOptions {
  int window_seconds = 8;
  std::uint64_t seed = 0;
  bool apply_filter = true;
  double band_low_hz = 0.5;
  double band_high_hz = 50.0;
  int filter_taps = 0;  // 0 = default for the sampling rate
  bool zscore_per_channel = true;
};

struct BuildStats {
  int mw_windows = 0;
  int fs_windows = 0;
  int skipped_presses = 0;
};

// Pipeline for one recording: zero-phase filter, MW/FS extraction, z-score.
// FS count equals the MW count of the same recording, which keeps the
// dataset balanced per subject and overall. The FS sampler stream is derived
// from (seed, subject, session) so recordings may be processed in any order
// or in parallel.
inline std::vector<WindowSample> build_windows_for_recording(const EegRecording& rec,
                                                             const std::vector<Event>& session_events,
                                                             const BuildOptions& opt, BuildStats& stats) {
  const EegRecording* source = &rec;
  EegRecording filtered;
  std::int64_t margin = 0;
  if (opt.apply_filter) {
    const auto kernel = design_bandpass(rec.sampling_rate, opt.band_low_hz, opt.band_high_hz, opt.filter_taps);
    filtered = filter_zero_phase(rec, kernel);
    margin = kernel.edge_margin();
    source = &filtered;
  }

  auto mw = extract_mw_windows(*source, session_events, opt.window_seconds, margin);
  stats.skipped_presses += mw.skipped;
  stats.mw_windows += static_cast<int>(mw.windows.size());

  std::vector<WindowSample> out = std::move(mw.windows);
  if (!out.empty()) {
    Rng rng = derive_rng(opt.seed, {static_cast<std::uint64_t>(rec.subject_id),
                                    static_cast<std::uint64_t>(rec.session_id)});
    auto fs = extract_fs_windows(*source, session_events, opt.window_seconds, static_cast<int>(out.size()),
                                 rng, margin);
    stats.fs_windows += static_cast<int>(fs.size());
    for (auto& w : fs) out.push_back(std::move(w));
  }
  for (auto& w : out) {
    if (opt.zscore_per_channel)
      zscore_channels_inplace(w.data);
    else
      zscore_whole_inplace(w.data);
  }
  return out;
}

struct BuildResult {
  Dataset dataset;
  BuildStats stats;
};

inline BuildResult build_dataset(const std::vector<RecordingBundle>& bundles, const BuildOptions& opt) {
  if (bundles.empty()) throw InputError("no recordings supplied");
  const double fs = bundles.front().recording.sampling_rate;
  const int channels = bundles.front().recording.n_channels();
  BuildResult res;
  res.dataset.window_seconds = opt.window_seconds;
  res.dataset.sampling_rate = fs;
  res.dataset.n_channels = channels;
  for (const auto& b : bundles) {
    if (b.recording.sampling_rate != fs || b.recording.n_channels() != channels)
      throw InputError("recordings disagree on channel count or sampling rate (session " +
                       std::to_string(b.recording.session_id) + ")");
    auto windows = build_windows_for_recording(b.recording, b.events, opt, res.stats);
    for (auto& w : windows) res.dataset.samples.push_back(std::move(w));
  }
  if (res.stats.mw_windows == 0)
    throw InputError("no MW window could be extracted from any recording (" +
                     std::to_string(res.stats.skipped_presses) + " presses skipped)");
  return res;
}

}  // namespace mwcnn
