#pragma once

// Shared fixtures for the test suites: a synthetic BDF writer (the
// round-trip oracle for the parser), synthetic recordings with event
// tracks, and separable window datasets for training tests.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mwcnn/mwcnn.hpp"

namespace testutil {

struct BdfChannel {
  std::string label = "chan";
  double phys_min = -262144.0;
  double phys_max = 262143.0;
  double dig_min = -8388608.0;
  double dig_max = 8388607.0;
  std::vector<std::int32_t> samples;  // digital values, length n_records * samples_per_record
};

inline void write_padded(std::ostream& os, const std::string& text, std::size_t width) {
  std::string field = text.substr(0, width);
  field.resize(width, ' ');
  os.write(field.data(), static_cast<std::streamsize>(width));
}

inline std::string format_number(double v) {
  std::string s = std::to_string(v);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s;
}

// Independent writer for Biosemi-style BDF files: 256-byte main header,
// 256 bytes per channel, then records of 24-bit little-endian samples.
inline void write_bdf(const std::string& path, const std::vector<BdfChannel>& channels, int n_records,
                      double record_seconds, int samples_per_record, int subject = 0, int session = 0) {
  std::ofstream os(path, std::ios::binary);
  os.put(static_cast<char>(0xff));
  os.write("BIOSEMI", 7);
  write_padded(os, "subject=" + std::to_string(subject) + " session=" + std::to_string(session), 80);
  write_padded(os, "synthetic recording", 80);
  write_padded(os, "01.01.20", 8);
  write_padded(os, "00.00.00", 8);
  write_padded(os, std::to_string(256 * (channels.size() + 1)), 8);
  write_padded(os, "24BIT", 44);
  write_padded(os, std::to_string(n_records), 8);
  write_padded(os, format_number(record_seconds), 8);
  write_padded(os, std::to_string(channels.size()), 4);

  for (const auto& c : channels) write_padded(os, c.label, 16);
  for (std::size_t i = 0; i < channels.size(); ++i) write_padded(os, "active electrode", 80);
  for (std::size_t i = 0; i < channels.size(); ++i) write_padded(os, "uV", 8);
  for (const auto& c : channels) write_padded(os, format_number(c.phys_min), 8);
  for (const auto& c : channels) write_padded(os, format_number(c.phys_max), 8);
  for (const auto& c : channels) write_padded(os, format_number(c.dig_min), 8);
  for (const auto& c : channels) write_padded(os, format_number(c.dig_max), 8);
  for (std::size_t i = 0; i < channels.size(); ++i) write_padded(os, "HP:0.5Hz LP:50Hz", 80);
  for (std::size_t i = 0; i < channels.size(); ++i) write_padded(os, std::to_string(samples_per_record), 8);
  for (std::size_t i = 0; i < channels.size(); ++i) write_padded(os, "", 32);

  for (int r = 0; r < n_records; ++r) {
    for (const auto& c : channels) {
      for (int s = 0; s < samples_per_record; ++s) {
        unsigned char bytes[3];
        mwcnn::encode_int24(c.samples[static_cast<std::size_t>(r) * samples_per_record + s], bytes);
        os.write(reinterpret_cast<const char*>(bytes), 3);
      }
    }
  }
}

// Gaussian noise via Box-Muller on the deterministic Rng.
inline double gaussian(mwcnn::Rng& rng) {
  const double u1 = std::max(rng.uniform01(), 1e-12);
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline mwcnn::EegRecording make_noise_recording(int channels, double fs, double seconds, int subject,
                                                int session, std::uint64_t seed) {
  mwcnn::EegRecording rec;
  const auto n = static_cast<int>(std::llround(fs * seconds));
  rec.data = mwcnn::Tensor({channels, n});
  rec.sampling_rate = fs;
  rec.subject_id = subject;
  rec.session_id = session;
  mwcnn::Rng rng(seed);
  for (std::int64_t i = 0; i < rec.data.size(); ++i) rec.data[i] = static_cast<float>(gaussian(rng));
  for (int c = 0; c < channels; ++c) rec.channel_labels.push_back("ch" + std::to_string(c));
  return rec;
}

// Event track with a counting_start, then presses each followed by a short
// questionnaire. Presses are spaced so every 8 s MW window fits.
inline std::vector<mwcnn::Event> make_session_events(int session, double fs, int n_presses,
                                                     std::int64_t first_press, std::int64_t press_gap) {
  std::vector<mwcnn::Event> ev;
  ev.push_back({session, static_cast<std::int64_t>(std::llround(fs)), mwcnn::EventKind::counting_start});
  std::int64_t p = first_press;
  for (int i = 0; i < n_presses; ++i) {
    ev.push_back({session, p, mwcnn::EventKind::button_press});
    ev.push_back({session, p + static_cast<std::int64_t>(std::llround(fs)), mwcnn::EventKind::question_start});
    ev.push_back({session, p + static_cast<std::int64_t>(std::llround(3 * fs)), mwcnn::EventKind::question_end});
    p += press_gap;
  }
  return ev;
}

// Balanced window dataset: FS windows are pure noise, MW windows carry an
// oscillatory burst in the middle third of half the channels.
inline mwcnn::Dataset make_burst_dataset(int n_samples, int channels, int timesteps, std::uint64_t seed,
                                         double burst_amplitude = 2.0) {
  mwcnn::Dataset ds;
  ds.window_seconds = 8;
  ds.sampling_rate = timesteps / 8.0;
  ds.n_channels = channels;
  mwcnn::Rng rng(seed);
  for (int i = 0; i < n_samples; ++i) {
    mwcnn::WindowSample s;
    s.data = mwcnn::Tensor({channels, timesteps});
    for (std::int64_t j = 0; j < s.data.size(); ++j) s.data[j] = static_cast<float>(gaussian(rng));
    s.label = (i % 2 == 0) ? mwcnn::Label::FS : mwcnn::Label::MW;
    s.subject_id = (i < n_samples / 2) ? 1 : 2;
    s.session_id = s.subject_id;
    s.origin_offset = i;
    if (s.label == mwcnn::Label::MW) {
      const int front = timesteps / 3, back = 2 * timesteps / 3;
      for (int c = 0; c < channels / 2; ++c)
        for (int t = front; t < back; ++t)
          s.data.at(c, t) += static_cast<float>(burst_amplitude * std::sin(2.0 * M_PI * 0.1 * (t - front)));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Linearly separable toy dataset: class 1 adds a large constant offset
// pattern on top of the class-0 noise.
inline mwcnn::Dataset make_offset_dataset(int n_samples, int channels, int timesteps, std::uint64_t seed,
                                          double offset = 3.0) {
  mwcnn::Dataset ds;
  ds.window_seconds = 8;
  ds.sampling_rate = timesteps / 8.0;
  ds.n_channels = channels;
  mwcnn::Rng rng(seed);
  for (int i = 0; i < n_samples; ++i) {
    mwcnn::WindowSample s;
    s.data = mwcnn::Tensor({channels, timesteps});
    for (std::int64_t j = 0; j < s.data.size(); ++j) s.data[j] = static_cast<float>(gaussian(rng));
    s.label = (i % 2 == 0) ? mwcnn::Label::FS : mwcnn::Label::MW;
    s.subject_id = 1;
    s.session_id = 1;
    if (s.label == mwcnn::Label::MW)
      for (int c = 0; c < channels; c += 2)
        for (int t = 0; t < timesteps; ++t) s.data.at(c, t) += static_cast<float>(offset);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Toy architecture for 256-step windows: the standard layer stack with an
// all-(2,2) pooling override so the shapes stay positive.
inline mwcnn::ArchSpec toy_arch(int channels = 8, int n_maps = 20, double dropout = 0.2) {
  return mwcnn::build_arch(8, 32.0, channels, n_maps, mwcnn::PoolPlan{{{2, 2}, {2, 2}, {2, 2}, {2, 2}}},
                           dropout);
}

// Unique scratch directory under the build tree.
inline std::filesystem::path make_temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mwcnn_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
