#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mwcnn/detail/binio.hpp"
#include "mwcnn/tensor.hpp"

namespace mwcnn {

// Class convention everywhere: 0 = FS (focusing state, negative),
// 1 = MW (mind wandering, positive).
enum class Label : std::uint8_t { FS = 0, MW = 1 };

inline const char* to_string(Label l) { return l == Label::MW ? "MW" : "FS"; }

// One fixed-length labeled window with provenance.
struct WindowSample {
  Tensor data;  // [n_channels, n_timesteps]
  Label label = Label::FS;
  int subject_id = 0;
  int session_id = 0;
  std::int64_t origin_offset = 0;  // window start sample in the source recording
};

// Balanced labeled collection; every sample shares one shape.
struct Dataset {
  std::vector<WindowSample> samples;
  int window_seconds = 8;
  double sampling_rate = 0.0;
  int n_channels = 0;

  int n_timesteps() const {
    return samples.empty() ? 0 : samples.front().data.dim(1);
  }
  std::size_t count(Label l) const {
    std::size_t n = 0;
    for (const auto& s : samples) n += (s.label == l) ? 1 : 0;
    return n;
  }
};

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

// MWDS container: magic "MWDS", version u32 LE, n_samples u32,
// n_channels u32, n_timesteps u32, sampling_rate f64, then per sample:
// label u8, subject u8, session u16, origin_offset u64, float32 LE
// channel-major data.
inline void save_dataset(const Dataset& ds, const std::string& path) {
  if (ds.samples.empty()) throw InputError("refusing to save an empty dataset");
  const int nt = ds.samples.front().data.dim(1);
  auto os = detail::open_out(path);
  detail::put_bytes(os, "MWDS", 4);
  detail::put_le<std::uint32_t>(os, kDatasetFormatVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.samples.size()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.n_channels));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(nt));
  detail::put_le<double>(os, ds.sampling_rate);
  for (const auto& s : ds.samples) {
    if (s.data.shape() != std::vector<int>{ds.n_channels, nt})
      throw InputError("dataset sample shape " + s.data.shape_str() + " differs from header");
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.label));
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.subject_id));
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(s.session_id));
    detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(s.origin_offset));
    detail::put_bytes(os, s.data.data(), sizeof(float) * static_cast<std::size_t>(s.data.size()));
  }
  if (!os) throw InputError("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "MWDS", "MWDS dataset");
  const auto version = detail::get_le<std::uint32_t>(is, "version");
  if (version != kDatasetFormatVersion)
    throw ParseError("MWDS version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kDatasetFormatVersion) + ")");
  const auto n_samples = detail::get_le<std::uint32_t>(is, "n_samples");
  const auto n_channels = detail::get_le<std::uint32_t>(is, "n_channels");
  const auto n_timesteps = detail::get_le<std::uint32_t>(is, "n_timesteps");
  if (n_samples == 0 || n_channels == 0 || n_timesteps == 0)
    throw ParseError("MWDS header declares a zero dimension");
  Dataset ds;
  ds.sampling_rate = detail::get_le<double>(is, "sampling_rate");
  if (!(ds.sampling_rate > 0)) throw ParseError("MWDS sampling rate must be positive");
  ds.n_channels = static_cast<int>(n_channels);
  ds.window_seconds = static_cast<int>(std::llround(n_timesteps / ds.sampling_rate));
  ds.samples.reserve(n_samples);
  for (std::uint32_t i = 0; i < n_samples; ++i) {
    WindowSample s;
    const auto label = detail::get_le<std::uint8_t>(is, "label");
    if (label > 1)
      throw ParseError("MWDS sample " + std::to_string(i) + " has label byte " + std::to_string(label) +
                       " outside {0,1}");
    s.label = static_cast<Label>(label);
    s.subject_id = detail::get_le<std::uint8_t>(is, "subject");
    s.session_id = detail::get_le<std::uint16_t>(is, "session");
    s.origin_offset = static_cast<std::int64_t>(detail::get_le<std::uint64_t>(is, "origin_offset"));
    s.data = Tensor({static_cast<int>(n_channels), static_cast<int>(n_timesteps)});
    detail::get_bytes(is, s.data.data(), sizeof(float) * static_cast<std::size_t>(s.data.size()), "sample data");
    ds.samples.push_back(std::move(s));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw ParseError("MWDS file has trailing bytes after " + std::to_string(n_samples) + " samples");
  return ds;
}

}  // namespace mwcnn
