#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mwcnn/detail/binio.hpp"
#include "mwcnn/tensor.hpp"

namespace mwcnn {

// Continuous multichannel recording. data is [n_channels, n_samples] in
// microvolts; for the target hardware n_channels = 64 at 1024 Hz, but the
// parsers accept any channel count and rate.
struct EegRecording {
  Tensor data;
  double sampling_rate = 0.0;
  std::vector<std::string> channel_labels;
  int subject_id = 0;
  int session_id = 0;

  int n_channels() const { return data.rank() == 2 ? data.dim(0) : 0; }
  std::int64_t n_samples() const { return data.rank() == 2 ? data.dim(1) : 0; }
};

enum class EventKind { button_press, counting_start, question_start, question_end };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::button_press: return "button_press";
    case EventKind::counting_start: return "counting_start";
    case EventKind::question_start: return "question_start";
    case EventKind::question_end: return "question_end";
  }
  return "?";
}

// Timestamped marker. session_id binds it to a recording; session ids are
// globally unique across subjects in this artifact.
struct Event {
  int session_id = 0;
  std::int64_t sample_index = 0;
  EventKind kind = EventKind::button_press;
};

// 24-bit little-endian two's complement, as stored in BDF data records.
inline std::int32_t decode_int24(const unsigned char* bytes) {
  std::uint32_t v = std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) | (std::uint32_t(bytes[2]) << 16);
  if (v & 0x800000u) v |= 0xff000000u;
  return static_cast<std::int32_t>(v);
}

inline void encode_int24(std::int32_t value, unsigned char* bytes) {
  bytes[0] = static_cast<unsigned char>(value & 0xff);
  bytes[1] = static_cast<unsigned char>((value >> 8) & 0xff);
  bytes[2] = static_cast<unsigned char>((value >> 16) & 0xff);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string read_field(std::istream& is, std::size_t width, const char* name) {
  std::string buf(width, '\0');
  get_bytes(is, buf.data(), width, name);
  return trim(buf);
}

inline long parse_long(const std::string& s, const char* field) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("BDF header field '") + field + "' is not an integer: \"" + s + "\"");
  }
}

inline double parse_double(const std::string& s, const char* field) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("BDF header field '") + field + "' is not a number: \"" + s + "\"");
  }
}

// Our synthetic writer stamps "subject=<n> session=<n>" into the local
// subject field; real files fall back to 0/0 and the CLI config overrides.
inline int scan_tagged_int(const std::string& text, const std::string& tag) {
  const auto pos = text.find(tag + "=");
  if (pos == std::string::npos) return 0;
  int v = 0;
  std::istringstream is(text.substr(pos + tag.size() + 1));
  is >> v;
  return is.fail() ? 0 : v;
}

}  // namespace detail

// Parses a Biosemi-style BDF file: 256-byte main header, 256 bytes per
// channel, then data records of 24-bit little-endian samples (record-major,
// channel-major within a record). Samples are scaled to physical units by
// the per-channel gain (physMax - physMin) / (digMax - digMin).
inline EegRecording read_bdf(const std::string& path) {
  auto is = detail::open_in(path);

  unsigned char id0 = 0;
  detail::get_bytes(is, &id0, 1, "identification byte");
  const std::string ident = detail::read_field(is, 7, "identification string");
  if (id0 != 0xff || ident != "BIOSEMI")
    throw ParseError("bad BDF magic in " + path + " (expected 0xFF \"BIOSEMI\")");

  const std::string local_subject = detail::read_field(is, 80, "local subject");
  detail::read_field(is, 80, "local recording");
  detail::read_field(is, 8, "start date");
  detail::read_field(is, 8, "start time");
  const long header_bytes = detail::parse_long(detail::read_field(is, 8, "header bytes"), "header bytes");
  detail::read_field(is, 44, "data version");
  const long n_records = detail::parse_long(detail::read_field(is, 8, "number of records"), "number of records");
  const double record_seconds =
      detail::parse_double(detail::read_field(is, 8, "record duration"), "record duration");
  const long n_channels = detail::parse_long(detail::read_field(is, 4, "channel count"), "channel count");

  if (n_channels < 1) throw ParseError("BDF header field 'channel count' must be >= 1, got " + std::to_string(n_channels));
  if (n_records < 0) throw ParseError("BDF header field 'number of records' is negative");
  if (record_seconds <= 0) throw ParseError("BDF header field 'record duration' must be positive");
  if (header_bytes != 256 * (n_channels + 1))
    throw ParseError("BDF header field 'header bytes' is " + std::to_string(header_bytes) + ", expected " +
                     std::to_string(256 * (n_channels + 1)));

  const auto nc = static_cast<std::size_t>(n_channels);
  std::vector<std::string> labels(nc);
  std::vector<double> phys_min(nc), phys_max(nc), dig_min(nc), dig_max(nc);
  std::vector<long> samples_per_record(nc);
  for (auto& l : labels) l = detail::read_field(is, 16, "channel label");
  for (std::size_t c = 0; c < nc; ++c) detail::read_field(is, 80, "transducer");
  for (std::size_t c = 0; c < nc; ++c) detail::read_field(is, 8, "physical dimension");
  for (std::size_t c = 0; c < nc; ++c)
    phys_min[c] = detail::parse_double(detail::read_field(is, 8, "physical min"), "physical min");
  for (std::size_t c = 0; c < nc; ++c)
    phys_max[c] = detail::parse_double(detail::read_field(is, 8, "physical max"), "physical max");
  for (std::size_t c = 0; c < nc; ++c)
    dig_min[c] = detail::parse_double(detail::read_field(is, 8, "digital min"), "digital min");
  for (std::size_t c = 0; c < nc; ++c)
    dig_max[c] = detail::parse_double(detail::read_field(is, 8, "digital max"), "digital max");
  for (std::size_t c = 0; c < nc; ++c) detail::read_field(is, 80, "prefiltering");
  for (std::size_t c = 0; c < nc; ++c)
    samples_per_record[c] =
        detail::parse_long(detail::read_field(is, 8, "samples per record"), "samples per record");
  for (std::size_t c = 0; c < nc; ++c) detail::read_field(is, 32, "reserved");

  const long spr = samples_per_record[0];
  if (spr < 1) throw ParseError("BDF header field 'samples per record' must be >= 1");
  for (std::size_t c = 1; c < nc; ++c)
    if (samples_per_record[c] != spr)
      throw ParseError("BDF header field 'samples per record' differs between channel 1 (" + std::to_string(spr) +
                       ") and channel " + std::to_string(c + 1) + " (" + std::to_string(samples_per_record[c]) +
                       "); a single matrix requires equal counts");

  std::vector<double> gain(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const double dig_span = dig_max[c] - dig_min[c];
    if (dig_span == 0)
      throw ParseError("BDF header field 'digital min/max' has zero span on channel " + std::to_string(c + 1));
    gain[c] = (phys_max[c] - phys_min[c]) / dig_span;
  }

  const std::int64_t total = static_cast<std::int64_t>(n_records) * spr;
  if (total == 0) throw ParseError("BDF file " + path + " declares zero samples");

  EegRecording rec;
  rec.data = Tensor({static_cast<int>(n_channels), static_cast<int>(total)});
  rec.sampling_rate = static_cast<double>(spr) / record_seconds;
  rec.channel_labels = labels;
  rec.subject_id = detail::scan_tagged_int(local_subject, "subject");
  rec.session_id = detail::scan_tagged_int(local_subject, "session");

  std::vector<unsigned char> record_buf(nc * static_cast<std::size_t>(spr) * 3);
  for (long r = 0; r < n_records; ++r) {
    is.read(reinterpret_cast<char*>(record_buf.data()), static_cast<std::streamsize>(record_buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != record_buf.size())
      throw ParseError("BDF file " + path + " truncated in data record " + std::to_string(r + 1) + " of " +
                       std::to_string(n_records));
    for (std::size_t c = 0; c < nc; ++c) {
      const unsigned char* src = record_buf.data() + c * static_cast<std::size_t>(spr) * 3;
      float* dst = rec.data.data() + c * static_cast<std::size_t>(total) + static_cast<std::size_t>(r) * spr;
      for (long s = 0; s < spr; ++s)
        dst[s] = static_cast<float>(decode_int24(src + static_cast<std::size_t>(s) * 3) * gain[c]);
    }
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw ParseError("BDF file " + path + " has trailing bytes after the declared " + std::to_string(n_records) +
                     " records");
  return rec;
}

// MWER internal raw format: magic "MWER", version u32 LE, n_channels u32,
// n_samples u32, sampling_rate f64, subject u8, session u16, channel-major
// float32 LE samples, then newline-terminated channel labels.
inline constexpr std::uint32_t kRawFormatVersion = 1;

inline void write_raw_matrix(const EegRecording& rec, const std::string& path) {
  if (rec.n_channels() < 1) throw InputError("recording has no channels");
  if (static_cast<int>(rec.channel_labels.size()) != rec.n_channels())
    throw InputError("recording has " + std::to_string(rec.channel_labels.size()) + " labels for " +
                     std::to_string(rec.n_channels()) + " channels");
  auto os = detail::open_out(path);
  detail::put_bytes(os, "MWER", 4);
  detail::put_le<std::uint32_t>(os, kRawFormatVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(rec.n_channels()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(rec.n_samples()));
  detail::put_le<double>(os, rec.sampling_rate);
  detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(rec.subject_id));
  detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(rec.session_id));
  detail::put_bytes(os, rec.data.data(), sizeof(float) * static_cast<std::size_t>(rec.data.size()));
  for (const auto& label : rec.channel_labels) os << label << '\n';
  if (!os) throw InputError("write failed: " + path);
}

inline EegRecording read_raw_matrix(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "MWER", "MWER raw recording");
  const auto version = detail::get_le<std::uint32_t>(is, "version");
  if (version != kRawFormatVersion)
    throw ParseError("MWER version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kRawFormatVersion) + ")");
  const auto n_channels = detail::get_le<std::uint32_t>(is, "n_channels");
  const auto n_samples = detail::get_le<std::uint32_t>(is, "n_samples");
  if (n_channels == 0) throw ParseError("MWER file declares zero channels");
  if (n_samples == 0) throw ParseError("MWER file declares zero samples");
  EegRecording rec;
  rec.sampling_rate = detail::get_le<double>(is, "sampling_rate");
  if (!(rec.sampling_rate > 0)) throw ParseError("MWER sampling rate must be positive");
  rec.subject_id = detail::get_le<std::uint8_t>(is, "subject");
  rec.session_id = detail::get_le<std::uint16_t>(is, "session");
  rec.data = Tensor({static_cast<int>(n_channels), static_cast<int>(n_samples)});
  detail::get_bytes(is, rec.data.data(), sizeof(float) * static_cast<std::size_t>(rec.data.size()), "samples");
  rec.channel_labels.reserve(n_channels);
  std::string line;
  for (std::uint32_t c = 0; c < n_channels; ++c) {
    if (!std::getline(is, line)) throw ParseError("MWER file ends before " + std::to_string(n_channels) + " labels");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rec.channel_labels.push_back(line);
  }
  return rec;
}

// Events sidecar: CSV with header "session_id,sample_index,kind". Rows may
// appear in any order; the result is sorted by (session, sample index).
inline std::vector<Event> read_events_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open events file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw ParseError("events file is empty: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (detail::trim(line) != "session_id,sample_index,kind")
    throw ParseError("events file " + path + " must start with header \"session_id,sample_index,kind\"");

  std::vector<Event> events;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string session_s, index_s, kind_s;
    if (!std::getline(ls, session_s, ',') || !std::getline(ls, index_s, ',') || !std::getline(ls, kind_s))
      throw ParseError("events row " + std::to_string(row) + " does not have 3 columns");
    Event ev;
    try {
      ev.session_id = std::stoi(detail::trim(session_s));
      ev.sample_index = std::stoll(detail::trim(index_s));
    } catch (const std::exception&) {
      throw ParseError("events row " + std::to_string(row) + " has a non-numeric id or index");
    }
    if (ev.sample_index < 0)
      throw ParseError("events row " + std::to_string(row) + " has negative sample_index");
    const std::string kind = detail::trim(kind_s);
    if (kind == "button_press") ev.kind = EventKind::button_press;
    else if (kind == "counting_start") ev.kind = EventKind::counting_start;
    else if (kind == "question_start") ev.kind = EventKind::question_start;
    else if (kind == "question_end") ev.kind = EventKind::question_end;
    else throw ParseError("events row " + std::to_string(row) + " has unknown kind \"" + kind + "\"");
    events.push_back(ev);
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.session_id != b.session_id ? a.session_id < b.session_id : a.sample_index < b.sample_index;
  });
  return events;
}

// Events belonging to one recording, in time order.
inline std::vector<Event> events_for_session(const std::vector<Event>& all, int session_id) {
  std::vector<Event> out;
  for (const auto& e : all)
    if (e.session_id == session_id) out.push_back(e);
  return out;
}

}  // namespace mwcnn
