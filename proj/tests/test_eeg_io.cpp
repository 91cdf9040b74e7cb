#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "testutil.hpp"

using namespace mwcnn;
namespace fs = std::filesystem;

namespace {

class EegIoTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = testutil::make_temp_dir("eegio"); }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST(DecodeInt24, HandValues) {
  const unsigned char one[3] = {0x01, 0x00, 0x00};
  const unsigned char minus_one[3] = {0xff, 0xff, 0xff};
  const unsigned char min_val[3] = {0x00, 0x00, 0x80};
  const unsigned char max_val[3] = {0xff, 0xff, 0x7f};
  EXPECT_EQ(decode_int24(one), 1);
  EXPECT_EQ(decode_int24(minus_one), -1);
  EXPECT_EQ(decode_int24(min_val), -8388608);
  EXPECT_EQ(decode_int24(max_val), 8388607);
}

TEST(DecodeInt24, InverseOfEncodeExhaustively) {
  unsigned char buf[3];
  for (std::int32_t v = -8388608; v <= 8388607; ++v) {
    encode_int24(v, buf);
    if (decode_int24(buf) != v) {
      FAIL() << "round trip broke at " << v;
    }
  }
}

TEST_F(EegIoTest, BdfRoundTripAgainstSyntheticWriter) {
  const int spr = 256, records = 3;
  std::vector<testutil::BdfChannel> channels(2);
  Rng rng(11);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    channels[c].label = "A" + std::to_string(c + 1);
    for (int i = 0; i < spr * records; ++i)
      channels[c].samples.push_back(static_cast<std::int32_t>(rng.below(16777216)) - 8388608);
  }
  testutil::write_bdf(path("a.bdf"), channels, records, 1.0, spr, 7, 3);

  const EegRecording rec = read_bdf(path("a.bdf"));
  EXPECT_EQ(rec.n_channels(), 2);
  EXPECT_EQ(rec.n_samples(), spr * records);
  EXPECT_DOUBLE_EQ(rec.sampling_rate, 256.0);
  EXPECT_EQ(rec.subject_id, 7);
  EXPECT_EQ(rec.session_id, 3);
  EXPECT_EQ(rec.channel_labels[0], "A1");

  const double gain = (262143.0 - (-262144.0)) / (8388607.0 - (-8388608.0));
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < spr * records; ++i) {
      const float expected =
          static_cast<float>(channels[static_cast<std::size_t>(c)].samples[static_cast<std::size_t>(i)] * gain);
      ASSERT_EQ(rec.data.at(c, i), expected) << "channel " << c << " sample " << i;
    }
}

TEST_F(EegIoTest, BdfGainIsPhysOverDigitalSpan) {
  // +-262144/262143 over +-8388608/8388607 is the 0.03125 uV/LSB hardware gain.
  const double gain = (262143.0 - (-262144.0)) / (8388607.0 - (-8388608.0));
  EXPECT_NEAR(gain, 0.03125, 1e-6);

  std::vector<testutil::BdfChannel> ch(1);
  ch[0].samples.assign(16, 32);  // digital 32 -> 1.0 uV at this gain
  testutil::write_bdf(path("g.bdf"), ch, 1, 1.0, 16);
  const EegRecording rec = read_bdf(path("g.bdf"));
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(rec.data.at(0, i), 1.0f, 1e-5);
}

TEST_F(EegIoTest, BdfRejectsBadMagic) {
  std::ofstream os(path("bad.bdf"), std::ios::binary);
  os << "NOTABIOSEMIFILE";
  os.close();
  EXPECT_THROW(read_bdf(path("bad.bdf")), ParseError);
}

TEST_F(EegIoTest, BdfRejectsTruncatedData) {
  std::vector<testutil::BdfChannel> ch(1);
  ch[0].samples.assign(32, 5);
  testutil::write_bdf(path("t.bdf"), ch, 2, 1.0, 16);
  // chop the second record
  const auto full = fs::file_size(path("t.bdf"));
  fs::resize_file(path("t.bdf"), full - 20);
  try {
    read_bdf(path("t.bdf"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST_F(EegIoTest, BdfRejectsZeroDataWithDeclaredRecords) {
  std::vector<testutil::BdfChannel> ch(1);
  ch[0].samples.assign(16, 0);
  testutil::write_bdf(path("z.bdf"), ch, 1, 1.0, 16);
  // keep only the header
  fs::resize_file(path("z.bdf"), 256 * 2);
  EXPECT_THROW(read_bdf(path("z.bdf")), ParseError);
}

TEST_F(EegIoTest, BdfRejectsInconsistentSamplesPerRecord) {
  // Hand-build a 2-channel header whose per-channel sample counts differ.
  std::ofstream os(path("i.bdf"), std::ios::binary);
  os.put(static_cast<char>(0xff));
  os.write("BIOSEMI", 7);
  testutil::write_padded(os, "x", 80);
  testutil::write_padded(os, "x", 80);
  testutil::write_padded(os, "01.01.20", 8);
  testutil::write_padded(os, "00.00.00", 8);
  testutil::write_padded(os, std::to_string(256 * 3), 8);
  testutil::write_padded(os, "24BIT", 44);
  testutil::write_padded(os, "1", 8);
  testutil::write_padded(os, "1", 8);
  testutil::write_padded(os, "2", 4);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "ch", 16);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "t", 80);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "uV", 8);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "-1000", 8);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "1000", 8);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "-8388608", 8);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "8388607", 8);
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "", 80);
  testutil::write_padded(os, "16", 8);
  testutil::write_padded(os, "32", 8);  // mismatch
  for (int c = 0; c < 2; ++c) testutil::write_padded(os, "", 32);
  os.close();
  try {
    read_bdf(path("i.bdf"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("samples per record"), std::string::npos);
  }
}

TEST_F(EegIoTest, RawMatrixRoundTripIsBitExact) {
  EegRecording rec = testutil::make_noise_recording(4, 250.0, 4.0, 2, 9, 5);
  write_raw_matrix(rec, path("r.mwer"));
  const EegRecording back = read_raw_matrix(path("r.mwer"));
  EXPECT_EQ(back.data, rec.data);
  EXPECT_DOUBLE_EQ(back.sampling_rate, rec.sampling_rate);
  EXPECT_EQ(back.channel_labels, rec.channel_labels);
  EXPECT_EQ(back.subject_id, 2);
  EXPECT_EQ(back.session_id, 9);

  // a second write of the parsed recording is byte-identical
  write_raw_matrix(back, path("r2.mwer"));
  std::ifstream a(path("r.mwer"), std::ios::binary), b(path("r2.mwer"), std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  EXPECT_EQ(sa, sb);
}

TEST_F(EegIoTest, RawMatrixRejectsEmptyChannelList) {
  EegRecording rec;
  rec.sampling_rate = 100;
  EXPECT_THROW(write_raw_matrix(rec, path("e.mwer")), InputError);
}

TEST_F(EegIoTest, RawMatrixRejectsHeaderPayloadMismatch) {
  EegRecording rec = testutil::make_noise_recording(2, 100.0, 1.0, 1, 1, 3);
  write_raw_matrix(rec, path("m.mwer"));
  // remove the trailing labels and part of the sample payload
  fs::resize_file(path("m.mwer"), fs::file_size(path("m.mwer")) - 64);
  EXPECT_THROW(read_raw_matrix(path("m.mwer")), ParseError);
}

TEST_F(EegIoTest, RawMatrixRejectsWrongMagic) {
  std::ofstream os(path("w.mwer"), std::ios::binary);
  os << "WXYZ         ";
  os.close();
  EXPECT_THROW(read_raw_matrix(path("w.mwer")), ParseError);
}

TEST_F(EegIoTest, EventsCsvSingleRow) {
  std::ofstream os(path("e.csv"));
  os << "session_id,sample_index,kind\n1,20480,button_press\n";
  os.close();
  const auto events = read_events_csv(path("e.csv"));
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].session_id, 1);
  EXPECT_EQ(events[0].sample_index, 20480);
  EXPECT_EQ(events[0].kind, EventKind::button_press);
}

TEST_F(EegIoTest, EventsCsvRejectsUnknownKindNamingRow) {
  std::ofstream os(path("k.csv"));
  os << "session_id,sample_index,kind\n1,100,button_press\n1,200,coffee_break\n";
  os.close();
  try {
    read_events_csv(path("k.csv"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos);
    EXPECT_NE(msg.find("coffee_break"), std::string::npos);
  }
}

TEST_F(EegIoTest, EventsCsvRejectsNegativeIndex) {
  std::ofstream os(path("n.csv"));
  os << "session_id,sample_index,kind\n1,-5,button_press\n";
  os.close();
  EXPECT_THROW(read_events_csv(path("n.csv")), ParseError);
}

TEST_F(EegIoTest, EventsCsvSortsOutOfOrderRows) {
  std::ofstream os(path("s.csv"));
  os << "session_id,sample_index,kind\n1,20480,button_press\n1,18000,button_press\n";
  os.close();
  const auto events = read_events_csv(path("s.csv"));
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].sample_index, 18000);
  EXPECT_EQ(events[1].sample_index, 20480);
}

}  // namespace
