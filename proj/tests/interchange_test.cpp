#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "cbir/interchange.hpp"
#include "oracles.hpp"

namespace cbir {
namespace {

std::string serialize(const EmbeddingSet& set) {
  std::ostringstream out(std::ios::binary);
  write_embeddings(set, out);
  return out.str();
}

EmbeddingSet parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_embeddings(in);
}

InterchangeErrc parse_error(const std::string& bytes) {
  try {
    parse(bytes);
  } catch (const InterchangeError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an InterchangeError";
  return InterchangeErrc::io_failure;
}

TEST(Emb1, EmptySetIsHeaderOnly) {
  EmbeddingSet set;
  set.dim = 8;
  const auto bytes = serialize(set);
  EXPECT_EQ(bytes.size(), 20u);
  std::ostringstream sink;
  EXPECT_EQ(write_embeddings(set, sink), 20u);

  const auto back = parse(bytes);
  EXPECT_EQ(back.count, 0u);
  EXPECT_EQ(back.dim, 8u);
}

TEST(Emb1, HeaderLayoutIsLittleEndian) {
  EmbeddingSet set;
  set.count = 2;
  set.dim = 3;
  set.data = {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f};
  const auto bytes = serialize(set);
  ASSERT_EQ(bytes.size(), 20u + 24u);
  EXPECT_EQ(bytes.substr(0, 4), "EMB1");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x02\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(12, 4), std::string("\x03\x00\x00\x00", 4));
  EXPECT_EQ(bytes[16], '\x01');
  EXPECT_EQ(bytes.substr(17, 3), std::string(3, '\0'));
  // 1.0f = 0x3F800000
  EXPECT_EQ(bytes.substr(20, 4), std::string("\x00\x00\x80\x3f", 4));

  const auto back = parse(bytes);
  EXPECT_EQ(back.count, 2u);
  EXPECT_EQ(back.dim, 3u);
  EXPECT_EQ(back.data, set.data);
}

TEST(Emb1, RandomRoundTripIsBitwiseIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto set = testing::random_set(100, 1024, seed, -1e3f, 1e3f);
    set.data[7] = std::numeric_limits<float>::denorm_min();
    set.data[8] = -0.0f;
    const auto bytes = serialize(set);
    const auto back = parse(bytes);
    ASSERT_EQ(back.data.size(), set.data.size());
    EXPECT_EQ(0, std::memcmp(back.data.data(), set.data.data(), set.data.size() * sizeof(float)));
    EXPECT_EQ(serialize(back), bytes);
  }
}

TEST(Emb1, RejectsBadMagic) {
  auto bytes = serialize(testing::random_set(2, 3, 1));
  bytes.replace(0, 4, "XXXX");
  EXPECT_EQ(parse_error(bytes), InterchangeErrc::bad_magic);
}

TEST(Emb1, RejectsUnsupportedVersionAndDtype) {
  const auto good = serialize(testing::random_set(2, 3, 1));
  auto v2 = good;
  v2[4] = 2;
  EXPECT_EQ(parse_error(v2), InterchangeErrc::unsupported_version);
  auto f64 = good;
  f64[16] = 2;
  EXPECT_EQ(parse_error(f64), InterchangeErrc::unsupported_dtype);
  auto pad = good;
  pad[18] = 1;
  EXPECT_EQ(parse_error(pad), InterchangeErrc::bad_header);
}

TEST(Emb1, RejectsTruncatedPayload) {
  auto bytes = serialize(testing::random_set(10, 4, 3));
  bytes.resize(20 + 9 * 4 * 4);
  EXPECT_EQ(parse_error(bytes), InterchangeErrc::truncated);
  EXPECT_EQ(parse_error(bytes.substr(0, 12)), InterchangeErrc::truncated);
}

TEST(Emb1, RejectsTrailingBytes) {
  auto bytes = serialize(testing::random_set(3, 4, 3));
  bytes.push_back('\0');
  EXPECT_EQ(parse_error(bytes), InterchangeErrc::trailing_data);
}

TEST(Emb1, RejectsNonFinitePayload) {
  auto set = testing::random_set(3, 4, 3);
  auto bytes = serialize(set);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + 20 + 5 * 4, &nan, 4);
  EXPECT_EQ(parse_error(bytes), InterchangeErrc::non_finite);

  set.data[2] = std::numeric_limits<float>::infinity();
  std::ostringstream out;
  try {
    write_embeddings(set, out);
    FAIL() << "writer accepted Inf";
  } catch (const InterchangeError& e) {
    EXPECT_EQ(e.code(), InterchangeErrc::non_finite);
  }
}

TEST(Emb1, RejectsOversizeDeclarationWithoutAllocating) {
  std::string bytes = "EMB1";
  bytes += std::string("\x01\x00\x00\x00", 4);
  bytes += std::string("\xff\xff\xff\xff", 4);
  bytes += std::string("\xff\xff\xff\xff", 4);
  bytes += std::string("\x01\x00\x00\x00", 4);
  EXPECT_EQ(parse_error(bytes), InterchangeErrc::oversize);

  // Large but under the cap: must fail on truncation, not try to allocate it all.
  std::string big = "EMB1";
  big += std::string("\x01\x00\x00\x00", 4);
  big += std::string("\x00\x00\x10\x00", 4);  // 1M rows
  big += std::string("\x00\x04\x00\x00", 4);  // dim 1024
  big += std::string("\x01\x00\x00\x00", 4);
  EXPECT_EQ(parse_error(big), InterchangeErrc::truncated);
}

TEST(Emb1, ZeroDimIsRejected) {
  EmbeddingSet set;
  std::ostringstream out;
  EXPECT_THROW(write_embeddings(set, out), InterchangeError);
}

// Property: any single-byte change of the header is rejected.
TEST(Emb1, EverySingleByteHeaderCorruptionIsRejected) {
  std::mt19937 rng(42);
  for (const auto& [count, dim] : {std::pair{1u, 1u}, std::pair{2u, 3u}, std::pair{7u, 5u}, std::pair{3u, 256u}}) {
    const auto bytes = serialize(testing::random_set(count, dim, count * 31 + dim));
    for (std::size_t pos = 0; pos < kEmb1HeaderSize; ++pos) {
      for (int trial = 0; trial < 8; ++trial) {
        auto bad = bytes;
        const auto delta = static_cast<char>(1 + rng() % 255);
        bad[pos] = static_cast<char>(bad[pos] ^ delta);
        EXPECT_THROW(parse(bad), InterchangeError) << "byte " << pos << " count " << count << " dim " << dim;
      }
    }
  }
}

TEST(Labels, ParsesWellFormedTable) {
  std::istringstream in("row,image_id,label\n0,P1_L_CC,2\n1,P1_L_MLO,2\n");
  const auto table = read_labels(in);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.rows[0].image_id, "P1_L_CC");
  EXPECT_EQ(table.rows[1].image_id, "P1_L_MLO");
  EXPECT_EQ(table.label(0), 2);
  EXPECT_EQ(table.label(1), 2);
  EXPECT_EQ(table.class_size(2), 2u);
}

TEST(Labels, RoundTrip) {
  std::istringstream in("row,image_id,label\n0,a,1\n1,b,6\n2,c,4");
  const auto table = read_labels(in);
  std::ostringstream out;
  write_labels(table, out);
  EXPECT_EQ(out.str(), "row,image_id,label\n0,a,1\n1,b,6\n2,c,4\n");
}

InterchangeErrc label_error(const std::string& text) {
  std::istringstream in(text);
  try {
    read_labels(in);
  } catch (const InterchangeError& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected rejection of: " << text;
  return InterchangeErrc::io_failure;
}

TEST(Labels, RejectsOutOfRangeLabel) {
  EXPECT_EQ(label_error("row,image_id,label\n0,a,0\n"), InterchangeErrc::bad_label);
  EXPECT_EQ(label_error("row,image_id,label\n0,a,7\n"), InterchangeErrc::bad_label);
}

TEST(Labels, RejectsNonIntegerLabel) {
  EXPECT_EQ(label_error("row,image_id,label\n0,a,2.5\n"), InterchangeErrc::bad_label);
  EXPECT_EQ(label_error("row,image_id,label\n0,a,x\n"), InterchangeErrc::bad_label);
}

TEST(Labels, RejectsGapsAndDuplicates) {
  EXPECT_EQ(label_error("row,image_id,label\n0,a,1\n2,b,1\n"), InterchangeErrc::bad_row_index);
  EXPECT_EQ(label_error("row,image_id,label\n0,a,1\n0,b,1\n"), InterchangeErrc::bad_row_index);
  EXPECT_EQ(label_error("row,image_id,label\n1,a,1\n"), InterchangeErrc::bad_row_index);
}

TEST(Labels, RejectsWrongHeaderAndShape) {
  EXPECT_EQ(label_error("id,label\n0,1\n"), InterchangeErrc::bad_csv);
  EXPECT_EQ(label_error("row,image_id,label\n0,a\n"), InterchangeErrc::bad_csv);
  EXPECT_EQ(label_error("row,image_id,label\r\n0,a,1\r\n"), InterchangeErrc::bad_csv);
}

TEST(Alignment, ComparesCounts) {
  LabelTable labels;
  for (std::uint32_t i = 0; i < 2006; ++i) labels.rows.push_back({i, "img" + std::to_string(i), 1 + int(i % 6)});
  EmbeddingSet set;
  set.count = 2006;
  set.dim = 1;
  EXPECT_TRUE(validate_alignment(set, labels).ok);

  labels.rows.resize(1003);
  const auto report = validate_alignment(set, labels);
  EXPECT_FALSE(report.ok);
  EXPECT_EQ(report.embedding_count, 2006u);
  EXPECT_EQ(report.label_count, 1003u);
  EXPECT_NE(report.message().find("2006"), std::string::npos);
  EXPECT_NE(report.message().find("1003"), std::string::npos);

  EXPECT_TRUE(validate_alignment(EmbeddingSet{}, LabelTable{}).ok);
}

TEST(EmbeddingCsv, ParsesRowsAndRejectsRagged) {
  std::istringstream in("# comment\n1,2,3\n4, 5 ,6\n");
  const auto set = read_embeddings_csv(in);
  EXPECT_EQ(set.count, 2u);
  EXPECT_EQ(set.dim, 3u);
  EXPECT_EQ(set.data, (std::vector<float>{1, 2, 3, 4, 5, 6}));

  std::istringstream ragged("1,2,3\n4,5\n");
  EXPECT_THROW(read_embeddings_csv(ragged), InterchangeError);
  std::istringstream junk("1,abc\n");
  EXPECT_THROW(read_embeddings_csv(junk), InterchangeError);
}

}  // namespace
}  // namespace cbir
