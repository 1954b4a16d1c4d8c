#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "leaflite/random.hpp"
#include "leaflite/weights.hpp"
#include "test_support.hpp"

namespace leaflite {
namespace {

using Bytes = std::vector<std::uint8_t>;

void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Hand-assembled container for one tensor.
Bytes assemble(const std::string& name, std::vector<std::uint32_t> dims, const std::vector<float>& values,
               std::uint8_t dtype = 0, std::uint32_t version = 1) {
  Bytes body;
  put_u32(body, version);
  put_u32(body, 1);
  body.push_back(static_cast<std::uint8_t>(name.size()));
  body.push_back(static_cast<std::uint8_t>(name.size() >> 8));
  body.insert(body.end(), name.begin(), name.end());
  body.push_back(dtype);
  body.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u32(body, d);
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(body, bits);
  }
  Bytes out{'L', 'W', 'T', 'S'};
  out.insert(out.end(), body.begin(), body.end());
  put_u32(out, crc32(body));
  return out;
}

WeightErrorCode code_of(const Bytes& b) {
  try {
    parse_weights(b);
  } catch (const WeightFormatError& e) {
    return e.code();
  }
  ADD_FAILURE() << "parsed without error";
  return WeightErrorCode::kBadMagic;
}

TEST(Crc32, KnownCheckValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
            0xCBF43926u);
}

TEST(Lwts, SerializationMatchesHandLayout) {
  WeightStore w;
  w.set("a/kernel", Tensor(Shape{2, 3}, std::vector<float>{1, -2, 3.5f, 0, 1e-3f, 7}));
  const Bytes want = assemble("a/kernel", {2, 3}, {1, -2, 3.5f, 0, 1e-3f, 7});
  EXPECT_EQ(serialize_weights(w), want);
  const WeightStore back = parse_weights(want);
  EXPECT_EQ(back.get("a/kernel"), w.get("a/kernel"));
}

TEST(Lwts, RoundTripThroughFileKeepsBits) {
  testing::TempDir dir("lwts");
  WeightStore w;
  RandomStream rng(1);
  for (int k = 0; k < 5; ++k) {
    Tensor t(Shape{k + 1, 3, 2, 1});
    for (float& v : t.data()) v = static_cast<float>(rng.normal(0, 10));
    w.set("t" + std::to_string(k), t);
  }
  w.set("depthwise", Tensor(Shape{3, 3, 4}, -0.0f));
  save_weights(dir / "w.lwts", w);
  const WeightStore back = load_weights(dir / "w.lwts");
  EXPECT_EQ(back.names(), w.names());
  EXPECT_EQ(serialize_weights(back), serialize_weights(w));
  EXPECT_TRUE(std::signbit(back.get("depthwise")[0]));
}

TEST(Lwts, DistinctErrorCodes) {
  const Bytes good = assemble("x", {2}, {1, 2});
  EXPECT_EQ(code_of({}), WeightErrorCode::kBadMagic);
  Bytes magic = good;
  magic[0] = 'X';
  EXPECT_EQ(code_of(magic), WeightErrorCode::kBadMagic);
  EXPECT_EQ(code_of(assemble("x", {2}, {1, 2}, 0, 2)), WeightErrorCode::kBadVersion);
  EXPECT_EQ(code_of(Bytes(good.begin(), good.begin() + 6)), WeightErrorCode::kTruncated);
  EXPECT_EQ(code_of(Bytes(good.begin(), good.end() - 9)), WeightErrorCode::kTruncated);
  Bytes flipped = good;
  flipped.back() ^= 0x01;
  EXPECT_EQ(code_of(flipped), WeightErrorCode::kChecksumMismatch);
  Bytes payload = good;
  payload[payload.size() - 6] ^= 0x40;
  EXPECT_EQ(code_of(payload), WeightErrorCode::kChecksumMismatch);
  EXPECT_EQ(code_of(assemble("x", {2}, {1, 2}, 7)), WeightErrorCode::kBadDtype);
  EXPECT_EQ(code_of(assemble("x", {}, {})), WeightErrorCode::kBadRank);
  EXPECT_EQ(code_of(assemble("x", {1}, {std::numeric_limits<float>::quiet_NaN()})),
            WeightErrorCode::kNonFinite);
}

TEST(Lwts, DuplicateNamesRejected) {
  Bytes body;
  put_u32(body, 1);
  put_u32(body, 2);
  for (int k = 0; k < 2; ++k) {
    body.insert(body.end(), {1, 0, 'd', 0, 1});
    put_u32(body, 1);
    put_u32(body, 0);
  }
  Bytes b{'L', 'W', 'T', 'S'};
  b.insert(b.end(), body.begin(), body.end());
  put_u32(b, crc32(body));
  EXPECT_EQ(code_of(b), WeightErrorCode::kDuplicateName);
}

TEST(Lwts, MissingFileIsIoAndErrorsAreFormatKind) {
  testing::TempDir dir("io");
  EXPECT_THROW(load_weights(dir / "absent.lwts"), IoError);
  testing::write_file(dir / "empty.lwts", "");
  try {
    load_weights(dir / "empty.lwts");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
}

TEST(WeightStore, RequireListsEveryMissingName) {
  WeightStore w;
  w.set("a", Tensor(Shape{1}));
  try {
    w.require({"a", "b", "c"});
    FAIL();
  } catch (const WeightFormatError& e) {
    EXPECT_EQ(e.code(), WeightErrorCode::kMissingNames);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b"), std::string::npos);
    EXPECT_NE(msg.find("c"), std::string::npos);
  }
  try {
    w.require_only({"z"});
    FAIL();
  } catch (const WeightFormatError& e) {
    EXPECT_EQ(e.code(), WeightErrorCode::kUnexpectedNames);
  }
}

TEST(Lwts, ReadsPythonWrittenFixture) {
  const WeightStore w = load_weights(LEAFLITE_FIXTURE_DIR "/golden_features.lwts");
  EXPECT_EQ(w.size(), 10u);
  EXPECT_EQ(w.get("feature_0").shape(), (Shape{1, 1280}));
  EXPECT_EQ(w.get("input_4").shape(), (Shape{1, 256, 256, 3}));
}

}  // namespace
}  // namespace leaflite
