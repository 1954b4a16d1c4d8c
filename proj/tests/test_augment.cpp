#include <gtest/gtest.h>

#include <cmath>

#include "leaflite/augment.hpp"

namespace leaflite {
namespace {

Image numbered(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(10 * y + x + 50 * c);
  return img;
}

Image flat(int w, int h, std::uint8_t v) { return Image(w, h, v); }

TEST(Shift, ZeroIsIdentity) {
  const Image img = numbered(7, 5);
  EXPECT_EQ(shift(img, 0.0, 0.0), img);
}

TEST(Shift, QuarterOfFourByFourMovesOnePixel) {
  const Image img = numbered(4, 4);
  const Image out = shift(img, 0.25, 0.0);
  for (int y = 0; y < 4; ++y) {
    // The vacated column repeats the old edge column.
    EXPECT_EQ(out.at(0, y, 0), img.at(0, y, 0));
    for (int x = 1; x < 4; ++x) EXPECT_EQ(out.at(x, y, 0), img.at(x - 1, y, 0));
  }
  const Image down = shift(img, 0.0, 0.25);
  for (int x = 0; x < 4; ++x) {
    EXPECT_EQ(down.at(x, 0, 1), img.at(x, 0, 1));
    for (int y = 1; y < 4; ++y) EXPECT_EQ(down.at(x, y, 1), img.at(x, y - 1, 1));
  }
}

TEST(Rotate, ZeroIsIdentityAndConstantsSurvive) {
  const Image img = numbered(9, 6);
  EXPECT_EQ(rotate(img, 0.0), img);
  const Image c = flat(20, 13, 173);
  for (double deg : {-20.0, 7.5, 90.0, 180.0}) EXPECT_EQ(rotate(c, deg), c);
}

TEST(Rotate, QuarterTurnIsCounterClockwise) {
  Image img = flat(5, 5, 0);
  img.at(4, 0, 0) = 255;  // top-right
  const Image out = rotate(img, 90.0);
  EXPECT_GE(out.at(0, 0, 0), 254);  // now top-left
  EXPECT_LE(out.at(4, 0, 0), 1);
}

TEST(Shear, ZeroIsIdentityAndConstantsSurvive) {
  const Image img = numbered(8, 8);
  EXPECT_EQ(shear(img, 0.0), img);
  const Image c = flat(15, 9, 42);
  EXPECT_EQ(shear(c, 0.2), c);
  EXPECT_EQ(shear(c, -0.2), c);
}

TEST(Shear, BottomRowIsAnchored) {
  const Image img = numbered(8, 8);
  const Image out = shear(img, 0.2);
  for (int x = 0; x < 8; ++x) EXPECT_EQ(out.at(x, 7, 0), img.at(x, 7, 0));
  // Row 2 sits 5 rows above the bottom: offset exactly 1 pixel.
  for (int x = 1; x < 8; ++x) EXPECT_EQ(out.at(x, 2, 0), img.at(x - 1, 2, 0));
}

TEST(Hflip, Examples) {
  Image ab(2, 1);
  ab.at(0, 0, 0) = 1;
  ab.at(1, 0, 0) = 2;
  const Image ba = hflip(ab);
  EXPECT_EQ(ba.at(0, 0, 0), 2);
  EXPECT_EQ(ba.at(1, 0, 0), 1);
  const Image img = numbered(6, 3);
  EXPECT_EQ(hflip(hflip(img)), img);
}

TEST(RandomAugment, ProbabilityZeroIsIdentity) {
  const Image img = numbered(10, 10);
  RandomStream s(1);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(random_augment(img, AugmentConfig::disabled(), s), img);
}

TEST(RandomAugment, SameStreamStateSameOutput) {
  const Image img = numbered(16, 12);
  RandomStream a(99), b(99);
  const AugmentConfig cfg;
  for (int i = 0; i < 10; ++i) EXPECT_EQ(random_augment(img, cfg, a), random_augment(img, cfg, b));
}

TEST(RandomAugment, FrequenciesAndRanges) {
  AugmentConfig cfg;
  RandomStream s(7);
  const int n = 4000;
  int shifted = 0, rotated = 0, sheared = 0, flipped = 0;
  bool neg_dx = false, pos_dx = false, neg_deg = false, pos_deg = false;
  for (int i = 0; i < n; ++i) {
    const AugmentDraw d = draw_augment(cfg, s);
    shifted += d.shifted;
    rotated += d.rotated;
    sheared += d.sheared;
    flipped += d.flipped;
    EXPECT_LE(std::fabs(d.dx), 0.2);
    EXPECT_LE(std::fabs(d.dy), 0.2);
    EXPECT_LE(std::fabs(d.degrees), 20.0);
    EXPECT_LE(std::fabs(d.shear), 0.2);
    neg_dx |= d.dx < -0.1;
    pos_dx |= d.dx > 0.1;
    neg_deg |= d.degrees < -10;
    pos_deg |= d.degrees > 10;
  }
  // 4000 fair coins: 3.5 sigma is about 0.028.
  for (int k : {shifted, rotated, sheared, flipped}) EXPECT_NEAR(k / double(n), 0.5, 0.03);
  EXPECT_TRUE(neg_dx && pos_dx && neg_deg && pos_deg);
}

TEST(RandomAugment, FixedOrderShiftRotateShearFlip) {
  const Image img = numbered(24, 24);
  AugmentDraw d;
  d.shifted = d.rotated = d.sheared = d.flipped = true;
  d.dx = 0.125;
  d.dy = -0.0833;
  d.degrees = 12;
  d.shear = 0.1;
  const Image want = hflip(shear(rotate(shift(img, d.dx, d.dy), d.degrees), d.shear));
  EXPECT_EQ(apply_augment(img, d), want);
}

TEST(AugmentConfig, ValidatesRanges) {
  AugmentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.per_transform_probability = 1.5;
  EXPECT_THROW(c.validate(), UsageError);
  c = AugmentConfig{};
  c.rotation_range = -1;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_FALSE(AugmentConfig::disabled().active());
}

}  // namespace
}  // namespace leaflite
