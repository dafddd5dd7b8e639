#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "histocell/errors.hpp"
#include "histocell/patchprep.hpp"

using namespace histocell;
using testing_support::TempDir;

TEST(PatchBBox, CenteredAndClamped) {
  EXPECT_EQ(patch_bbox(112, 112, 224, 1000, 1000), (PatchBBox{0, 0, 224}));
  EXPECT_EQ(patch_bbox(500, 500, 224, 1000, 1000), (PatchBBox{388, 388, 224}));
  EXPECT_EQ(patch_bbox(10, 10, 224, 1000, 1000), (PatchBBox{0, 0, 224}));
  EXPECT_EQ(patch_bbox(995, 3, 224, 1000, 1000), (PatchBBox{776, 0, 224}));
}

TEST(PatchBBox, ImageSmallerThanPatch) {
  EXPECT_THROW(patch_bbox(50, 50, 224, 100, 1000), Error);
}

TEST(PatchBBox, AlwaysInsideForRandomCenters) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const int w = 224 + static_cast<int>(rng() % 800);
    const int h = 224 + static_cast<int>(rng() % 800);
    const double cx = std::uniform_real_distribution<double>(0, w - 1)(rng);
    const double cy = std::uniform_real_distribution<double>(0, h - 1)(rng);
    const auto b = patch_bbox(cx, cy, 224, w, h);
    EXPECT_GE(b.x0, 0);
    EXPECT_GE(b.y0, 0);
    EXPECT_LE(b.x0 + b.size, w);
    EXPECT_LE(b.y0 + b.size, h);
  }
}

TEST(BackgroundFraction, Examples) {
  EXPECT_EQ(background_fraction(PatchRaster(4, 4, {255, 255, 255}), 220), 1.0);
  EXPECT_EQ(background_fraction(PatchRaster(4, 4, {0, 0, 0}), 220), 0.0);
  PatchRaster half(4, 4, {0, 0, 0});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) half.at(x, y) = {255, 255, 255};
  EXPECT_EQ(background_fraction(half, 220), 0.5);
}

TEST(BackgroundFraction, AllChannelsMustExceedThreshold) {
  EXPECT_EQ(background_fraction(PatchRaster(2, 2, {255, 255, 220}), 220), 0.0);
  EXPECT_EQ(background_fraction(PatchRaster(2, 2, {221, 221, 221}), 220), 1.0);
}

TEST(BackgroundFraction, InvariantUnderPixelPermutation) {
  std::mt19937_64 rng(9);
  PatchRaster p(16, 16);
  for (auto& px : p.pixels)
    for (auto& c : px) c = static_cast<std::uint8_t>(rng() % 256);
  const double before = background_fraction(p, 120);
  std::shuffle(p.pixels.begin(), p.pixels.end(), rng);
  EXPECT_EQ(background_fraction(p, 120), before);
}

TEST(Crop, CopiesWindow) {
  PatchRaster img(5, 5);
  img.at(3, 2) = {1, 2, 3};
  const auto c = crop(img, {2, 1, 3});
  EXPECT_EQ(c.width, 3);
  EXPECT_EQ(c.at(1, 1), (Rgb{1, 2, 3}));
}

namespace {
SpotTable two_spots() {
  SpotTable t;
  t.spot_ids = {"s1", "s2"};
  t.sample_ids = {"A", "A"};
  t.patient_ids = {"P", "P"};
  t.x = {0, 1};
  t.y = {0, 0};
  t.embeddings = Matrix::Identity(2, 2);
  return t;
}
}  // namespace

TEST(FilterSpots, Examples) {
  const auto t = two_spots();
  EXPECT_EQ(filter_spots(t, {{"s1", 0.0}, {"s2", 0.0}}, 0.8).spot_ids, t.spot_ids);
  EXPECT_EQ(filter_spots(t, {{"s1", 1.0}, {"s2", 1.0}}, 0.8).size(), 0u);
  const auto kept = filter_spots(t, {{"s1", 0.9}, {"s2", 0.1}}, 0.8);
  ASSERT_EQ(kept.spot_ids, std::vector<std::string>{"s2"});
  EXPECT_EQ(kept.embeddings(0, 1), 1.0);
}

TEST(FilterSpots, MissingFractionIsError) {
  EXPECT_THROW(filter_spots(two_spots(), {{"s1", 0.0}}, 0.8), Error);
}

TEST(Fractions, RoundTrip) {
  TempDir dir;
  const std::map<std::string, double> f{{"a", 0.125}, {"b", 1.0 / 3.0}};
  save_fractions(f, dir / "fractions.csv");
  EXPECT_EQ(load_fractions(dir / "fractions.csv"), f);
}

TEST(Png, WriteThenReadIsLossless) {
  TempDir dir;
  std::mt19937_64 rng(2);
  PatchRaster p(7, 5);
  for (auto& px : p.pixels)
    for (auto& c : px) c = static_cast<std::uint8_t>(rng() % 256);
  write_png(p, dir / "p.png");
  const auto q = read_png(dir / "p.png");
  EXPECT_EQ(q.width, 7);
  EXPECT_EQ(q.height, 5);
  EXPECT_EQ(q.pixels, p.pixels);
}

TEST(Png, MissingFileIsIoError) {
  EXPECT_THROW(read_png("/nonexistent.png"), IoError);
}
