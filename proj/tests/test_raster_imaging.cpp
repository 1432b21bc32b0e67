#include <gtest/gtest.h>

#include <random>

#include "shadowcomp/imaging.hpp"
#include "shadowcomp/raster.hpp"

using namespace shadowcomp;

namespace {

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w);
  for (double& v : img.values()) v = u(rng);
  return img;
}

Mask random_mask(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Mask m(h, w);
  for (auto& v : m.values()) v = rng() % 2;
  return m;
}

// Independent bilinear evaluation at one output coordinate.
double bilinear_oracle(const ShadowMatte& src, std::size_t out_h, std::size_t out_w, std::size_t r, std::size_t c) {
  auto coord = [](std::size_t i, std::size_t in, std::size_t out) {
    double s = (i + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::min(std::max(s, 0.0), static_cast<double>(in - 1));
  };
  const double y = coord(r, src.height(), out_h), x = coord(c, src.width(), out_w);
  const auto y0 = static_cast<std::size_t>(y), x0 = static_cast<std::size_t>(x);
  const std::size_t y1 = std::min(y0 + 1, src.height() - 1), x1 = std::min(x0 + 1, src.width() - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x1)) + fy * ((1 - fx) * src(y1, x0) + fx * src(y1, x1));
}

}  // namespace

TEST(Raster, ZeroDimensionThrows) {
  EXPECT_THROW(Image(0, 4), InvalidArgument);
  EXPECT_THROW(Mask(3, 0), InvalidArgument);
}

TEST(Raster, LayoutIsRowMajorInterleaved) {
  Image img(2, 3, 0.0);
  img(1, 2, 1) = 0.5;
  EXPECT_EQ(img.values()[(1 * 3 + 2) * 3 + 1], 0.5);
  EXPECT_EQ(img.at_pixel(5, 1), 0.5);
}

TEST(Raster, ShapeCheck) {
  EXPECT_THROW(require_same_shape(Image(2, 2), Mask(2, 3), "t"), DimensionMismatch);
  EXPECT_NO_THROW(require_same_shape(Image(2, 2), Mask(2, 2), "t"));
}

TEST(Resize, IdentitySizeIsExactCopy) {
  const Image img = random_image(256, 256, 1);
  EXPECT_EQ(resize_bilinear(img, 256, 256), img);
  const Mask m = random_mask(17, 9, 2);
  EXPECT_EQ(resize_mask(m, 17, 9), m);
}

TEST(Resize, ConstantStaysConstant) {
  const Image img(5, 7, 0.7);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 11}, {20, 4}}) {
    for (const auto& out = resize_bilinear(img, h, w); double v : out.values()) EXPECT_NEAR(v, 0.7, 1e-15);
  }
}

TEST(Resize, ColumnUpscaleHandEvaluated) {
  // Source rows sample at y = (i + 0.5) / 2 - 0.5: -0.25 -> 0, 0.25, 0.75, 1.25 -> 1.
  ShadowMatte col(2, 1);
  col(0, 0) = 0.0;
  col(1, 0) = 1.0;
  const ShadowMatte out = resize_bilinear(col, 4, 1);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out(1, 0), 0.25);
  EXPECT_DOUBLE_EQ(out(2, 0), 0.75);
  EXPECT_DOUBLE_EQ(out(3, 0), 1.0);
}

TEST(Resize, MatchesIndependentBilinear) {
  const Image img = random_image(7, 5, 3);
  const Image out = resize_bilinear(img, 12, 9);
  for (std::size_t k = 0; k < 3; ++k) {
    ShadowMatte ch(7, 5);
    for (std::size_t i = 0; i < ch.pixel_count(); ++i) ch.at_pixel(i) = img.at_pixel(i, k);
    for (std::size_t r = 0; r < 12; ++r)
      for (std::size_t c = 0; c < 9; ++c) EXPECT_NEAR(out(r, c, k), bilinear_oracle(ch, 12, 9, r, c), 1e-14);
  }
}

TEST(Resize, OutputStaysInUnitRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image img = random_image(3 + seed % 5, 4 + seed % 3, seed);
    EXPECT_TRUE(in_unit_range(resize_bilinear(img, 2 + seed, 9)));
  }
}

TEST(Resize, ZeroTargetThrows) {
  EXPECT_THROW(resize_bilinear(Image(2, 2), 0, 3), InvalidArgument);
  EXPECT_THROW(resize_mask(Mask(2, 2), 3, 0), InvalidArgument);
}

TEST(ResizeMask, AllOnesStaysAllOnes) {
  const Mask m(3, 5, 1);
  const Mask out = resize_mask(m, 11, 2);
  EXPECT_EQ(count_set(out), out.pixel_count());
}

TEST(ResizeMask, SinglePixelUpscaleThresholdsBilinearField) {
  Mask m(2, 2, 0);
  m(0, 0) = 1;
  const Mask out = resize_mask(m, 4, 4);
  // Per-axis weight of source index 0 at outputs 0..3: 1, 0.75, 0.25, 0.
  const double wt[4] = {1.0, 0.75, 0.25, 0.0};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(out(r, c), wt[r] * wt[c] >= 0.5 ? 1 : 0) << r << "," << c;
  EXPECT_EQ(count_set(out), 4u);
}

TEST(MaskUnion, Basics) {
  Mask a(3, 3, 0), b(3, 3, 0);
  a(0, 0) = 1;
  b(2, 2) = 1;
  const Mask u = mask_union({a, b});
  EXPECT_EQ(u(0, 0), 1);
  EXPECT_EQ(u(2, 2), 1);
  EXPECT_EQ(count_set(u), 2u);
  EXPECT_EQ(mask_union({a, a}), a);
  EXPECT_EQ(count_set(mask_union({a, complement(a)})), 9u);
}

TEST(MaskUnion, Errors) {
  EXPECT_THROW(mask_union(std::span<const Mask>{}), InvalidArgument);
  EXPECT_THROW(mask_union({Mask(2, 2), Mask(2, 3)}), DimensionMismatch);
}

TEST(MaskUnion, AlgebraicLaws) {
  for (std::uint64_t s = 0; s < 25; ++s) {
    const Mask a = random_mask(6, 5, 3 * s), b = random_mask(6, 5, 3 * s + 1), c = random_mask(6, 5, 3 * s + 2);
    EXPECT_EQ(mask_union({a, b}), mask_union({b, a}));
    EXPECT_EQ(mask_union({mask_union({a, b}), c}), mask_union({a, mask_union({b, c})}));
    EXPECT_EQ(mask_union({a, a}), a);
  }
}

TEST(MaskAreaRatio, Values) {
  EXPECT_EQ(mask_area_ratio(Mask(4, 4, 0)), 0.0);
  EXPECT_EQ(mask_area_ratio(Mask(4, 4, 1)), 1.0);
  Mask m(256, 256, 0);
  for (std::size_t i = 0; i < 1311; ++i) m.at_pixel(i * 37 % 65536) = 1;
  ASSERT_EQ(count_set(m), 1311u);
  EXPECT_DOUBLE_EQ(mask_area_ratio(m), 1311.0 / 65536.0);
  EXPECT_GT(mask_area_ratio(m), 0.02);
  EXPECT_LE(mask_area_ratio(m), 0.04);
}

TEST(MaskAreaRatio, AdditiveOverDisjointMasks) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Mask a = random_mask(8, 8, s);
    Mask b = random_mask(8, 8, s + 100);
    for (std::size_t i = 0; i < b.size(); ++i) b.values()[i] &= static_cast<std::uint8_t>(!a.values()[i]);
    const double r = mask_area_ratio(mask_union({a, b}));
    EXPECT_NEAR(r, mask_area_ratio(a) + mask_area_ratio(b), 1e-15);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
}
