#include <gtest/gtest.h>

#include <random>

#include "shadowcomp/metrics.hpp"

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
  Mask m(h, w, 0);
  for (auto& v : m.values()) v = rng() % 3 == 0;
  m(h / 2, w / 2) = 1;
  return m;
}

double rmse_oracle(const Image& a, const Image& b, const Mask* m) {
  long double s = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < a.height(); ++r)
    for (std::size_t c = 0; c < a.width(); ++c) {
      if (m && !(*m)(r, c)) continue;
      for (std::size_t k = 0; k < 3; ++k) {
        const long double d = 255.0L * (a(r, c, k) - b(r, c, k));
        s += d * d;
        ++n;
      }
    }
  return static_cast<double>(std::sqrt(s / n));
}

// Direct 11x11 windowed statistics per pixel; pixels outside the image count
// as zeros with their full Gaussian weight.
double ssim_oracle_at(const Image& a, const Image& b, long r, long c) {
  const double sigma = 1.5, c1 = 0.0001, c2 = 0.0009;
  double w2[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += w2[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
  double s = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    auto px = [&](const Image& img, long y, long x) {
      if (y < 0 || x < 0 || y >= static_cast<long>(img.height()) || x >= static_cast<long>(img.width())) return 0.0;
      return img(y, x, k);
    };
    double mx = 0, my = 0;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        mx += w2[i][j] / total * px(a, r + i - 5, c + j - 5);
        my += w2[i][j] / total * px(b, r + i - 5, c + j - 5);
      }
    double vx = 0, vy = 0, cov = 0;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        const double dx = px(a, r + i - 5, c + j - 5) - mx, dy = px(b, r + i - 5, c + j - 5) - my;
        vx += w2[i][j] / total * dx * dx;
        vy += w2[i][j] / total * dy * dy;
        cov += w2[i][j] / total * dx * dy;
      }
    s += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return s / 3;
}

double ssim_oracle(const Image& a, const Image& b, const Mask* m) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < a.height(); ++r)
    for (std::size_t c = 0; c < a.width(); ++c) {
      if (m && !(*m)(r, c)) continue;
      s += ssim_oracle_at(a, b, static_cast<long>(r), static_cast<long>(c));
      ++n;
    }
  return s / n;
}

}  // namespace

TEST(Rmse, MatchesOracle) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Image a = random_image(16, 16, 2 * s), b = random_image(16, 16, 2 * s + 1);
    const Mask m = random_mask(16, 16, s);
    EXPECT_NEAR(rmse(a, b), rmse_oracle(a, b, nullptr), 1e-9);
    EXPECT_NEAR(rmse(a, b, &m), rmse_oracle(a, b, &m), 1e-9);
  }
}

TEST(Rmse, HandValues) {
  Image a(2, 2, 0.0), b(2, 2, 0.0);
  b(0, 0, 0) = 1.0;  // one element off by 255 out of 12
  EXPECT_NEAR(rmse(a, b), 255.0 / std::sqrt(12.0), 1e-12);
  EXPECT_EQ(rmse(a, a), 0.0);
}

TEST(Rmse, Errors) {
  EXPECT_THROW(rmse(Image(2, 2), Image(2, 3)), DimensionMismatch);
  const Mask empty(2, 2, 0);
  EXPECT_THROW(rmse(Image(2, 2), Image(2, 2), &empty), InvalidArgument);
}

TEST(Ssim, MatchesOracle) {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Image a = random_image(16, 16, 10 + s);
    Image b = a;
    std::mt19937_64 rng(s);
    for (double& v : b.values()) v = std::clamp(v + (static_cast<double>(rng() % 1000) / 1000.0 - 0.5) * 0.4, 0.0, 1.0);
    const Mask m = random_mask(16, 16, 20 + s);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b, nullptr), 1e-9);
    EXPECT_NEAR(ssim(a, b, &m), ssim_oracle(a, b, &m), 1e-9);
  }
}

TEST(Ssim, ConstantImagesInteriorValue) {
  const Image a(21, 21, 0.0), b(21, 21, 1.0);
  const ShadowMatte map = ssim_map(a, b);
  const double c1 = 1e-4;
  // Inside the image the window sees only constants: means 0 and 1, variances 0.
  EXPECT_NEAR(map(10, 10), c1 / (1 + c1), 1e-12);
}

TEST(Ssim, IdenticalIsOne) {
  const Image a = random_image(16, 16, 3);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  for (const auto& out = ssim_map(a, a); double v : out.values()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Ssim, Errors) {
  EXPECT_THROW(ssim(Image(10, 16), Image(10, 16)), InvalidArgument);
  EXPECT_THROW(ssim(Image(16, 16), Image(16, 17)), DimensionMismatch);
  const Mask empty(16, 16, 0);
  EXPECT_THROW(ssim(Image(16, 16), Image(16, 16), &empty), InvalidArgument);
}

TEST(EvaluatePair, IdenticalGivesZerosAndOnes) {
  const Image a = random_image(16, 16, 4);
  const MetricReport r = evaluate_pair(a, a, random_mask(16, 16, 1));
  EXPECT_EQ(r.grmse, 0.0);
  EXPECT_EQ(*r.lrmse, 0.0);
  EXPECT_NEAR(r.gssim, 1.0, 1e-12);
  EXPECT_NEAR(*r.lssim, 1.0, 1e-12);
}

TEST(EvaluatePair, EmptyMaskLeavesLocalUndefined) {
  const Image a = random_image(16, 16, 4), b = random_image(16, 16, 5);
  const MetricReport r = evaluate_pair(a, b, Mask(16, 16, 0));
  EXPECT_FALSE(r.lrmse.has_value());
  EXPECT_FALSE(r.lssim.has_value());
  EXPECT_EQ(r.n_pixels_local, 0u);
  EXPECT_TRUE(to_json(r)["lrmse"].is_null());
}

TEST(EvaluatePair, LocalTermsIgnoreDistantPerturbations) {
  const Image target = random_image(40, 40, 6);
  const Image gen = random_image(40, 40, 7);
  Mask m(40, 40, 0);
  for (std::size_t r = 17; r < 23; ++r)
    for (std::size_t c = 17; c < 23; ++c) m(r, c) = 1;
  const MetricReport base = evaluate_pair(gen, target, m);
  Image perturbed = gen;
  std::mt19937_64 rng(1);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 40; ++c) {
      const bool near = r + 6 > 17 && r < 23 + 5 && c + 6 > 17 && c < 23 + 5;  // Chebyshev distance <= 5
      if (near) continue;
      for (std::size_t k = 0; k < 3; ++k) perturbed(r, c, k) = static_cast<double>(rng() % 256) / 255.0;
    }
  const MetricReport after = evaluate_pair(perturbed, target, m);
  EXPECT_EQ(*after.lrmse, *base.lrmse);
  EXPECT_EQ(*after.lssim, *base.lssim);
  EXPECT_NE(after.grmse, base.grmse);
}

TEST(Aggregate, MeansAndEmpty) {
  EXPECT_FALSE(aggregate({}).has_value());
  MetricReport a{1.0, 10.0, 0.9, 0.5, 4}, b{3.0, std::nullopt, 0.7, std::nullopt, 0};
  const std::vector<MetricReport> rs{a, b};
  const auto m = aggregate(rs);
  ASSERT_TRUE(m.has_value());
  EXPECT_DOUBLE_EQ(m->grmse, 2.0);
  EXPECT_DOUBLE_EQ(m->gssim, 0.8);
  EXPECT_DOUBLE_EQ(*m->lrmse, 10.0);
  EXPECT_DOUBLE_EQ(*m->lssim, 0.5);
  EXPECT_TRUE(to_json(std::optional<MetricReport>{}).is_null());
}

TEST(RatioBins, DefaultEdgesAndBoundaries) {
  const auto& e = default_ratio_edges();
  EXPECT_EQ(e, (std::vector<double>{0.0, 0.02, 0.04, 0.08, 1.0}));
  EXPECT_EQ(ratio_bin_index(0.01, e), 0u);
  EXPECT_EQ(ratio_bin_index(0.02, e), 0u);
  EXPECT_EQ(ratio_bin_index(1311.0 / 65536.0, e), 1u);
  EXPECT_EQ(ratio_bin_index(0.04, e), 1u);
  EXPECT_EQ(ratio_bin_index(0.05, e), 2u);
  EXPECT_EQ(ratio_bin_index(0.08, e), 2u);
  EXPECT_EQ(ratio_bin_index(0.5, e), 3u);
  EXPECT_EQ(ratio_bin_index(1.0, e), 3u);
  EXPECT_THROW(ratio_bin_index(0.0, e), InvalidArgument);
  EXPECT_THROW(ratio_bin_index(1.5, e), InvalidArgument);
  const std::vector<double> bad{0.0, 0.5, 0.5};
  EXPECT_THROW(validate_ratio_edges(bad), InvalidArgument);
}

TEST(RatioBins, GroupsReports) {
  std::vector<RatedReport> rs{{0.01, {1.0, 2.0, 0.9, 0.8, 1}}, {0.03, {3.0, 4.0, 0.7, 0.6, 1}},
                              {0.015, {5.0, 6.0, 0.5, 0.4, 1}}};
  const RatioBins bins = bin_by_shadow_ratio(rs);
  EXPECT_EQ(bins.counts, (std::vector<std::size_t>{2, 1, 0, 0}));
  EXPECT_DOUBLE_EQ(bins.per_bin_reports[0]->grmse, 3.0);
  EXPECT_FALSE(bins.per_bin_reports[2].has_value());
  const auto j = to_json(bins);
  EXPECT_EQ(j.size(), 4u);
  EXPECT_TRUE(j[3]["report"].is_null());
}
