#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "octbio/augment/augment.hpp"
#include "octbio/core/error.hpp"
#include "octbio/core/rng.hpp"

using namespace octbio;
using namespace octbio::augment;

namespace {

GrayImage random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = rng.uniform();
  return img;
}

AugmentRecipe no_randomness(int size) {
  auto r = build_recipe(Phase::PHASE1, size);
  r.grayscale_p = 0.0;
  r.jitter_p = 0.0;
  r.hflip_p = 0.0;
  return r;
}

}  // namespace

TEST(Recipe, DefaultConstants) {
  const auto p1 = build_recipe(Phase::PHASE1, 512);
  EXPECT_FALSE(p1.perspective.has_value());
  EXPECT_EQ(p1.crop_scale, (std::pair<double, double>{0.7, 1.0}));
  EXPECT_DOUBLE_EQ(p1.grayscale_p, 0.2);
  EXPECT_DOUBLE_EQ(p1.jitter_p, 0.8);
  EXPECT_DOUBLE_EQ(p1.norm_mean, 0.1706);
  EXPECT_DOUBLE_EQ(p1.norm_std, 0.2112);

  const auto p2 = build_recipe(Phase::PHASE2, 448);
  ASSERT_TRUE(p2.perspective.has_value());
  EXPECT_DOUBLE_EQ(p2.perspective->distortion_scale, 0.23);
  EXPECT_DOUBLE_EQ(p2.perspective->p, 1.0);
  EXPECT_EQ(p2.perspective->fill, 255);
  EXPECT_EQ(p2.crop_scale, p1.crop_scale);
  EXPECT_DOUBLE_EQ(p2.norm_mean, 0.1706);

  EXPECT_THROW(build_recipe(Phase::PHASE1, 16), ContractError);
}

TEST(ApplyTrain, ConstantMeanImageNormalisesToZero) {
  const GrayImage img(80, 70, 0.1706);
  const auto out = apply_train(no_randomness(64), img, {1, 0, "x"});
  ASSERT_EQ(out.tensor.channels, 3);
  ASSERT_EQ(out.tensor.height, 64);
  for (double v : out.tensor.data) ASSERT_NEAR(v, 0.0, 1e-6);
}

TEST(ApplyTrain, SameSeedIsBitIdentical) {
  const auto img = random_image(72, 64, 3);
  for (auto phase : {Phase::PHASE1, Phase::PHASE2}) {
    const auto recipe = build_recipe(phase, 48);
    for (int e = 0; e < 5; ++e) {
      const SampleSeed s{99, e, "img_" + std::to_string(e)};
      const auto a = apply_train(recipe, img, s);
      const auto b = apply_train(recipe, img, s);
      ASSERT_EQ(a.tensor.data, b.tensor.data);
      ASSERT_EQ(a.trace.outcome_vector(), b.trace.outcome_vector());
    }
  }
}

TEST(ApplyTrain, Phase2WarpsEverySample) {
  const auto recipe = build_recipe(Phase::PHASE2, 32);
  const GrayImage img(40, 40, 0.3);
  for (int i = 0; i < 200; ++i) {
    ASSERT_TRUE(apply_train(recipe, img, {5, 0, std::to_string(i)}).trace.perspective);
  }
}

TEST(ApplyTrain, MaximalDistortionExposesFillCorners) {
  auto recipe = build_recipe(Phase::PHASE2, 64);
  recipe.grayscale_p = recipe.jitter_p = recipe.hflip_p = 0.0;
  const GrayImage img(64, 64, 0.1706);
  const int dw = static_cast<int>(0.23 * 32);
  const double expected = (1.0 - 0.1706) / 0.2112;
  EXPECT_NEAR(expected, 3.9275, 1e-3);
  // Pick the sample whose corners moved furthest inward.
  auto displacement = [&](const Quad& q) {
    return q[0][0] + q[0][1] + (63 - q[1][0]) + q[1][1] + (63 - q[2][0]) + (63 - q[2][1]) + q[3][0] + (63 - q[3][1]);
  };
  std::string best_id;
  double best = -1;
  for (int i = 0; i < 3000; ++i) {
    const auto d = displacement(apply_train(recipe, img, {11, 0, std::to_string(i)}).trace.perspective_end);
    if (d > best) {
      best = d;
      best_id = std::to_string(i);
    }
  }
  EXPECT_GE(best, 6 * dw);
  const auto res = apply_train(recipe, img, {11, 0, best_id});
  const auto& q = res.trace.perspective_end;
  const int corners[4][2] = {{0, 0}, {63, 0}, {63, 63}, {0, 63}};
  int exposed = 0;
  for (int k = 0; k < 4; ++k) {
    if (q[k][0] == corners[k][0] || q[k][1] == corners[k][1]) continue;  // corner did not move on both axes
    ++exposed;
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(res.tensor.at(c, corners[k][1], corners[k][0]), expected, 1e-9);
  }
  EXPECT_GE(exposed, 3);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(res.tensor.at(c, 32, 32), 0.0, 1e-9);
}

TEST(ApplyTrain, OutcomeVectorsDifferAcrossImageIds) {
  const auto recipe = build_recipe(Phase::PHASE2, 32);
  const GrayImage img(32, 32, 0.5);
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 10000; ++i) {
    ASSERT_TRUE(seen.insert(apply_train(recipe, img, {7, 0, "fixture_" + std::to_string(i)}).trace.outcome_vector())
                    .second)
        << "collision at " << i;
  }
}

TEST(ApplyTrain, EpochChangesTheStream) {
  EXPECT_NE((SampleSeed{1, 0, "a"}.stream()), (SampleSeed{1, 1, "a"}.stream()));
  EXPECT_NE((SampleSeed{1, 0, "a"}.stream()), (SampleSeed{2, 0, "a"}.stream()));
}

TEST(Normalize, Invertible) {
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    ASSERT_NEAR(denormalize(normalize(x, 0.1706, 0.2112), 0.1706, 0.2112), x, 1e-6);
  }
  EXPECT_NEAR(normalize(0.1706, 0.1706, 0.2112), 0.0, 1e-12);
}

TEST(ApplyEval, ShapesConstantsAndPurity) {
  const GrayImage flat(64, 64, 0.1706);
  for (double v : apply_eval(64, flat, 0.1706, 0.2112).data) ASSERT_NEAR(v, 0.0, 1e-12);

  const auto big = random_image(128, 128, 4);
  const auto before = Rng::thread_draws();
  const auto a = apply_eval(64, big, 0.1706, 0.2112);
  const auto b = apply_eval(64, big, 0.1706, 0.2112);
  EXPECT_EQ(Rng::thread_draws(), before);
  EXPECT_EQ(a.channels, 3);
  EXPECT_EQ(a.height, 64);
  EXPECT_EQ(a.width, 64);
  EXPECT_EQ(a.data, b.data);
  EXPECT_THROW(apply_eval(16, big, 0.1706, 0.2112), ContractError);
}

TEST(Resize, SameSizeIsIdentity) {
  const auto img = random_image(33, 21, 5);
  EXPECT_EQ(resize_bilinear(img, 33, 21).pixels, img.pixels);
}

TEST(Resize, DownscalePreservesConstantsAndMean) {
  const GrayImage flat(100, 60, 0.42);
  for (double v : resize_bilinear(flat, 37, 19).pixels) ASSERT_NEAR(v, 0.42, 1e-12);
  const auto img = random_image(128, 128, 6);
  const auto small = resize_bilinear(img, 64, 64);
  double m1 = 0, m2 = 0;
  for (double v : img.pixels) m1 += v;
  for (double v : small.pixels) m2 += v;
  EXPECT_NEAR(m1 / img.pixels.size(), m2 / small.pixels.size(), 1e-3);
}

TEST(Crop, DegenerateWindowFallsBackToCentre) {
  Rng rng(1);
  const auto before = crop_fallback_count();
  const auto box = sample_crop(40, 40, {1.0, 1.0}, {4.0, 4.0}, rng);
  EXPECT_TRUE(box.fallback);
  EXPECT_EQ(crop_fallback_count(), before + 1);
  EXPECT_EQ(box.width, 40);
  EXPECT_EQ(box.height, 10);
  EXPECT_EQ(box.top, 15);
}

TEST(Crop, WindowsRespectScaleBounds) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto box = sample_crop(64, 64, {0.7, 1.0}, {3.0 / 4.0, 4.0 / 3.0}, rng);
    if (box.fallback) continue;
    const double frac = static_cast<double>(box.width) * box.height / (64.0 * 64.0);
    ASSERT_GT(frac, 0.6);
    ASSERT_LE(frac, 1.0);
    ASSERT_LE(box.left + box.width, 64);
    ASSERT_LE(box.top + box.height, 64);
  }
}

TEST(Perspective, IdentityQuadIsIdentityWarp) {
  Planar p(1, 9, 7);
  Rng rng(3);
  for (auto& v : p.data) v = rng.uniform();
  const auto q = identity_quad(7, 9);
  const auto out = perspective_warp(p, q, q, 1.0);
  for (std::size_t i = 0; i < p.data.size(); ++i) ASSERT_NEAR(out.data[i], p.data[i], 1e-12);
}
