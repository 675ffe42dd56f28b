#include <gtest/gtest.h>

#include "berrysmith/segment.hpp"
#include "fixtures.hpp"

using namespace berrysmith;

TEST(Otsu, BimodalThresholdLiesBetweenModes) {
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i < 60 ? 30 + i % 5 : 200 + i % 7;
  const int t = otsu_threshold(ImageGray(10, 10, v));
  EXPECT_GE(t, 34);
  EXPECT_LT(t, 200);
}

TEST(Otsu, ConstantImageHasNoForeground) {
  EXPECT_EQ(otsu_threshold(ImageGray(4, 4, 77.0)), 77);
}

TEST(SegmentFallback, OneMaskPerBrightComponent) {
  const std::vector<fx::Berry> berries{{{30, 30, 12, 10, 0.2}, false},
                                            {{80, 30, 14, 9, 1.0}, false},
                                            {{110, 10, 2, 2, 0}, false}};
  const auto scene = fx::grape_image(128, 64, berries, 4, "x.png");
  const MaskSet set = segment_fallback(scene.image, 50, "x.png");
  EXPECT_EQ(set.generator, MaskGenerator::Fallback);
  ASSERT_EQ(set.masks.size(), 2u);
  EXPECT_EQ(set.masks[0].mask_id(), "c0000");
  EXPECT_EQ(set.masks[1].mask_id(), "c0001");
  EXPECT_NO_THROW(set.validate());
  for (int i = 0; i < 2; ++i) {
    const SegMask& truth = scene.masks.masks[i];
    std::int64_t best = 0;
    for (const SegMask& m : set.masks) {
      if (const auto common = intersect(m, truth)) best = std::max(best, common->area());
    }
    EXPECT_GT(best, truth.area() * 9 / 10) << truth.mask_id();
  }
}

TEST(SegmentFallback, UniformImageYieldsNothing) {
  EXPECT_TRUE(segment_fallback(ImageRgb(16, 16), 1).masks.empty());
}
