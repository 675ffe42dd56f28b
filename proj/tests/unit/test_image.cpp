#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "berrysmith/error.hpp"
#include "berrysmith/image.hpp"

using namespace berrysmith;

TEST(Image, GrayRejectsOutOfRangeValues) {
  EXPECT_THROW(ImageGray(2, 1, std::vector<double>{0.0, 256.0}), InvalidArgument);
  EXPECT_THROW(ImageGray(2, 1, std::vector<double>{NAN, 1.0}), InvalidArgument);
  EXPECT_THROW(ImageGray(2, 2, std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(ImageRgb(0, 3), InvalidArgument);
}

TEST(Image, GrayscaleUsesRec601Weights) {
  ImageRgb img(1, 1, {255, 0, 0});
  EXPECT_NEAR(to_grayscale(img).at(0, 0), 0.299 * 255, 1e-9);
  ImageRgb mix(1, 1, {10, 20, 30});
  EXPECT_NEAR(to_grayscale(mix).at(0, 0), 0.299 * 10 + 0.587 * 20 + 0.114 * 30, 1e-9);
}

TEST(Image, SigmaFollowsKernelSize) {
  for (int k : {3, 5, 7, 9}) {
    EXPECT_NEAR(sigma_for_kernel(k), 0.3 * ((k - 1) / 2.0 - 1) + 0.8, 1e-12) << k;
  }
}

TEST(Image, GaussianKernelIsNormalizedAndSymmetric) {
  for (int k : {1, 3, 5, 9}) {
    const auto g = gaussian_kernel(k, sigma_for_kernel(k));
    ASSERT_EQ(static_cast<int>(g.size()), k);
    EXPECT_NEAR(std::accumulate(g.begin(), g.end(), 0.0), 1.0, 1e-12);
    for (int i = 0; i < k; ++i) EXPECT_DOUBLE_EQ(g[i], g[k - 1 - i]);
  }
}

TEST(Image, BlurRejectsBadKernels) {
  ImageGray img(4, 4, 1.0);
  EXPECT_THROW(gaussian_blur(img, 4, 1.0), InvalidArgument);
  EXPECT_THROW(gaussian_blur(img, -3, 1.0), InvalidArgument);
  EXPECT_THROW(gaussian_blur(img, 3, 0.0), InvalidArgument);
}

TEST(Image, BlurKeepsConstantImagesExact) {
  ImageGray img(9, 7, 137.0);
  for (int k : {1, 3, 5, 7, 9}) EXPECT_EQ(gaussian_blur(img, k, sigma_for_kernel(k)), img) << k;
}

TEST(Image, SeparableBlurMatchesDenseConvolution) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> px(0, 255);
  std::vector<double> v(11 * 8);
  for (double& x : v) x = px(rng);
  ImageGray img(11, 8, v);
  for (int k : {3, 5, 7}) {
    const auto g = gaussian_kernel(k, sigma_for_kernel(k));
    const ImageGray blurred = gaussian_blur(img, k, sigma_for_kernel(k));
    const int r = k / 2;
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 11; ++x) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j) {
          for (int i = -r; i <= r; ++i) {
            acc += g[i + r] * g[j + r] * img.at(std::clamp(x + i, 0, 10), std::clamp(y + j, 0, 7));
          }
        }
        EXPECT_NEAR(blurred.at(x, y), acc, 1e-9);
      }
    }
  }
}

TEST(Image, SobelOfHorizontalRamp) {
  std::vector<double> v;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) v.push_back(10.0 * x);
  }
  const GradientField g = sobel_gradients(ImageGray(6, 5, v));
  // Interior: 8 * slope along x, nothing along y.
  EXPECT_DOUBLE_EQ(g.gx[2 * 6 + 2], 80.0);
  EXPECT_DOUBLE_EQ(g.gy[2 * 6 + 2], 0.0);
  EXPECT_DOUBLE_EQ(g.magnitude[2 * 6 + 2], 80.0);
  EXPECT_NEAR(g.direction[2 * 6 + 2], 0.0, 1e-12);
  // Replicated border halves the stencil span.
  EXPECT_DOUBLE_EQ(g.gx[2 * 6 + 0], 40.0);
}

TEST(Image, SobelNeedsThreeByThree) {
  EXPECT_THROW(sobel_gradients(ImageGray(2, 5)), InvalidArgument);
}
