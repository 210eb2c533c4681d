#include <gtest/gtest.h>

#include <cmath>

#include "dopnet/losses.hpp"
#include "dopnet/metrics.hpp"

using namespace dopnet;

namespace {

Layout box(double x0, double x1, double z0, double z1, double h) {
  return Layout({{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}}, h, 1.6);
}

PlaneMask checker(std::size_t H, std::size_t W) {
  PlaneMask m{Tensor({H, W})};
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t j = 0; j < W; ++j) m.mask.at(r, j) = static_cast<double>((r + j) % 2);
  return m;
}

}  // namespace

TEST(Bce, ZeroLogits) {
  EXPECT_NEAR(bce_segment(Tensor({4, 8}, 0.0), checker(4, 8)), std::log(2.0), 1e-15);
}

TEST(Bce, SaturatedCorrect) {
  const PlaneMask m = checker(4, 8);
  Tensor x({4, 8});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = m.mask[i] > 0.5 ? 20.0 : -20.0;
  EXPECT_LT(bce_segment(x, m), 1e-8);
}

TEST(Bce, ShapeMismatch) {
  EXPECT_THROW(bce_segment(Tensor({4, 4}, 0.0), checker(4, 8)), ValidationError);
}

TEST(LayoutLoss, PerfectPrediction) {
  const HorizonDepth gt = raycast_depth(box(-2, 2, -3, 3, 3.0), 64);
  const LayoutLossTerms t = layout_loss({gt.depth, 3.0}, gt);
  EXPECT_EQ(t.depth, 0.0);
  EXPECT_EQ(t.height, 0.0);
  EXPECT_EQ(t.normal, 0.0);
  EXPECT_EQ(t.gradient, 0.0);
}

TEST(LayoutLoss, ConstantOffset) {
  const HorizonDepth gt{Tensor({32}, 2.0), 3.0};
  Tensor d({32}, 2.1);
  const LayoutLossTerms t = layout_loss({d, 3.0}, gt);
  EXPECT_NEAR(t.depth, 0.1, 1e-12);
  EXPECT_NEAR(t.gradient, 0.0, 1e-15);
}

TEST(LayoutLoss, GroundTruthResampled) {
  const HorizonDepth gt = raycast_depth(box(-2, 2, -3, 3, 3.0), 512);
  const LayoutLossTerms t = layout_loss({resample_columns(gt.depth, 32), 3.0}, gt);
  EXPECT_LT(t.depth, 1e-12);
}

TEST(TotalLoss, Weighting) {
  const LossBreakdown b = total_loss(std::log(2.0), {1.0, 0.0, 0.0, 0.0});
  EXPECT_NEAR(b.total, 1.5199, 1e-4);
  EXPECT_DOUBLE_EQ(b.lambda, 0.75);
  EXPECT_DOUBLE_EQ(total_loss(0.0, {0.1, 0.2, 0.3, 0.4}).total, 0.1 + 0.2 + 0.3 + 0.4);
  EXPECT_DOUBLE_EQ(total_loss(0.0, {}).total, 0.0);
}

TEST(Iou, Identical) {
  const Layout a = box(-2, 2, -3, 3, 3.0);
  EXPECT_NEAR(iou2d(a, a), 1.0, 1e-12);
  EXPECT_NEAR(iou3d(a, a), 1.0, 1e-12);
}

TEST(Iou, NestedRooms) {
  const Layout a = box(-2, 2, -3, 3, 3.0), b = box(-2, 2, -3, 2, 3.0);
  EXPECT_NEAR(iou2d(a, b), 20.0 / 24.0, 1e-6);
  EXPECT_NEAR(iou3d(a, b), 60.0 / 72.0, 1e-6);
}

TEST(Iou, HeightOnly) {
  const Layout a = box(-2, 2, -3, 3, 3.0), b = box(-2, 2, -3, 3, 2.7);
  EXPECT_NEAR(iou2d(a, b), 1.0, 1e-12);
  EXPECT_NEAR(iou3d(a, b), 0.9, 1e-6);
}

TEST(CornerError, Identical) {
  const EquirectGrid g(512, 1024);
  const Layout a = box(-2, 3, -1.5, 2.5, 3.0);
  EXPECT_EQ(corner_error(a, a, g), 0.0);
  EXPECT_EQ(pixel_error(a, a, g), 0.0);
}

TEST(CornerError, OneDisplacedCorner) {
  const EquirectGrid g(512, 1024);
  const double diag = std::hypot(512.0, 1024.0);
  CornerPixels a = project_corners(box(-2, 3, -1.5, 2.5, 3.0), g);
  CornerPixels b = a;
  b.floor[1].col += diag / 100.0;
  const std::size_t n = a.floor.size();
  EXPECT_NEAR(corner_error_pixels(b, a, g), 1.0 / (2.0 * n), 1e-12);
}

TEST(CornerError, CountMismatchRejected) {
  const EquirectGrid g(256, 512);
  const Layout a = box(-2, 3, -1.5, 2.5, 3.0);
  const Layout l({{-1, -2}, {3, -2}, {3, 1}, {1, 1}, {1, 2.5}, {-1, 2.5}}, 3.0);
  EXPECT_THROW(corner_error(a, l, g), ValidationError);
}

TEST(CornerError, MatchingIgnoresStartingVertex) {
  const EquirectGrid g(256, 512);
  const Layout a({{-2, -1.5}, {3, -1.5}, {3, 2.5}, {-2, 2.5}}, 3.0);
  const Layout b({{3, 2.5}, {-2, 2.5}, {-2, -1.5}, {3, -1.5}}, 3.0);
  EXPECT_NEAR(corner_error(a, b, g), 0.0, 1e-12);
}

TEST(PixelError, ComplementaryMasks) {
  Tensor a({4, 8}, 0.0), b({4, 8}, 1.0);
  EXPECT_DOUBLE_EQ(pixel_error_labels(a, b), 100.0);
}

TEST(DepthMetrics, Cases) {
  const Tensor gt({16}, 2.0);
  const DepthMetrics same = depth_metrics(gt, gt);
  EXPECT_EQ(same.rmse, 0.0);
  EXPECT_EQ(same.delta1, 1.0);
  EXPECT_NEAR(depth_metrics(Tensor({16}, 2.1), gt).rmse, 0.1, 1e-12);
  EXPECT_EQ(depth_metrics(Tensor({16}, 2.6), gt).delta1, 0.0);
  EXPECT_THROW(depth_metrics(gt, Tensor({16}, 0.0)), ValidationError);
}

TEST(Evaluate, PerfectReport) {
  const EquirectGrid g(512, 1024);
  const Layout a({{-1, -2}, {3, -2}, {3, 1}, {1, 1}, {1, 2.5}, {-1, 2.5}}, 3.0);
  const MetricReport r = evaluate(a, a, g);
  EXPECT_NEAR(r.iou2d, 1.0, 1e-12);
  EXPECT_NEAR(r.iou3d, 1.0, 1e-12);
  ASSERT_TRUE(r.ce_pct.has_value());
  EXPECT_EQ(*r.ce_pct, 0.0);
  EXPECT_EQ(r.pe_pct, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(r.delta1, 1.0);
}

TEST(Evaluate, MeanSkipsMissingCornerError) {
  MetricReport a, b;
  a.iou2d = 1.0;
  b.iou2d = 0.5;
  a.ce_pct = 2.0;
  const MetricReport m = mean_report(std::vector<MetricReport>{a, b});
  EXPECT_DOUBLE_EQ(m.iou2d, 0.75);
  ASSERT_TRUE(m.ce_pct.has_value());
  EXPECT_DOUBLE_EQ(*m.ce_pct, 2.0);
}
