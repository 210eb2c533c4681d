#include <gtest/gtest.h>

#include <cmath>

#include "dopnet/layout.hpp"
#include "dopnet/metrics.hpp"
#include "dopnet/polygon.hpp"
#include "dopnet/sphere.hpp"

using namespace dopnet;

namespace {

// 4 x 6 m floor, x in [-2, 2], z in [-3, 3].
Layout cuboid(double height = 3.0) { return Layout({{-2, -3}, {2, -3}, {2, 3}, {-2, 3}}, height, 1.6); }

// Column whose longitude is closest to u on a W-wide panorama.
std::size_t column_at(double u, std::size_t W) {
  return static_cast<std::size_t>(std::lround((u + kPi) * W / (2 * kPi) - 0.5)) % W;
}

}  // namespace

TEST(Polygon, AreaAndOrientation) {
  const std::vector<Point2> ccw{{0, 0}, {2, 0}, {2, 1}, {0, 1}};
  EXPECT_DOUBLE_EQ(signed_area(ccw), 2.0);
  const std::vector<Point2> cw(ccw.rbegin(), ccw.rend());
  EXPECT_DOUBLE_EQ(signed_area(cw), -2.0);
}

TEST(Polygon, Simplicity) {
  EXPECT_TRUE(is_simple(std::vector<Point2>{{0, 0}, {2, 0}, {2, 1}, {0, 1}}));
  EXPECT_FALSE(is_simple(std::vector<Point2>{{0, 0}, {2, 1}, {2, 0}, {0, 1}}));
}

TEST(Polygon, IntersectionAreaConcave) {
  // L-shape (area 3) against the unit square at its missing corner.
  const std::vector<Point2> l{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  const std::vector<Point2> sq{{1, 1}, {2, 1}, {2, 2}, {1, 2}};
  const std::vector<Point2> sq2{{0.5, 0.5}, {1.5, 0.5}, {1.5, 1.5}, {0.5, 1.5}};
  EXPECT_NEAR(intersection_area(l, l), 3.0, 1e-12);
  EXPECT_NEAR(intersection_area(l, sq), 0.0, 1e-12);
  EXPECT_NEAR(intersection_area(l, sq2), 0.75, 1e-12);
}

TEST(Layout, InvariantsEnforced) {
  EXPECT_THROW(Layout({{-1, -1}, {1, -1}, {1, 1}}, 3.0), ValidationError);
  EXPECT_THROW(Layout({{-1, -1}, {-1, 1}, {1, 1}, {1, -1}}, 3.0), ValidationError);  // CW
  EXPECT_THROW(Layout({{1, 1}, {2, 1}, {2, 2}, {1, 2}}, 3.0), ValidationError);      // camera outside
  EXPECT_THROW(Layout({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}, 1.5, 1.6), ValidationError);
  EXPECT_THROW(Layout({{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}, 3.0, 0.0), ValidationError);
}

TEST(Raycast, CuboidAnalytic) {
  const std::size_t W = 1024;
  const HorizonDepth hd = raycast_depth(cuboid(), W);
  const auto depth_at = [&](double u) {
    return 2.0 * std::min(std::abs(3.0 / std::cos(u)), std::abs(2.0 / std::sin(u))) / 2.0;
  };
  for (std::size_t j = 0; j < W; ++j) {
    EXPECT_NEAR(hd.depth[j], depth_at(column_longitude(j, W)), 1e-9);
  }
  // Columns 511 and 512 straddle u = 0 by half a pixel.
  EXPECT_NEAR(hd.depth[column_at(0.0, W)], 3.0, 1e-4);
  EXPECT_NEAR(hd.depth[column_at(kPi / 2, W)], 2.0, 1e-4);
  const double u = kPi / 2 - kPi / W;  // column 767 exactly
  EXPECT_DOUBLE_EQ(column_longitude(767, W), u);
  EXPECT_NEAR(hd.depth[767], 2.0 / std::sin(u), 1e-12);
}

TEST(Raycast, SquareCorner) {
  const double a = 1.7;
  const Layout sq({{-a, -a}, {a, -a}, {a, a}, {-a, a}}, 3.0);
  const std::vector<double> d = raycast_polygon(sq.floor_polygon(), 4);  // column 2 sits at u = pi/4
  EXPECT_NEAR(column_longitude(2, 4), kPi / 4, 1e-15);
  EXPECT_NEAR(d[2], a * std::sqrt(2.0), 1e-12);
}

TEST(Boundaries, ClosedForms) {
  const EquirectGrid g(512, 1024);
  Tensor d({1024}, 3.0);
  const BoundaryPair bp = depth_to_boundaries({d, 3.0}, 1.6, g);
  const double vf = -std::atan(1.6 / 3.0), vc = std::atan(1.4 / 3.0);
  EXPECT_NEAR(vf, -0.4900, 1e-4);
  EXPECT_NEAR(vc, 0.4366, 1e-4);
  EXPECT_NEAR(bp.floor_rows[0], sphere_to_pixel(g, vf, 0).row, 1e-12);
  EXPECT_NEAR(bp.ceiling_rows[0], sphere_to_pixel(g, vc, 0).row, 1e-12);
  EXPECT_NEAR(pixel_to_sphere(g, bp.ceiling_rows[0], 0).lat, 0.4366, 1e-3);
  // Row of a pixel center; the same line is 0.5 lower in edge-origin units.
  EXPECT_NEAR(bp.floor_rows[0], 335.35, 0.01);
  EXPECT_NEAR(bp.floor_rows[0] + 0.5, 335.9, 0.1);
}

TEST(Boundaries, FarWallApproachesHorizon) {
  const EquirectGrid g(512, 1024);
  const BoundaryPair bp = depth_to_boundaries({Tensor({1024}, 1e9), 3.0}, 1.6, g);
  EXPECT_NEAR(bp.floor_rows[0], 255.5, 1e-6);
  EXPECT_NEAR(bp.ceiling_rows[0], 255.5, 1e-6);
}

TEST(Boundaries, RoundTrip) {
  const EquirectGrid g(256, 512);
  const HorizonDepth hd = raycast_depth(cuboid(2.9), 512);
  const HorizonDepth back = boundaries_to_depth(depth_to_boundaries(hd, 1.6, g), 1.6, g);
  EXPECT_LT(max_abs_diff(back.depth, hd.depth), 1e-9);
  EXPECT_NEAR(back.room_height_m, 2.9, 1e-9);
}

TEST(Boundaries, FortyFiveDegreeFloor) {
  const EquirectGrid g(256, 512);
  const double fr = sphere_to_pixel(g, -kPi / 4, 0).row;
  const double cr = sphere_to_pixel(g, kPi / 4, 0).row;
  const BoundaryPair bp{Tensor({512}, cr), Tensor({512}, fr)};
  const HorizonDepth hd = boundaries_to_depth(bp, 1.6, g);
  EXPECT_NEAR(hd.depth[10], 1.6, 1e-12);
  EXPECT_NEAR(hd.room_height_m, 3.2, 1e-12);  // symmetric rows
}

TEST(Boundaries, WrongSideOfHorizonRejected) {
  const EquirectGrid g(256, 512);
  const BoundaryPair bp{Tensor({512}, 200.0), Tensor({512}, 60.0)};
  EXPECT_THROW(boundaries_to_depth(bp, 1.6, g), ValidationError);
}

TEST(PlaneMask, ColumnStructure) {
  const EquirectGrid g(128, 256);
  const Layout l({{-1, -2}, {3, -2}, {3, 1}, {1, 1}, {1, 2.5}, {-1, 2.5}}, 3.1);
  const Tensor m = rasterize_plane_mask(l, g).mask;
  for (std::size_t j = 0; j < 256; ++j) {
    int changes = 0;
    for (std::size_t r = 1; r < 128; ++r) changes += m.at(r, j) != m.at(r - 1, j);
    EXPECT_EQ(changes, 2) << "column " << j;
    EXPECT_EQ(m.at(0, j), 1.0);
    EXPECT_EQ(m.at(127, j), 1.0);
  }
}

TEST(PlaneMask, CuboidWallBand) {
  // Boundary rows 184.34 and 335.35 at the u = 0 column: the wall covers
  // pixel centers 185..335.
  const EquirectGrid g(512, 1024);
  const Tensor m = rasterize_plane_mask(cuboid(), g).mask;
  const std::size_t j = 512;
  for (std::size_t r = 0; r < 512; ++r) {
    const bool wall = r >= 185 && r <= 335;
    EXPECT_EQ(m.at(r, j), wall ? 0.0 : 1.0) << "row " << r;
  }
}

TEST(PlaneMask, HorizontalShareShrinksWithHeight) {
  // A taller room lifts the ceiling boundary, so the wall band widens.
  const EquirectGrid g(128, 256);
  double prev = 1e18;
  for (double h : {2.4, 2.8, 3.2, 3.6}) {
    const double s = sum(rasterize_plane_mask(cuboid(h), g).mask);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(NormalsGradients, ConstantDepth) {
  const NormalsGradients ng = depth_normals_gradients(Tensor({64}, 2.5));
  for (double v : ng.gradients.data()) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(NormalsGradients, AxisAlignedWallHasConstantNormal) {
  const std::size_t W = 1024;
  const Tensor d = raycast_depth(cuboid(), W).depth;
  const NormalsGradients ng = depth_normals_gradients(d);
  // Columns well inside the z = 3 wall (|u| < atan(2/3) = 0.588).
  for (std::size_t j = 450; j < 574; ++j) EXPECT_NEAR(ng.normals[j], 0.0, 1e-9);
  // Columns inside the x = 2 wall face +x.
  for (std::size_t j = 720; j < 810; ++j) EXPECT_NEAR(ng.normals[j], kPi / 2, 1e-9);
}

TEST(NormalsGradients, FlipMirrors) {
  const Layout l({{-1, -2}, {3, -2}, {3, 1}, {1, 1}, {1, 2.5}, {-1, 2.5}}, 3.1);
  const Tensor d = raycast_depth(l, 512).depth;
  const NormalsGradients a = depth_normals_gradients(d);
  const NormalsGradients b = depth_normals_gradients(flip_panorama(d));
  const Tensor ga = flip_panorama(a.gradients), na = flip_panorama(a.normals);
  for (std::size_t j = 0; j < 512; ++j) {
    EXPECT_NEAR(b.gradients[j], -ga[j], 1e-9);
    EXPECT_NEAR(wrap_angle(b.normals[j] + na[j]), 0.0, 1e-9);
  }
}

TEST(LayoutFromPrediction, RecoversOwnPolygon) {
  const Layout l({{-1, -2}, {3, -2}, {3, 1}, {1, 1}, {1, 2.5}, {-1, 2.5}}, 3.1);
  const HorizonDepth hd = raycast_depth(l, 1024);
  const Layout dense = layout_from_prediction({hd.depth, hd.room_height_m});
  EXPECT_GE(iou2d(dense, l), 0.995);
  EXPECT_DOUBLE_EQ(dense.room_height(), 3.1);
  const Layout corners = extract_corners(dense);
  EXPECT_EQ(corners.floor_polygon().size(), 6u);
  EXPECT_GE(iou2d(corners, l), 0.9999);
}

TEST(LayoutFromPrediction, ConstantDepthIsCircle) {
  const Layout c = layout_from_prediction({Tensor({360}, 2.0), 3.0});
  ASSERT_EQ(c.floor_polygon().size(), 360u);
  for (const Point2& p : c.floor_polygon()) EXPECT_NEAR(std::hypot(p.x, p.z), 2.0, 1e-12);
  EXPECT_NEAR(c.floor_area(), kPi * 4.0, 1e-3);
}

TEST(ResampleColumns, IdentityAndConstant) {
  Tensor x({8});
  for (std::size_t i = 0; i < 8; ++i) x[i] = std::sin(static_cast<double>(i));
  EXPECT_LT(max_abs_diff(resample_columns(x, 8), x), 1e-15);
  const Tensor up = resample_columns(Tensor({8}, 1.5), 32);
  for (double v : up.data()) EXPECT_NEAR(v, 1.5, 1e-15);
}
