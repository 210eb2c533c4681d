#include "dopnet/augment.hpp"

#include <algorithm>
#include <cmath>

namespace dopnet {

Layout pano_stretch(const Layout& layout, double kx, double kz) {
  if (!(kx > 0.0) || !(kz > 0.0) || !std::isfinite(kx) || !std::isfinite(kz)) {
    throw ValidationError("pano_stretch: factors must be positive");
  }
  std::vector<Point2> poly = layout.floor_polygon();
  for (Point2& p : poly) p = {kx * p.x, kz * p.z};
  return Layout(std::move(poly), layout.room_height(), layout.camera_height());
}

Tensor stretch_horizon_depth(const Tensor& depth, double kx, double kz) {
  if (!(kx > 0.0) || !(kz > 0.0)) throw ValidationError("stretch_horizon_depth: factors must be positive");
  const std::size_t W = depth.size();
  // the height is irrelevant here; any valid value lets the trace be lifted
  const Layout dense = layout_from_prediction({depth, 2.0 * kDefaultCameraHeight});
  std::vector<Point2> poly = extract_corners(dense).floor_polygon();
  for (Point2& p : poly) p = {kx * p.x, kz * p.z};
  return Tensor({W}, raycast_polygon(poly, W));
}

Layout flip_layout(const Layout& layout) {
  std::vector<Point2> poly = layout.floor_polygon();
  for (Point2& p : poly) p.x = -p.x;
  std::reverse(poly.begin(), poly.end());
  return Layout(std::move(poly), layout.room_height(), layout.camera_height());
}

Layout rotate_layout(const Layout& layout, long shift, std::size_t width) {
  if (width == 0) throw ValidationError("rotate_layout: width must be positive");
  // content moves to larger longitude by shift columns
  const double a = 2 * kPi * static_cast<double>(shift) / static_cast<double>(width);
  const double c = std::cos(a), s = std::sin(a);
  std::vector<Point2> poly = layout.floor_polygon();
  for (Point2& p : poly) {
    // u = atan2(x, z) -> u + a
    p = {p.x * c + p.z * s, -p.x * s + p.z * c};
  }
  return Layout(std::move(poly), layout.room_height(), layout.camera_height());
}

}  // namespace dopnet
