#include "dopnet/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dopnet/ops.hpp"
#include "dopnet/scene.hpp"

namespace dopnet {
namespace {

using Rgb = std::array<double, 3>;
constexpr Rgb kBlue{0.1, 0.3, 1.0};
constexpr Rgb kGreen{0.1, 0.9, 0.2};

class Canvas {
 public:
  explicit Canvas(Tensor& img) : img_(img), H_(img.dim(1)), W_(img.dim(2)) {}

  void dot(long r, long c, const Rgb& color) {
    if (r < 0 || c < 0 || r >= static_cast<long>(H_) || c >= static_cast<long>(W_)) return;
    for (std::size_t ch = 0; ch < 3; ++ch) img_[(ch * H_ + r) * W_ + c] = color[ch];
  }

  void line(double r0, double c0, double r1, double c1, const Rgb& color) {
    const int n = static_cast<int>(std::ceil(std::max(std::abs(r1 - r0), std::abs(c1 - c0)))) + 1;
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      dot(std::lround(r0 + t * (r1 - r0)), std::lround(c0 + t * (c1 - c0)), color);
    }
  }

 private:
  Tensor& img_;
  std::size_t H_, W_;
};

void draw_boundary(Canvas& cv, const Tensor& rows, std::size_t W, std::size_t col0, const Rgb& c) {
  for (std::size_t j = 0; j < W; ++j) {
    const std::size_t k = (j + 1) % W;
    if (k == 0) continue;  // no segment across the seam
    const double a = rows[j], b = rows[k];
    cv.line(a, static_cast<double>(col0 + j), b, static_cast<double>(col0 + k), c);
    cv.line(a + 1, static_cast<double>(col0 + j), b + 1, static_cast<double>(col0 + k), c);
  }
}

void draw_polygon(Canvas& cv, const std::vector<Point2>& poly, double scale, double cr, double cc,
                  const Rgb& color) {
  // x to the right, z up
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 a = poly[i], b = poly[(i + 1) % poly.size()];
    cv.line(cr - scale * a.z, cc + scale * a.x, cr - scale * b.z, cc + scale * b.x, color);
  }
}

}  // namespace

Tensor render_overlay(const Layout& gt, const std::optional<Prediction>& pred,
                      const EquirectGrid& grid, const Tensor* background) {
  const std::size_t H = grid.height, W = grid.width, OW = W + H;
  Tensor pano;
  if (background) {
    if (background->ndim() != 3 || background->dim(0) != 3) {
      throw ValidationError("render: background must be [3,H,W]");
    }
    pano = resize_bilinear(*background, H, W);
  } else {
    pano = scale(render_room(gt, grid), 0.6);
  }

  Tensor img({3, H, OW}, 1.0);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t j = 0; j < W; ++j) img[(ch * H + r) * OW + j] = pano[(ch * H + r) * W + j];
    }
  }
  Canvas cv(img);

  const BoundaryPair gb = depth_to_boundaries(raycast_depth(gt, W), gt.camera_height(), grid);
  draw_boundary(cv, gb.ceiling_rows, W, 0, kBlue);
  draw_boundary(cv, gb.floor_rows, W, 0, kBlue);

  std::vector<Point2> pred_trace;
  if (pred) {
    const HorizonDepth pd{resample_columns(pred->horizon_depth, W), pred->room_height_m};
    const BoundaryPair pb = depth_to_boundaries(pd, gt.camera_height(), grid);
    draw_boundary(cv, pb.ceiling_rows, W, 0, kGreen);
    draw_boundary(cv, pb.floor_rows, W, 0, kGreen);
    const std::size_t n = pred->horizon_depth.size();
    for (std::size_t j = 0; j < n; ++j) {
      const double u = column_longitude(j, n);
      pred_trace.push_back({pred->horizon_depth[j] * std::sin(u), pred->horizon_depth[j] * std::cos(u)});
    }
  }

  double extent = 0.0;
  for (const Point2& p : gt.floor_polygon()) extent = std::max({extent, std::abs(p.x), std::abs(p.z)});
  for (const Point2& p : pred_trace) extent = std::max({extent, std::abs(p.x), std::abs(p.z)});
  const double half = 0.5 * static_cast<double>(H);
  const double s = 0.9 * half / extent;
  const double cc = static_cast<double>(W) + half;
  const Rgb grey{0.8, 0.8, 0.8};
  cv.line(0, cc, static_cast<double>(H - 1), cc, grey);
  cv.line(half, static_cast<double>(W), half, static_cast<double>(OW - 1), grey);
  draw_polygon(cv, gt.floor_polygon(), s, half, cc, kBlue);
  if (!pred_trace.empty()) draw_polygon(cv, pred_trace, s, half, cc, kGreen);
  for (long dr = -2; dr <= 2; ++dr) {
    for (long dc = -2; dc <= 2; ++dc) cv.dot(std::lround(half) + dr, std::lround(cc) + dc, {0, 0, 0});
  }
  return img;
}

}  // namespace dopnet
