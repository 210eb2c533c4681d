#include "dopnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dopnet {
namespace {

double checked_area(const Layout& l) {
  const double a = l.floor_area();
  if (!(a > 0.0)) throw ValidationError("degenerate floor polygon");
  return a;
}

double pixel_distance(PixelCoord p, PixelCoord q, double width) {
  double dc = std::fmod(std::abs(p.col - q.col), width);
  dc = std::min(dc, width - dc);
  return std::hypot(p.row - q.row, dc);
}

}  // namespace

double iou2d(const Layout& a, const Layout& b) {
  const double aa = checked_area(a), ab = checked_area(b);
  const double inter = intersection_area(a.floor_polygon(), b.floor_polygon());
  return inter / (aa + ab - inter);
}

double iou3d(const Layout& a, const Layout& b) {
  const double aa = checked_area(a), ab = checked_area(b);
  const double inter = intersection_area(a.floor_polygon(), b.floor_polygon()) *
                       std::min(a.room_height(), b.room_height());
  return inter / (aa * a.room_height() + ab * b.room_height() - inter);
}

CornerPixels project_corners(const Layout& layout, const EquirectGrid& grid) {
  CornerPixels out;
  const double cam = layout.camera_height();
  const double up = layout.room_height() - cam;
  for (const Point2& p : layout.floor_polygon()) {
    const double d = std::hypot(p.x, p.z);
    const double lon = std::atan2(p.x, p.z);
    out.ceiling.push_back(sphere_to_pixel(grid, std::atan(up / d), lon));
    out.floor.push_back(sphere_to_pixel(grid, -std::atan(cam / d), lon));
  }
  return out;
}

double corner_error_pixels(const CornerPixels& a, const CornerPixels& b, const EquirectGrid& grid) {
  const std::size_t n = a.ceiling.size();
  if (n == 0 || a.floor.size() != n || b.ceiling.size() != n || b.floor.size() != n) {
    throw ValidationError("corner_error: corner counts differ (" + std::to_string(n) + " vs " +
                          std::to_string(b.ceiling.size()) + ")");
  }
  const double W = static_cast<double>(grid.width);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t shift = 0; shift < n; ++shift) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (i + shift) % n;
      total += pixel_distance(a.ceiling[i], b.ceiling[k], W);
      total += pixel_distance(a.floor[i], b.floor[k], W);
    }
    best = std::min(best, total);
  }
  const double diag = std::hypot(static_cast<double>(grid.height), W);
  return 100.0 * best / (2.0 * static_cast<double>(n)) / diag;
}

double corner_error(const Layout& a, const Layout& b, const EquirectGrid& grid) {
  return corner_error_pixels(project_corners(a, grid), project_corners(b, grid), grid);
}

double pixel_error_labels(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b) || a.empty()) {
    throw ValidationError("pixel_error: label maps " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return 100.0 * static_cast<double>(diff) / static_cast<double>(a.size());
}

double pixel_error(const Layout& a, const Layout& b, const EquirectGrid& grid) {
  return pixel_error_labels(rasterize_labels(a, grid), rasterize_labels(b, grid));
}

DepthMetrics depth_metrics(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt) || pred.ndim() != 1 || pred.empty()) {
    throw ValidationError("depth_metrics: widths " + shape_str(pred.shape()) + " vs " +
                          shape_str(gt.shape()));
  }
  DepthMetrics m;
  std::size_t good = 0;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    if (!(gt[j] > 0.0)) throw ValidationError("depth_metrics: non-positive ground-truth depth");
    const double e = pred[j] - gt[j];
    m.rmse += e * e;
    const double ratio = std::max(pred[j] / gt[j], gt[j] / pred[j]);
    good += pred[j] > 0.0 && ratio < 1.25;
  }
  const double n = static_cast<double>(gt.size());
  m.rmse = std::sqrt(m.rmse / n);
  m.delta1 = static_cast<double>(good) / n;
  return m;
}

MetricReport evaluate(const Layout& pred, const Layout& gt, const EquirectGrid& grid) {
  MetricReport r;
  r.iou2d = iou2d(pred, gt);
  r.iou3d = iou3d(pred, gt);
  if (pred.floor_polygon().size() == gt.floor_polygon().size()) {
    r.ce_pct = corner_error(pred, gt, grid);
  }
  r.pe_pct = pixel_error(pred, gt, grid);
  const DepthMetrics dm =
      depth_metrics(raycast_depth(pred, grid.width).depth, raycast_depth(gt, grid.width).depth);
  r.rmse = dm.rmse;
  r.delta1 = dm.delta1;
  return r;
}

MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport m;
  if (reports.empty()) return m;
  double ce = 0.0;
  std::size_t n_ce = 0;
  for (const MetricReport& r : reports) {
    m.iou2d += r.iou2d;
    m.iou3d += r.iou3d;
    m.pe_pct += r.pe_pct;
    m.rmse += r.rmse;
    m.delta1 += r.delta1;
    if (r.ce_pct) {
      ce += *r.ce_pct;
      ++n_ce;
    }
  }
  const double n = static_cast<double>(reports.size());
  m.iou2d /= n;
  m.iou3d /= n;
  m.pe_pct /= n;
  m.rmse /= n;
  m.delta1 /= n;
  if (n_ce > 0) m.ce_pct = ce / static_cast<double>(n_ce);
  return m;
}

}  // namespace dopnet
