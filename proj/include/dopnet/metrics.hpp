#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dopnet/layout.hpp"
#include "dopnet/sphere.hpp"
#include "dopnet/tensor.hpp"

namespace dopnet {

/// Floor-polygon intersection over union.
double iou2d(const Layout& a, const Layout& b);
/// Volume IoU of the two floor-aligned prisms.
double iou3d(const Layout& a, const Layout& b);

/// Projected corner pixels, one ceiling and one floor point per floor vertex.
struct CornerPixels {
  std::vector<PixelCoord> ceiling;
  std::vector<PixelCoord> floor;
};
CornerPixels project_corners(const Layout& layout, const EquirectGrid& grid);

/// Mean distance between matched corner pixels over the image diagonal,
/// in percent. Corners are matched by the circular shift with the smallest
/// total distance; column distance wraps around the seam.
double corner_error_pixels(const CornerPixels& a, const CornerPixels& b, const EquirectGrid& grid);
/// Throws ValidationError when the corner counts differ.
double corner_error(const Layout& a, const Layout& b, const EquirectGrid& grid);

/// Percentage of pixels whose ceiling/wall/floor label differs.
double pixel_error_labels(const Tensor& a, const Tensor& b);
double pixel_error(const Layout& a, const Layout& b, const EquirectGrid& grid);

struct DepthMetrics {
  double rmse = 0.0;
  double delta1 = 0.0;
};
DepthMetrics depth_metrics(const Tensor& pred, const Tensor& gt);

struct MetricReport {
  double iou2d = 0.0;
  double iou3d = 0.0;
  std::optional<double> ce_pct;  // empty when the corner counts differ
  double pe_pct = 0.0;
  double rmse = 0.0;
  double delta1 = 0.0;
};

/// Full report for a predicted layout against the ground truth. Depth
/// metrics use `grid.width` ray-cast columns of both layouts.
MetricReport evaluate(const Layout& pred, const Layout& gt, const EquirectGrid& grid);

/// Mean over reports; CE averages only the reports that have it.
MetricReport mean_report(std::span<const MetricReport> reports);

}  // namespace dopnet
