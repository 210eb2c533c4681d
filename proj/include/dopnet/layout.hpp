#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dopnet/polygon.hpp"
#include "dopnet/sphere.hpp"
#include "dopnet/tensor.hpp"

namespace dopnet {

inline constexpr double kDefaultCameraHeight = 1.6;

/// Metric Manhattan room seen from a camera at the floor-plan origin.
///
/// Invariants (checked on construction): the floor polygon is simple, CCW,
/// has at least 4 vertices and strictly contains (0, 0);
/// 0 < camera_height < room_height.
class Layout {
 public:
  Layout(std::vector<Point2> floor_polygon, double room_height_m,
         double camera_height_m = kDefaultCameraHeight);

  const std::vector<Point2>& floor_polygon() const { return polygon_; }
  double room_height() const { return room_height_; }
  double camera_height() const { return camera_height_; }
  double floor_area() const { return signed_area(polygon_); }

 private:
  std::vector<Point2> polygon_;
  double room_height_;
  double camera_height_;
};

/// Per-column horizontal distance from the camera axis to the wall.
struct HorizonDepth {
  Tensor depth;  // [W], meters
  double room_height_m = 0.0;
};

/// Network output: one depth per column plus the room height.
struct Prediction {
  Tensor horizon_depth;  // [W], meters
  double room_height_m = 0.0;
};

struct BoundaryPair {
  Tensor ceiling_rows;  // [W]
  Tensor floor_rows;    // [W]
};

/// 1 on horizontal planes (ceiling, floor), 0 on walls.
struct PlaneMask {
  Tensor mask;  // [H,W]
};

enum class SurfaceLabel : int { kCeiling = 0, kWall = 1, kFloor = 2 };

/// Longitude of column j for a panorama `width` columns wide.
double column_longitude(std::size_t j, std::size_t width);

/// First-hit distance along (sin u_j, cos u_j) for every column. When
/// `hit_edges` is given it receives the index of the edge that was hit.
std::vector<double> raycast_polygon(std::span<const Point2> polygon, std::size_t width,
                                    std::vector<std::size_t>* hit_edges = nullptr);

HorizonDepth raycast_depth(const Layout& layout, std::size_t width);

BoundaryPair depth_to_boundaries(const HorizonDepth& hd, double camera_height_m,
                                 const EquirectGrid& grid);

/// Inverse of depth_to_boundaries. Depth comes from the floor boundary; the
/// room height is the uniform mean of the per-column estimates
/// camera * (1 + tan(v_ceil) / tan(-v_floor)).
HorizonDepth boundaries_to_depth(const BoundaryPair& bp, double camera_height_m,
                                 const EquirectGrid& grid);

/// Per-pixel ceiling/wall/floor labels as doubles in {0,1,2}, [H,W].
Tensor rasterize_labels(const Layout& layout, const EquirectGrid& grid);
PlaneMask rasterize_plane_mask(const Layout& layout, const EquirectGrid& grid);

struct NormalsGradients {
  Tensor normals;    // [W] angle atan2(n_x, n_z) of the outward wall normal
  Tensor gradients;  // [W] circular central difference of depth
};

NormalsGradients depth_normals_gradients(const Tensor& depth);
/// Cotangent of depth given cotangents of both outputs.
Tensor depth_normals_gradients_backward(const Tensor& depth, const Tensor& g_normals,
                                        const Tensor& g_gradients);

/// Wraps an angle difference into (-pi, pi].
double wrap_angle(double a);

/// Raw W-gon traced by the predicted depths (no Manhattan snapping).
Layout layout_from_prediction(const Prediction& pred,
                              double camera_height_m = kDefaultCameraHeight);

/// Recovers wall corners from a densely sampled polygon: drops collinear
/// vertices and replaces each one-sample chamfer that cuts a corner by the
/// intersection of the two neighbouring wall lines. Noisy traces come back
/// with most vertices intact.
Layout extract_corners(const Layout& dense, double collinear_tol = 1e-6);

/// Resample a periodic per-column signal to `width` columns by linear
/// interpolation at column centers.
Tensor resample_columns(const Tensor& signal, std::size_t width);

}  // namespace dopnet
