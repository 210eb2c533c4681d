#pragma once

#include <cstddef>
#include <numbers>
#include <string>

#include "dopnet/tensor.hpp"

namespace dopnet {

inline constexpr double kPi = std::numbers::pi;

/// 2:1 equirectangular raster.
struct EquirectGrid {
  std::size_t height = 0;
  std::size_t width = 0;

  EquirectGrid(std::size_t h, std::size_t w);

  /// Parses "HxW", e.g. "512x1024".
  static EquirectGrid parse(const std::string& hxw);
};

struct SpherePoint {
  double lat;  // radians, +pi/2 at the top row
  double lon;  // radians, 0 at the image center
};

struct PixelCoord {
  double row;
  double col;
};

// Pixel centers sit at integer coordinates; lon = 2*pi*(col+0.5)/W - pi and
// lat = pi/2 - pi*(row+0.5)/H. Both maps extend linearly outside the image.
SpherePoint pixel_to_sphere(const EquirectGrid& grid, double row, double col);
PixelCoord sphere_to_pixel(const EquirectGrid& grid, double lat, double lon);

/// One equatorial pixel, 2*pi/W.
double default_angular_step(const EquirectGrid& grid);

inline constexpr std::size_t kStencilTaps = 9;
inline constexpr std::size_t kCenterTap = 4;

/// Distortion-aware 3x3 sampling coordinates, [H,W,9,2] as (row, col).
///
/// For every pixel a 3x3 lattice with spacing tan(angular_step) is laid on
/// the plane tangent to the sphere at that pixel and mapped back through the
/// inverse gnomonic projection. Taps are row-major over (drow, dcol) in
/// {-1,0,1}^2, so tap 4 is the pixel itself. Columns are left unwrapped.
Tensor tangent_grid(const EquirectGrid& grid, double angular_step);
inline Tensor tangent_grid(const EquirectGrid& grid) {
  return tangent_grid(grid, default_angular_step(grid));
}

/// Circular column shift of a [..., W] tensor: out[..., j] = x[..., j - shift].
Tensor rotate_panorama(const Tensor& x, long shift);
/// Column reversal of a [..., W] tensor.
Tensor flip_panorama(const Tensor& x);
/// Row reversal of a [C,H,W] tensor.
Tensor flip_vertical(const Tensor& x);

}  // namespace dopnet
