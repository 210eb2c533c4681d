#pragma once

#include <cstddef>

#include "dopnet/layout.hpp"

// Geometric augmentations applied consistently to layouts and depth traces.
// Image-side counterparts are rotate_panorama / flip_panorama in sphere.hpp.

namespace dopnet {

/// Scales every floor vertex (x, z) -> (kx x, kz z); heights unchanged.
Layout pano_stretch(const Layout& layout, double kx, double kz);

/// Horizon depth of the stretched room computed from a depth trace alone:
/// the trace is lifted to its floor-plan polygon, corners cut by the column
/// sampling are restored (extract_corners), then stretched and ray-cast.
Tensor stretch_horizon_depth(const Tensor& depth, double kx, double kz);

/// Mirror x -> -x; matches flip_panorama on the image.
Layout flip_layout(const Layout& layout);

/// Layout seen after rotate_panorama(image, shift) on a `width`-column image.
Layout rotate_layout(const Layout& layout, long shift, std::size_t width);

}  // namespace dopnet
