#pragma once

#include <optional>

#include "dopnet/layout.hpp"
#include "dopnet/sphere.hpp"
#include "dopnet/tensor.hpp"

namespace dopnet {

/// Panorama with ground-truth boundaries in blue and predicted ones in
/// green, plus a square floor-plan panel (camera at the center) on the right.
/// Output [3, H, W + H]. The panorama background is `background` when given
/// (any [3,h,w], resampled to the grid) and a dimmed synthetic rendering of
/// the ground truth otherwise.
Tensor render_overlay(const Layout& gt, const std::optional<Prediction>& pred,
                      const EquirectGrid& grid, const Tensor* background = nullptr);

}  // namespace dopnet
