#pragma once

#include <filesystem>

#include "dopnet/tensor.hpp"

namespace dopnet {

/// Writes a [1,H,W] or [3,H,W] tensor with values in [0,1] as an 8-bit PNG.
/// Values are clamped and rounded.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Reads an 8-bit PNG as [3,H,W] (RGB) or [1,H,W] (gray) in [0,1].
Tensor read_png(const std::filesystem::path& path, bool gray = false);

}  // namespace dopnet
