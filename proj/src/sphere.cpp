#include "dopnet/sphere.hpp"

#include <algorithm>
#include <cmath>

namespace dopnet {

EquirectGrid::EquirectGrid(std::size_t h, std::size_t w) : height(h), width(w) {
  if (h == 0 || w == 0 || w != 2 * h) {
    throw ValidationError("equirectangular grid must be H x 2H, got " +
                          std::to_string(h) + "x" + std::to_string(w));
  }
}

EquirectGrid EquirectGrid::parse(const std::string& hxw) {
  const auto x = hxw.find_first_of("xX");
  if (x == std::string::npos) throw ValidationError("size must be HxW, got '" + hxw + "'");
  try {
    return EquirectGrid(std::stoul(hxw.substr(0, x)), std::stoul(hxw.substr(x + 1)));
  } catch (const std::logic_error&) {
    throw ValidationError("size must be HxW, got '" + hxw + "'");
  }
}

SpherePoint pixel_to_sphere(const EquirectGrid& grid, double row, double col) {
  const double H = static_cast<double>(grid.height), W = static_cast<double>(grid.width);
  return {kPi / 2 - kPi * (row + 0.5) / H, 2 * kPi * (col + 0.5) / W - kPi};
}

PixelCoord sphere_to_pixel(const EquirectGrid& grid, double lat, double lon) {
  const double H = static_cast<double>(grid.height), W = static_cast<double>(grid.width);
  return {(kPi / 2 - lat) * H / kPi - 0.5, (lon + kPi) * W / (2 * kPi) - 0.5};
}

double default_angular_step(const EquirectGrid& grid) {
  return 2 * kPi / static_cast<double>(grid.width);
}

Tensor tangent_grid(const EquirectGrid& grid, double angular_step) {
  if (!(angular_step > 0.0) || !std::isfinite(angular_step)) {
    throw ValidationError("tangent_grid: angular_step must be positive");
  }
  const std::size_t H = grid.height, W = grid.width;
  const double t = std::tan(angular_step);
  const double lat_limit = kPi / 2 - kPi / (2.0 * static_cast<double>(H));
  const double col_per_rad = static_cast<double>(W) / (2 * kPi);

  Tensor coords({H, W, kStencilTaps, 2});
  for (std::size_t r = 0; r < H; ++r) {
    const double lat0 =
        std::clamp(pixel_to_sphere(grid, static_cast<double>(r), 0.0).lat, -lat_limit, lat_limit);
    const double sin0 = std::sin(lat0), cos0 = std::cos(lat0);

    // Offsets are independent of the column; compute once per row.
    double drow[kStencilTaps], dcol[kStencilTaps];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const std::size_t k = static_cast<std::size_t>((dy + 1) * 3 + (dx + 1));
        const double px = dx * t;
        const double py = -dy * t;  // tangent-plane y points north
        const double rho = std::hypot(px, py);
        if (rho == 0.0) {
          drow[k] = 0.0;
          dcol[k] = 0.0;
          continue;
        }
        const double c = std::atan(rho);
        const double sc = std::sin(c), cc = std::cos(c);
        const double lat = std::asin(std::clamp(cc * sin0 + py * sc * cos0 / rho, -1.0, 1.0));
        const double dlon = std::atan2(px * sc, rho * cos0 * cc - py * sin0 * sc);
        drow[k] = sphere_to_pixel(grid, lat, 0.0).row - static_cast<double>(r);
        dcol[k] = dlon * col_per_rad;
      }
    }
    for (std::size_t c = 0; c < W; ++c) {
      for (std::size_t k = 0; k < kStencilTaps; ++k) {
        const std::size_t base = ((r * W + c) * kStencilTaps + k) * 2;
        coords[base] = static_cast<double>(r) + drow[k];
        coords[base + 1] = static_cast<double>(c) + dcol[k];
      }
    }
  }
  return coords;
}

Tensor rotate_panorama(const Tensor& x, long shift) {
  if (x.ndim() == 0) throw ValidationError("rotate_panorama: scalar tensor");
  const std::size_t W = x.shape().back();
  const std::size_t rows = x.size() / W;
  const long w = static_cast<long>(W);
  const std::size_t s = static_cast<std::size_t>(((shift % w) + w) % w);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < W; ++j) out[r * W + (j + s) % W] = x[r * W + j];
  }
  return out;
}

Tensor flip_panorama(const Tensor& x) {
  if (x.ndim() == 0) throw ValidationError("flip_panorama: scalar tensor");
  const std::size_t W = x.shape().back();
  const std::size_t rows = x.size() / W;
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < W; ++j) out[r * W + (W - 1 - j)] = x[r * W + j];
  }
  return out;
}

Tensor flip_vertical(const Tensor& x) {
  if (x.ndim() != 3) throw ValidationError("flip_vertical: expected [C,H,W]");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor out(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      std::copy_n(x.ptr() + (c * H + y) * W, W, out.ptr() + (c * H + (H - 1 - y)) * W);
    }
  }
  return out;
}

}  // namespace dopnet
