#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dopnet/layout.hpp"
#include "dopnet/sphere.hpp"
#include "dopnet/tensor.hpp"

namespace dopnet {

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t n_rooms = 1;
  std::size_t corners = 4;  // even, 4..12
  double min_extent_m = 1.5;  // distance from the camera to each outer wall
  double max_extent_m = 4.0;
  double min_height_m = 2.6;
  double max_height_m = 3.4;
  double camera_height_m = kDefaultCameraHeight;
  EquirectGrid grid{256, 512};
  /// Every wall must subtend at least this many columns of `grid`.
  double min_wall_columns = 4.0;

  void validate() const;
};

/// Random Manhattan room: an axis-aligned rectangle around the camera with
/// (corners - 4) / 2 rectangular notches cut from distinct outer corners.
/// Rejection sampling keeps the camera inside and every wall visible.
Layout random_manhattan_room(std::mt19937_64& rng, const SceneSpec& spec);

/// Flat-shaded synthetic panorama [3,H,W]: one tone per surface class,
/// per-wall shading by orientation and dark boundary/corner lines.
Tensor render_room(const Layout& layout, const EquirectGrid& grid);

struct RoomFiles {
  std::filesystem::path layout;  // <stem>.layout.json
  std::filesystem::path image;   // <stem>.png
  std::filesystem::path depth;   // <stem>.depth.json
  std::filesystem::path mask;    // <stem>.mask.png
};
RoomFiles room_files(const std::filesystem::path& dir, std::size_t index);

/// Writes the four files of every room; returns them in room order.
std::vector<RoomFiles> generate_dataset(const SceneSpec& spec, const std::filesystem::path& dir);

/// Rooms found in a generated directory, sorted by index.
std::vector<RoomFiles> list_dataset(const std::filesystem::path& dir);

}  // namespace dopnet
