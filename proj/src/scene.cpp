#include "dopnet/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "dopnet/image_io.hpp"
#include "dopnet/json_io.hpp"

namespace dopnet {
namespace {

constexpr int kMaxAttempts = 10000;
constexpr double kNotchMin = 0.3;     // smallest notch side, m
constexpr double kNotchMargin = 0.5;  // clearance between a notch and the camera axes, m

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double sgn(double v) { return v < 0 ? -1.0 : 1.0; }

bool walls_wide_enough(const std::vector<Point2>& poly, double min_angle) {
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 p = poly[i], q = poly[(i + 1) % poly.size()];
    if (std::atan2(std::abs(cross(p, q)), dot(p, q)) < min_angle) return false;
  }
  return true;
}

std::vector<Point2> candidate_polygon(std::mt19937_64& rng, const SceneSpec& s) {
  const double x0 = -uniform(rng, s.min_extent_m, s.max_extent_m);
  const double x1 = uniform(rng, s.min_extent_m, s.max_extent_m);
  const double z0 = -uniform(rng, s.min_extent_m, s.max_extent_m);
  const double z1 = uniform(rng, s.min_extent_m, s.max_extent_m);
  const std::array<Point2, 4> rect{{{x0, z0}, {x1, z0}, {x1, z1}, {x0, z1}}};

  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::shuffle(order.begin(), order.end(), rng);
  std::array<bool, 4> notched{};
  for (std::size_t i = 0; i < (s.corners - 4) / 2; ++i) notched[order[i]] = true;

  std::vector<Point2> poly;
  for (std::size_t c = 0; c < 4; ++c) {
    const Point2 p = rect[c];
    if (!notched[c]) {
      poly.push_back(p);
      continue;
    }
    const double a = uniform(rng, kNotchMin, std::abs(p.x) - kNotchMargin);
    const double b = uniform(rng, kNotchMin, std::abs(p.z) - kNotchMargin);
    const Point2 along_x{p.x - sgn(p.x) * a, p.z};
    const Point2 along_z{p.x, p.z - sgn(p.z) * b};
    const Point2 inner{along_x.x, along_z.z};
    // Even corners are entered along a z-aligned edge, odd ones along x.
    if (c % 2 == 0) poly.insert(poly.end(), {along_z, inner, along_x});
    else poly.insert(poly.end(), {along_x, inner, along_z});
  }
  return poly;
}

std::array<double, 3> wall_color(const Point2& p, const Point2& q) {
  const Point2 t = q - p;
  const double normal = std::atan2(t.z, -t.x);
  const double shade = 0.6 + 0.3 * std::cos(normal - 0.7);
  return {0.78 * shade, 0.74 * shade, 0.66 * shade};
}

}  // namespace

void SceneSpec::validate() const {
  if (n_rooms == 0) throw ValidationError("scene: need at least one room");
  if (corners < 4 || corners > 12 || corners % 2 != 0) {
    throw ValidationError("scene: corners must be even and within [4, 12], got " +
                          std::to_string(corners));
  }
  if (!(min_extent_m >= kNotchMin + kNotchMargin + 0.1) || !(max_extent_m > min_extent_m)) {
    throw ValidationError("scene: invalid extent range");
  }
  if (!(min_height_m > camera_height_m) || !(max_height_m >= min_height_m)) {
    throw ValidationError("scene: invalid height range");
  }
}

Layout random_manhattan_room(std::mt19937_64& rng, const SceneSpec& spec) {
  spec.validate();
  const double min_angle = spec.min_wall_columns * 2.0 * kPi / static_cast<double>(spec.grid.width);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<Point2> poly = candidate_polygon(rng, spec);
    const double h = uniform(rng, spec.min_height_m, spec.max_height_m);
    if (!walls_wide_enough(poly, min_angle)) continue;
    return Layout(std::move(poly), h, spec.camera_height_m);
  }
  throw ValidationError("scene: no room satisfied the wall-width constraint");
}

Tensor render_room(const Layout& layout, const EquirectGrid& grid) {
  const std::size_t H = grid.height, W = grid.width;
  const auto& poly = layout.floor_polygon();
  std::vector<std::size_t> edges;
  const std::vector<double> depth = raycast_polygon(poly, W, &edges);
  const BoundaryPair bp = depth_to_boundaries(
      {Tensor({W}, depth), layout.room_height()}, layout.camera_height(), grid);
  const Tensor labels = rasterize_labels(layout, grid);

  constexpr std::array<double, 3> kCeiling{0.93, 0.92, 0.88};
  constexpr std::array<double, 3> kFloor{0.42, 0.33, 0.25};
  constexpr double kLine = 0.08;

  Tensor img({3, H, W});
  for (std::size_t j = 0; j < W; ++j) {
    const std::size_t e = edges[j];
    const auto wall = wall_color(poly[e], poly[(e + 1) % poly.size()]);
    const bool corner = edges[(j + W - 1) % W] != e;
    for (std::size_t r = 0; r < H; ++r) {
      const double row = static_cast<double>(r);
      const auto label = static_cast<SurfaceLabel>(static_cast<int>(labels[r * W + j]));
      std::array<double, 3> c = label == SurfaceLabel::kCeiling ? kCeiling
                                : label == SurfaceLabel::kFloor ? kFloor
                                                                : wall;
      const bool on_boundary =
          std::abs(row - bp.ceiling_rows[j]) < 1.0 || std::abs(row - bp.floor_rows[j]) < 1.0;
      if (on_boundary || (corner && label == SurfaceLabel::kWall)) c = {kLine, kLine, kLine};
      for (std::size_t ch = 0; ch < 3; ++ch) img[(ch * H + r) * W + j] = c[ch];
    }
  }
  return img;
}

RoomFiles room_files(const std::filesystem::path& dir, std::size_t index) {
  char stem[32];
  std::snprintf(stem, sizeof stem, "room_%04zu", index);
  const std::string s = stem;
  return {dir / (s + ".layout.json"), dir / (s + ".png"), dir / (s + ".depth.json"),
          dir / (s + ".mask.png")};
}

std::vector<RoomFiles> generate_dataset(const SceneSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  std::mt19937_64 rng(spec.seed);
  std::vector<RoomFiles> out;
  for (std::size_t i = 0; i < spec.n_rooms; ++i) {
    const Layout layout = random_manhattan_room(rng, spec);
    const RoomFiles f = room_files(dir, i);
    write_json_file(f.layout, layout_to_json(layout));
    write_png(f.image, render_room(layout, spec.grid));
    write_json_file(f.depth, horizon_depth_to_json(raycast_depth(layout, spec.grid.width)));
    const PlaneMask mask = rasterize_plane_mask(layout, spec.grid);
    write_png(f.mask, mask.mask.reshaped({1, spec.grid.height, spec.grid.width}));
    out.push_back(f);
  }
  return out;
}

std::vector<RoomFiles> list_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("dataset directory not found: " + dir.string());
  }
  std::vector<std::size_t> indices;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    std::size_t idx = 0;
    char tail[32] = {};
    if (std::sscanf(name.c_str(), "room_%zu.layout.jso%1s", &idx, tail) == 2 &&
        name == room_files({}, idx).layout.string()) {
      indices.push_back(idx);
    }
  }
  if (indices.empty()) throw ValidationError("no room_*.layout.json files in " + dir.string());
  std::sort(indices.begin(), indices.end());
  std::vector<RoomFiles> out;
  for (std::size_t i : indices) out.push_back(room_files(dir, i));
  return out;
}

}  // namespace dopnet
