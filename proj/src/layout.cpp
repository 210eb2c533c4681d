#include "dopnet/layout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dopnet {

Layout::Layout(std::vector<Point2> floor_polygon, double room_height_m, double camera_height_m)
    : polygon_(std::move(floor_polygon)),
      room_height_(room_height_m),
      camera_height_(camera_height_m) {
  if (polygon_.size() < 4) {
    throw ValidationError("layout: floor polygon needs at least 4 vertices, got " +
                          std::to_string(polygon_.size()));
  }
  for (const Point2& p : polygon_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.z)) {
      throw ValidationError("layout: non-finite vertex");
    }
  }
  if (!(camera_height_ > 0.0) || !(room_height_ > camera_height_) ||
      !std::isfinite(room_height_)) {
    throw ValidationError("layout: need 0 < camera_height < room_height (got camera " +
                          std::to_string(camera_height_) + ", room " +
                          std::to_string(room_height_) + ")");
  }
  if (!(signed_area(polygon_) > 0.0)) {
    throw ValidationError("layout: floor polygon must be counter-clockwise");
  }
  if (!is_simple(polygon_)) throw ValidationError("layout: floor polygon is not simple");
  if (!strictly_inside(polygon_, {0.0, 0.0})) {
    throw ValidationError("layout: camera (0,0) is not strictly inside the floor polygon");
  }
}

double column_longitude(std::size_t j, std::size_t width) {
  return 2 * kPi * (static_cast<double>(j) + 0.5) / static_cast<double>(width) - kPi;
}

std::vector<double> raycast_polygon(std::span<const Point2> polygon, std::size_t width,
                                    std::vector<std::size_t>* hit_edges) {
  const std::size_t n = polygon.size();
  std::vector<double> depth(width);
  if (hit_edges) hit_edges->assign(width, 0);
  for (std::size_t j = 0; j < width; ++j) {
    const double u = column_longitude(j, width);
    const Point2 d{std::sin(u), std::cos(u)};
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_edge = 0;
    for (std::size_t e = 0; e < n; ++e) {
      const Point2 p = polygon[e], q = polygon[(e + 1) % n];
      const Point2 seg = q - p;
      const double denom = cross(d, seg);
      if (denom == 0.0) continue;
      // origin + t d = p + s seg
      const double t = cross(p, seg) / denom;
      const double s = cross(p, d) / denom;
      if (t > 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12 && t < best) {
        best = t;
        best_edge = e;
      }
    }
    if (!std::isfinite(best)) {
      throw ValidationError("raycast: ray at column " + std::to_string(j) +
                            " exits the polygon (camera outside?)");
    }
    depth[j] = best;
    if (hit_edges) (*hit_edges)[j] = best_edge;
  }
  return depth;
}

HorizonDepth raycast_depth(const Layout& layout, std::size_t width) {
  if (width == 0) throw ValidationError("raycast_depth: width must be positive");
  auto d = raycast_polygon(layout.floor_polygon(), width);
  return {Tensor({width}, std::move(d)), layout.room_height()};
}

BoundaryPair depth_to_boundaries(const HorizonDepth& hd, double camera_height_m,
                                 const EquirectGrid& grid) {
  const std::size_t W = hd.depth.size();
  BoundaryPair bp{Tensor({W}), Tensor({W})};
  const double above = hd.room_height_m - camera_height_m;
  for (std::size_t j = 0; j < W; ++j) {
    const double d = hd.depth[j];
    if (!(d > 0.0)) throw ValidationError("depth_to_boundaries: depth must be positive");
    const double v_floor = -std::atan(camera_height_m / d);
    const double v_ceil = std::atan(above / d);
    bp.floor_rows[j] = sphere_to_pixel(grid, v_floor, 0.0).row;
    bp.ceiling_rows[j] = sphere_to_pixel(grid, v_ceil, 0.0).row;
  }
  return bp;
}

HorizonDepth boundaries_to_depth(const BoundaryPair& bp, double camera_height_m,
                                 const EquirectGrid& grid) {
  const std::size_t W = bp.floor_rows.size();
  if (bp.ceiling_rows.size() != W || W == 0) {
    throw ValidationError("boundaries_to_depth: boundary lengths differ");
  }
  HorizonDepth hd{Tensor({W}), 0.0};
  double height_sum = 0.0;
  for (std::size_t j = 0; j < W; ++j) {
    const double v_floor = pixel_to_sphere(grid, bp.floor_rows[j], 0.0).lat;
    const double v_ceil = pixel_to_sphere(grid, bp.ceiling_rows[j], 0.0).lat;
    if (!(v_floor < 0.0) || !(v_ceil > 0.0)) {
      throw ValidationError("boundaries_to_depth: boundary on the wrong side of the horizon at column " +
                            std::to_string(j));
    }
    const double tf = std::tan(-v_floor);
    hd.depth[j] = camera_height_m / tf;
    height_sum += camera_height_m * (1.0 + std::tan(v_ceil) / tf);
  }
  hd.room_height_m = height_sum / static_cast<double>(W);
  return hd;
}

Tensor rasterize_labels(const Layout& layout, const EquirectGrid& grid) {
  const std::size_t H = grid.height, W = grid.width;
  const HorizonDepth hd = raycast_depth(layout, W);
  const BoundaryPair bp = depth_to_boundaries(hd, layout.camera_height(), grid);
  Tensor labels({H, W});
  for (std::size_t j = 0; j < W; ++j) {
    for (std::size_t r = 0; r < H; ++r) {
      const double row = static_cast<double>(r);
      SurfaceLabel l = SurfaceLabel::kWall;
      if (row < bp.ceiling_rows[j]) l = SurfaceLabel::kCeiling;
      else if (row > bp.floor_rows[j]) l = SurfaceLabel::kFloor;
      labels[r * W + j] = static_cast<double>(l);
    }
  }
  return labels;
}

PlaneMask rasterize_plane_mask(const Layout& layout, const EquirectGrid& grid) {
  Tensor labels = rasterize_labels(layout, grid);
  for (double& v : labels.data()) v = (v == static_cast<double>(SurfaceLabel::kWall)) ? 0.0 : 1.0;
  return {std::move(labels)};
}

namespace {

struct Chord {
  double a, b;  // normal angle = atan2(a, b)
  double s_next, c_next, s_prev, c_prev;
};

Chord chord_at(const Tensor& depth, std::size_t j) {
  const std::size_t W = depth.size();
  const std::size_t jn = (j + 1) % W, jp = (j + W - 1) % W;
  Chord ch{};
  ch.s_next = std::sin(column_longitude(jn, W));
  ch.c_next = std::cos(column_longitude(jn, W));
  ch.s_prev = std::sin(column_longitude(jp, W));
  ch.c_prev = std::cos(column_longitude(jp, W));
  const double tx = depth[jn] * ch.s_next - depth[jp] * ch.s_prev;
  const double tz = depth[jn] * ch.c_next - depth[jp] * ch.c_prev;
  // outward normal (-tz, tx) of the chord p[j+1] - p[j-1]
  ch.a = -tz;
  ch.b = tx;
  return ch;
}

}  // namespace

NormalsGradients depth_normals_gradients(const Tensor& depth) {
  const std::size_t W = depth.size();
  if (W < 3) throw ValidationError("depth_normals_gradients: need at least 3 columns");
  NormalsGradients out{Tensor({W}), Tensor({W})};
  for (std::size_t j = 0; j < W; ++j) {
    out.gradients[j] = 0.5 * (depth[(j + 1) % W] - depth[(j + W - 1) % W]);
    const Chord ch = chord_at(depth, j);
    out.normals[j] = std::atan2(ch.a, ch.b);
  }
  return out;
}

Tensor depth_normals_gradients_backward(const Tensor& depth, const Tensor& g_normals,
                                        const Tensor& g_gradients) {
  const std::size_t W = depth.size();
  require_shape(g_normals, {W}, "normals cotangent");
  require_shape(g_gradients, {W}, "gradients cotangent");
  Tensor gd({W});
  for (std::size_t j = 0; j < W; ++j) {
    const std::size_t jn = (j + 1) % W, jp = (j + W - 1) % W;
    gd[jn] += 0.5 * g_gradients[j];
    gd[jp] -= 0.5 * g_gradients[j];

    const Chord ch = chord_at(depth, j);
    const double r2 = ch.a * ch.a + ch.b * ch.b;
    if (r2 == 0.0) continue;
    const double da = ch.b / r2, db = -ch.a / r2;
    // a = -(d_n c_n - d_p c_p), b = d_n s_n - d_p s_p
    gd[jn] += g_normals[j] * (-da * ch.c_next + db * ch.s_next);
    gd[jp] += g_normals[j] * (da * ch.c_prev - db * ch.s_prev);
  }
  return gd;
}

double wrap_angle(double a) {
  a = std::remainder(a, 2 * kPi);
  if (a <= -kPi) a += 2 * kPi;
  return a;
}

Layout layout_from_prediction(const Prediction& pred, double camera_height_m) {
  const std::size_t W = pred.horizon_depth.size();
  if (!(pred.room_height_m > 0.0) || !std::isfinite(pred.room_height_m)) {
    throw ValidationError("layout_from_prediction: room height must be positive");
  }
  if (W < 4) throw ValidationError("layout_from_prediction: need at least 4 columns");
  std::vector<Point2> poly(W);
  for (std::size_t j = 0; j < W; ++j) {
    const double d = pred.horizon_depth[j];
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw ValidationError("layout_from_prediction: depth must be positive and finite");
    }
    const double u = column_longitude(j, W);
    // increasing longitude runs clockwise in (x, z); store reversed
    poly[W - 1 - j] = {d * std::sin(u), d * std::cos(u)};
  }
  return Layout(std::move(poly), pred.room_height_m, camera_height_m);
}

Layout extract_corners(const Layout& dense, double collinear_tol) {
  const auto& v = dense.floor_polygon();
  const std::size_t n = v.size();

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 prev = v[(i + n - 1) % n], next = v[(i + 1) % n];
    const Point2 seg = next - prev;
    const double len = std::hypot(seg.x, seg.z);
    const double dist = len > 0 ? std::abs(cross(seg, v[i] - prev)) / len : 0.0;
    if (dist > collinear_tol) kept.push_back(i);
  }
  if (kept.size() < 4) return dense;

  const std::size_t m = kept.size();
  // edge e joins kept[e] -> kept[e+1]; one-index spans are chamfers
  std::vector<bool> chamfer(m);
  for (std::size_t e = 0; e < m; ++e) {
    const std::size_t span = (kept[(e + 1) % m] + n - kept[e]) % n;
    chamfer[e] = span == 1;
  }

  std::vector<Point2> corners;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t e_in = (k + m - 1) % m, e_out = k;
    if (chamfer[e_in] && !chamfer[(e_in + m - 1) % m] && !chamfer[e_out]) {
      continue;  // merged when its partner was visited
    }
    const bool mergeable =
        chamfer[e_out] && !chamfer[e_in] && !chamfer[(k + 1) % m];
    if (!mergeable) {
      corners.push_back(v[kept[k]]);
      continue;
    }
    // wall A: kept[k-1] -> kept[k]; wall B: kept[k+1] -> kept[k+2]
    const Point2 a0 = v[kept[(k + m - 1) % m]], a1 = v[kept[k]];
    const Point2 b0 = v[kept[(k + 1) % m]], b1 = v[kept[(k + 2) % m]];
    const Point2 da = a1 - a0, db = b1 - b0;
    const double den = cross(da, db);
    if (std::abs(den) < 1e-12 * std::hypot(da.x, da.z) * std::hypot(db.x, db.z)) {
      corners.push_back(a1);
      corners.push_back(b0);
      continue;
    }
    const double t = cross(b0 - a0, db) / den;
    corners.push_back(a0 + t * da);
  }
  if (corners.size() < 4) return dense;
  return Layout(std::move(corners), dense.room_height(), dense.camera_height());
}

Tensor resample_columns(const Tensor& signal, std::size_t width) {
  const std::size_t W = signal.size();
  if (W == 0 || width == 0) throw ValidationError("resample_columns: empty signal");
  Tensor out({width});
  const double ratio = static_cast<double>(W) / static_cast<double>(width);
  for (std::size_t j = 0; j < width; ++j) {
    const double x = (static_cast<double>(j) + 0.5) * ratio - 0.5;
    const double xf = std::floor(x);
    const double a = x - xf;
    const long long w = static_cast<long long>(W);
    const long long i0 = ((static_cast<long long>(xf) % w) + w) % w;
    const auto i1 = (i0 + 1) % w;
    out[j] = (1 - a) * signal[static_cast<std::size_t>(i0)] + a * signal[static_cast<std::size_t>(i1)];
  }
  return out;
}

}  // namespace dopnet
