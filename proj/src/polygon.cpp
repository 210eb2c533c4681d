#include "dopnet/polygon.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace dopnet {

double signed_area(std::span<const Point2> poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) s += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * s;
}

namespace {

int orient(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  const double scale = std::max({std::abs(b.x - a.x), std::abs(b.z - a.z),
                                 std::abs(c.x - a.x), std::abs(c.z - a.z), 1e-300});
  if (std::abs(v) <= 1e-14 * scale * scale) return 0;
  return v > 0 ? 1 : -1;
}

bool on_segment(Point2 p, Point2 a, Point2 b) {
  return std::min(a.x, b.x) - 1e-15 <= p.x && p.x <= std::max(a.x, b.x) + 1e-15 &&
         std::min(a.z, b.z) - 1e-15 <= p.z && p.z <= std::max(a.z, b.z) + 1e-15;
}

bool segments_touch(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const int o1 = orient(p1, p2, q1), o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1), o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

using Poly = std::vector<Point2>;

// Clip a convex polygon by the half-plane to the left of a->b.
void clip_half_plane(const Poly& in, Point2 a, Point2 b, Poly& out) {
  out.clear();
  const std::size_t n = in.size();
  if (n == 0) return;
  const Point2 e = b - a;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = in[i], q = in[(i + 1) % n];
    const double dp = cross(e, p - a), dq = cross(e, q - a);
    if (dp >= 0) out.push_back(p);
    if ((dp >= 0) != (dq >= 0)) {
      const double t = dp / (dp - dq);
      out.push_back(p + t * (q - p));
    }
  }
}

struct Tri {
  std::array<Point2, 3> v;  // CCW
  double sign;              // +1 or -1
  double minx, maxx, minz, maxz;
};

std::vector<Tri> fan(std::span<const Point2> poly, Point2 pivot) {
  std::vector<Tri> tris;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    Point2 a = pivot, b = poly[i], c = poly[(i + 1) % n];
    const double area2 = cross(b - a, c - a);
    if (area2 == 0.0) continue;
    double sign = 1.0;
    if (area2 < 0) {
      std::swap(b, c);
      sign = -1.0;
    }
    Tri t{{a, b, c}, sign, 0, 0, 0, 0};
    t.minx = std::min({a.x, b.x, c.x});
    t.maxx = std::max({a.x, b.x, c.x});
    t.minz = std::min({a.z, b.z, c.z});
    t.maxz = std::max({a.z, b.z, c.z});
    tris.push_back(t);
  }
  return tris;
}

}  // namespace

bool is_simple(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a1 = poly[i], a2 = poly[(i + 1) % n];
    if (a1.x == a2.x && a1.z == a2.z) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point2 b1 = poly[j], b2 = poly[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) {
        // shared vertex; reject only a fold-back onto the other edge
        const Point2 shared = (j == i + 1) ? a2 : a1;
        const Point2 pa = (j == i + 1) ? a1 : a2;
        const Point2 pb = (j == i + 1) ? b2 : b1;
        if (orient(pa, shared, pb) == 0 && dot(pa - shared, pb - shared) > 0) return false;
        continue;
      }
      if (segments_touch(a1, a2, b1, b2)) return false;
    }
  }
  return true;
}

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Point2 d = p - (a + t * ab);
  return std::hypot(d.x, d.z);
}

bool strictly_inside(std::span<const Point2> poly, Point2 p, double margin) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if (point_segment_distance(p, a, b) <= margin) return false;
    if ((a.z > p.z) != (b.z > p.z)) {
      const double x = (b.x - a.x) * (p.z - a.z) / (b.z - a.z) + a.x;
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

std::vector<Point2> weld_vertices(std::span<const Point2> poly, double tol) {
  std::vector<Point2> out;
  for (const Point2& p : poly) {
    if (!out.empty() && std::hypot(p.x - out.back().x, p.z - out.back().z) <= tol) continue;
    out.push_back(p);
  }
  while (out.size() > 1 &&
         std::hypot(out.front().x - out.back().x, out.front().z - out.back().z) <= tol) {
    out.pop_back();
  }
  return out;
}

double intersection_area(std::span<const Point2> a, std::span<const Point2> b, Point2 pivot) {
  const auto wa = weld_vertices(a);
  const auto wb = weld_vertices(b);
  const auto ta = fan(wa, pivot);
  const auto tb = fan(wb, pivot);
  const double orient_a = signed_area(wa) >= 0 ? 1.0 : -1.0;
  const double orient_b = signed_area(wb) >= 0 ? 1.0 : -1.0;

  Poly cur, next;
  cur.reserve(9);
  next.reserve(9);
  double total = 0.0;
  for (const Tri& s : ta) {
    for (const Tri& c : tb) {
      if (s.maxx <= c.minx || c.maxx <= s.minx || s.maxz <= c.minz || c.maxz <= s.minz) {
        continue;
      }
      cur.assign(s.v.begin(), s.v.end());
      for (int e = 0; e < 3 && !cur.empty(); ++e) {
        clip_half_plane(cur, c.v[e], c.v[(e + 1) % 3], next);
        std::swap(cur, next);
      }
      if (cur.size() < 3) continue;
      total += s.sign * c.sign * signed_area(cur);
    }
  }
  return std::max(0.0, total * orient_a * orient_b);
}

}  // namespace dopnet
