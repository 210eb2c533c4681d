#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dopnet {

/// Floor-plan point in meters: x to the right, z forward (image center).
struct Point2 {
  double x = 0.0;
  double z = 0.0;
};

inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.z - b.z}; }
inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.z + b.z}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.z}; }
inline double cross(Point2 a, Point2 b) { return a.x * b.z - a.z * b.x; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.z * b.z; }

/// Shoelace area with (x, z) as a right-handed plane; positive for CCW.
double signed_area(std::span<const Point2> poly);

/// No two non-adjacent edges touch and adjacent edges do not fold back.
bool is_simple(std::span<const Point2> poly);

/// Strictly interior: inside by crossing parity and farther than `margin`
/// from every edge.
bool strictly_inside(std::span<const Point2> poly, Point2 p, double margin = 1e-12);

double point_segment_distance(Point2 p, Point2 a, Point2 b);

/// Drops consecutive vertices closer than `tol` (including across the seam).
std::vector<Point2> weld_vertices(std::span<const Point2> poly, double tol = 1e-9);

/// Area of the intersection of two simple polygons of any orientation.
///
/// Each polygon is decomposed into a signed triangle fan around `pivot`;
/// the intersection area is the signed sum of pairwise convex-triangle
/// clips (Sutherland-Hodgman). Valid for concave input.
double intersection_area(std::span<const Point2> a, std::span<const Point2> b,
                         Point2 pivot = {0.0, 0.0});

}  // namespace dopnet
