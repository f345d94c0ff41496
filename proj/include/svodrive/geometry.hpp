// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace svo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const { return std::sqrt(x * x + y * y); }
  bool operator==(const Vec2&) const = default;
};

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose2&) const = default;
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Rigid 2-D frame: maps world coordinates into the frame anchored at `origin`.
class Frame2 {
 public:
  explicit Frame2(Pose2 origin);

  Vec2 to_local(Vec2 world) const;
  Vec2 to_world(Vec2 local) const;
  Pose2 to_local(Pose2 world) const;
  Pose2 to_world(Pose2 local) const;

 private:
  Pose2 origin_;
  double c_;
  double s_;
};

using Polygon = std::vector<Vec2>;

/// Even-odd point-in-polygon test; points on the boundary count as inside.
bool polygon_contains(const Polygon& poly, Vec2 p);

/// Closest-point projection of a point onto a polyline.
struct PathProjection {
  double arc_length = 0.0;  // along the polyline, from its first point
  double lateral = 0.0;     // signed, positive to the left of travel
  double distance = 0.0;    // unsigned distance to the closest point
  std::size_t segment = 0;
};

/// Polyline of poses with a lane width; the basic element of road geometry.
class Polyline {
 public:
  Polyline() = default;
  Polyline(std::vector<Pose2> points, double lane_width);
  /// Builds a polyline from positions, deriving headings from segment tangents.
  static Polyline from_points(std::span<const Vec2> pts, double lane_width);

  const std::vector<Pose2>& points() const { return points_; }
  double lane_width() const { return lane_width_; }
  std::size_t size() const { return points_.size(); }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  /// Arc length at each vertex.
  const std::vector<double>& cumulative() const { return cumulative_; }

  PathProjection project(Vec2 p) const;
  /// Pose at arc length `s`, clamped to the ends.
  Pose2 pose_at(double s) const;
  /// Re-samples at uniform spacing; the last vertex is always kept.
  Polyline resampled(double spacing) const;

 private:
  std::vector<Pose2> points_;
  std::vector<double> cumulative_;
  double lane_width_ = 0.0;
};

/// Corners of an oriented rectangle centred on `pose`, counter-clockwise.
std::array<Vec2, 4> rectangle_corners(Pose2 pose, double length, double width);

/// Separating-axis overlap test for two oriented rectangles (touching counts).
bool rectangles_overlap(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b);

}  // namespace svo
