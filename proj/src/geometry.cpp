// SPDX-License-Identifier: Apache-2.0
#include "svodrive/geometry.hpp"

#include <algorithm>
#include <limits>

#include "svodrive/error.hpp"

namespace svo {

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

Frame2::Frame2(Pose2 origin)
    : origin_(origin), c_(std::cos(origin.heading)), s_(std::sin(origin.heading)) {}

Vec2 Frame2::to_local(Vec2 w) const {
  const double dx = w.x - origin_.x;
  const double dy = w.y - origin_.y;
  return {c_ * dx + s_ * dy, -s_ * dx + c_ * dy};
}

Vec2 Frame2::to_world(Vec2 l) const {
  return {origin_.x + c_ * l.x - s_ * l.y, origin_.y + s_ * l.x + c_ * l.y};
}

Pose2 Frame2::to_local(Pose2 w) const {
  const Vec2 p = to_local(w.position());
  return {p.x, p.y, normalize_angle(w.heading - origin_.heading)};
}

Pose2 Frame2::to_world(Pose2 l) const {
  const Vec2 p = to_world(l.position());
  return {p.x, p.y, normalize_angle(l.heading + origin_.heading)};
}

bool polygon_contains(const Polygon& poly, Vec2 p) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    // boundary
    const Vec2 ab = b - a;
    const Vec2 ap = p - a;
    if (std::abs(ab.cross(ap)) <= 1e-12 * std::max(1.0, ab.norm()) && ap.dot(p - b) <= 0.0) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

Polyline::Polyline(std::vector<Pose2> points, double lane_width)
    : points_(std::move(points)), lane_width_(lane_width) {
  cumulative_.resize(points_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) acc += (points_[i].position() - points_[i - 1].position()).norm();
    cumulative_[i] = acc;
  }
}

Polyline Polyline::from_points(std::span<const Vec2> pts, double lane_width) {
  std::vector<Pose2> poses;
  poses.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Vec2 d;
    if (pts.size() < 2) {
      d = {1.0, 0.0};
    } else if (i + 1 < pts.size()) {
      d = pts[i + 1] - pts[i];
    } else {
      d = pts[i] - pts[i - 1];
    }
    poses.push_back({pts[i].x, pts[i].y, std::atan2(d.y, d.x)});
  }
  return Polyline(std::move(poses), lane_width);
}

PathProjection Polyline::project(Vec2 p) const {
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  if (points_.empty()) return best;
  if (points_.size() == 1) {
    best.distance = (p - points_[0].position()).norm();
    return best;
  }
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_t = 0.0;
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i].position();
    const Vec2 ab = points_[i + 1].position() - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 d = p - (a + ab * t);
    const double d2 = d.dot(d);
    if (d2 < best_d2) {
      best_d2 = d2;
      best.segment = i;
      best_t = t;
    }
  }
  const Vec2 a = points_[best.segment].position();
  const Vec2 ab = points_[best.segment + 1].position() - a;
  const double len = std::sqrt(ab.dot(ab));
  best.distance = std::sqrt(best_d2);
  best.arc_length = cumulative_[best.segment] + best_t * len;
  const double side = len > 0.0 ? ab.cross(p - a) / len : 0.0;
  best.lateral = side >= 0.0 ? best.distance : -best.distance;
  return best;
}

Pose2 Polyline::pose_at(double s) const {
  if (points_.empty()) return {};
  if (s <= 0.0 || points_.size() == 1) return points_.front();
  if (s >= length()) return points_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  // Vertices keep their stored pose so that round-off cannot flip the segment choice.
  constexpr double kSnap = 1e-9;
  if (s - cumulative_[i] < kSnap) return points_[i];
  if (cumulative_[i + 1] - s < kSnap) return points_[i + 1];
  const double seg = cumulative_[i + 1] - cumulative_[i];
  const double t = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
  const Vec2 a = points_[i].position();
  const Vec2 b = points_[i + 1].position();
  const Vec2 q = a + (b - a) * t;
  return {q.x, q.y, std::atan2(b.y - a.y, b.x - a.x)};
}

Polyline Polyline::resampled(double spacing) const {
  if (spacing <= 0.0) throw InputDomainError("resample spacing must be positive");
  if (points_.size() < 2) return *this;
  const double total = length();
  const auto n = static_cast<std::size_t>(std::floor(total / spacing));
  std::vector<Pose2> out;
  out.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(pose_at(static_cast<double>(k) * spacing));
  if (total - static_cast<double>(n) * spacing > 1e-9) out.push_back(pose_at(total));
  return Polyline(std::move(out), lane_width_);
}

std::array<Vec2, 4> rectangle_corners(Pose2 pose, double length, double width) {
  const double c = std::cos(pose.heading);
  const double s = std::sin(pose.heading);
  const Vec2 f{c * length / 2.0, s * length / 2.0};
  const Vec2 l{-s * width / 2.0, c * width / 2.0};
  const Vec2 o = pose.position();
  return {o + f - l, o + f + l, o - f + l, o - f - l};
}

namespace {

bool separated_on(const Vec2& axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const Vec2& p : a) {
    const double d = axis.dot(p);
    amin = std::min(amin, d);
    amax = std::max(amax, d);
  }
  for (const Vec2& p : b) {
    const double d = axis.dot(p);
    bmin = std::min(bmin, d);
    bmax = std::max(bmax, d);
  }
  return amax < bmin || bmax < amin;
}

}  // namespace

bool rectangles_overlap(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  for (const auto* r : {&a, &b}) {
    for (int k = 0; k < 2; ++k) {
      const Vec2 e = (*r)[k + 1] - (*r)[k];
      const Vec2 axis{-e.y, e.x};
      if (separated_on(axis, a, b)) return false;
    }
  }
  return true;
}

}  // namespace svo
