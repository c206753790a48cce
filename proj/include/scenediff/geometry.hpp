#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace scenediff {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

/// Pose and motion of one agent at one timestep. Heading is measured
/// counterclockwise from +x and is kept normalized to (-pi, pi].
struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;

  AgentState() = default;
  AgentState(double x_, double y_, double v_, double theta_);

  Vec2 position() const { return {x, y}; }
};

/// Vehicle footprint. `length` runs along the heading axis, `width` across it.
struct VehicleDims {
  double width = 2.0;
  double length = 4.5;

  VehicleDims() = default;
  VehicleDims(double width_, double length_);

  /// Half the footprint diagonal; the circumscribed-circle radius used for
  /// the collision safety distance.
  double radius() const { return 0.5 * std::hypot(width, length); }
};

struct OrientedBox {
  Vec2 center;
  double width = 0.0;
  double length = 0.0;
  double heading = 0.0;

  OrientedBox() = default;
  OrientedBox(Vec2 center_, double width_, double length_, double heading_);

  /// Vertices in counterclockwise order.
  std::array<Vec2, 4> corners() const;
  double area() const { return width * length; }
  bool contains(Vec2 p) const;
};

/// Maps a world point into the frame of state `s`: s's position becomes the
/// origin and s's heading becomes +y.
Vec2 transform_to_ego(Vec2 p, const AgentState& s);

/// Inverse of transform_to_ego.
Vec2 ego_to_world(Vec2 p, const AgentState& s);

/// Heading relative to s, normalized to (-pi, pi].
double transform_heading(double theta, const AgentState& s);

/// Corners of the d-sized box centered at s with its long axis along
/// s.theta, counterclockwise.
std::array<Vec2, 4> box_corners(const AgentState& s, const VehicleDims& d);

/// Exact intersection-over-union of two oriented rectangles via convex
/// polygon clipping. Throws on zero-area boxes.
double box_iou(const OrientedBox& a, const OrientedBox& b);

/// Rebuilds the box from four corners in the order corners() emits.
OrientedBox box_from_corners(const std::array<Vec2, 4>& corners);

/// Signed shoelace area (positive for counterclockwise rings).
double polygon_area(std::span<const Vec2> ring);

/// Clips a convex subject polygon against a convex counterclockwise clip
/// polygon (Sutherland-Hodgman).
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

/// Sum of Euclidean distances between consecutive points; 0 for one point.
/// Throws on an empty sequence.
double path_length(std::span<const Vec2> positions);

}  // namespace scenediff
