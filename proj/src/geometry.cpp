#include "scenediff/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace scenediff {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

double normalize_angle(double theta) {
  double a = std::fmod(theta, 2.0 * kPi);
  if (a <= -kPi) {
    a += 2.0 * kPi;
  } else if (a > kPi) {
    a -= 2.0 * kPi;
  }
  return a;
}

AgentState::AgentState(double x_, double y_, double v_, double theta_)
    : x(x_), y(y_), v(v_), theta(normalize_angle(theta_)) {
  require_finite(x_, "x");
  require_finite(y_, "y");
  require_finite(v_, "v");
  require_finite(theta_, "theta");
  if (v < 0.0) {
    throw std::invalid_argument("speed must be >= 0");
  }
}

VehicleDims::VehicleDims(double width_, double length_) : width(width_), length(length_) {
  if (!(width > 0.0) || !(length > 0.0)) {
    throw std::invalid_argument("vehicle dimensions must be positive");
  }
}

OrientedBox::OrientedBox(Vec2 center_, double width_, double length_, double heading_)
    : center(center_), width(width_), length(length_), heading(normalize_angle(heading_)) {
  if (!(width > 0.0) || !(length > 0.0)) {
    throw std::invalid_argument("box dimensions must be positive");
  }
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 along{std::cos(heading), std::sin(heading)};
  const Vec2 perp{-along.y, along.x};
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  return {
      center + along * hl + perp * hw,
      center - along * hl + perp * hw,
      center - along * hl - perp * hw,
      center + along * hl - perp * hw,
  };
}

bool OrientedBox::contains(Vec2 p) const {
  const Vec2 along{std::cos(heading), std::sin(heading)};
  const Vec2 perp{-along.y, along.x};
  const Vec2 d = p - center;
  return std::abs(d.dot(along)) <= 0.5 * length && std::abs(d.dot(perp)) <= 0.5 * width;
}

Vec2 transform_to_ego(Vec2 p, const AgentState& s) {
  require_finite(p.x, "point.x");
  require_finite(p.y, "point.y");
  const double st = std::sin(s.theta);
  const double ct = std::cos(s.theta);
  const double dx = p.x - s.x;
  const double dy = p.y - s.y;
  return {st * dx - ct * dy, ct * dx + st * dy};
}

Vec2 ego_to_world(Vec2 p, const AgentState& s) {
  const double st = std::sin(s.theta);
  const double ct = std::cos(s.theta);
  return {s.x + st * p.x + ct * p.y, s.y - ct * p.x + st * p.y};
}

double transform_heading(double theta, const AgentState& s) {
  return normalize_angle(theta - s.theta);
}

std::array<Vec2, 4> box_corners(const AgentState& s, const VehicleDims& d) {
  if (!(d.width > 0.0) || !(d.length > 0.0)) {
    throw std::invalid_argument("vehicle dimensions must be positive");
  }
  return OrientedBox({s.x, s.y}, d.width, d.length, s.theta).corners();
}

OrientedBox box_from_corners(const std::array<Vec2, 4>& corners) {
  const Vec2 center = (corners[0] + corners[1] + corners[2] + corners[3]) * 0.25;
  const Vec2 along = corners[0] - corners[1];
  const double length = along.norm();
  const double width = (corners[1] - corners[2]).norm();
  return OrientedBox(center, width, length, std::atan2(along.y, along.x));
}

double polygon_area(std::span<const Vec2> ring) {
  if (ring.size() < 3) {
    return 0.0;
  }
  double twice = 0.0;
  for (size_t i = 0; i < ring.size(); ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[(i + 1) % ring.size()];
    twice += a.cross(b);
  }
  return 0.5 * twice;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  for (size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Vec2 edge_a = clip[i];
    const Vec2 edge_b = clip[(i + 1) % clip.size()];
    const Vec2 edge = edge_b - edge_a;

    std::vector<Vec2> input;
    input.swap(output);
    // Inside = left of the directed edge for a counterclockwise clip ring.
    auto side = [&](const Vec2& p) { return edge.cross(p - edge_a); };
    for (size_t j = 0; j < input.size(); ++j) {
      const Vec2 cur = input[j];
      const Vec2 prev = input[(j + input.size() - 1) % input.size()];
      const double cur_side = side(cur);
      const double prev_side = side(prev);
      if (cur_side >= 0.0) {
        if (prev_side < 0.0) {
          const double t = prev_side / (prev_side - cur_side);
          output.push_back(prev + (cur - prev) * t);
        }
        output.push_back(cur);
      } else if (prev_side >= 0.0) {
        const double t = prev_side / (prev_side - cur_side);
        output.push_back(prev + (cur - prev) * t);
      }
    }
  }
  return output;
}

double box_iou(const OrientedBox& a, const OrientedBox& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) {
    throw std::invalid_argument("box_iou requires boxes with positive area");
  }
  const auto ca = a.corners();
  const auto cb = b.corners();
  // Quick reject: farther apart than the two circumscribed radii.
  const double reach = 0.5 * (std::hypot(a.width, a.length) + std::hypot(b.width, b.length));
  if ((a.center - b.center).norm() > reach) {
    return 0.0;
  }
  const std::vector<Vec2> overlap = clip_convex(ca, cb);
  const double inter = std::max(0.0, polygon_area(overlap));
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double path_length(std::span<const Vec2> positions) {
  if (positions.empty()) {
    throw std::invalid_argument("path_length requires at least one point");
  }
  double total = 0.0;
  for (size_t i = 1; i < positions.size(); ++i) {
    total += (positions[i] - positions[i - 1]).norm();
  }
  return total;
}

}  // namespace scenediff
