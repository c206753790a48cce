#include "scenediff/map.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace scenediff {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Stamps a filled disc into one layer (and drivable when asked).
void stamp_disc(MapGrid& g, MapLayer layer, Vec2 center, double radius) {
  const int r_lo = static_cast<int>(std::floor((center.y - radius - g.origin.y) / g.resolution));
  const int r_hi = static_cast<int>(std::ceil((center.y + radius - g.origin.y) / g.resolution));
  const int c_lo = static_cast<int>(std::floor((center.x - radius - g.origin.x) / g.resolution));
  const int c_hi = static_cast<int>(std::ceil((center.x + radius - g.origin.x) / g.resolution));
  const double r2 = radius * radius;
  for (int r = std::max(0, r_lo); r <= std::min(g.rows - 1, r_hi); ++r) {
    for (int c = std::max(0, c_lo); c <= std::min(g.cols - 1, c_hi); ++c) {
      const Vec2 p = g.cell_center(r, c);
      const double dx = p.x - center.x;
      const double dy = p.y - center.y;
      if (dx * dx + dy * dy <= r2) {
        g.set(layer, r, c, true);
      }
    }
  }
}

// Stamps an oriented rectangle (|along| <= half_len, |across| <= half_wid).
void stamp_rect(MapGrid& g, MapLayer layer, Vec2 center, double heading, double half_len,
                double half_wid) {
  const double reach = std::hypot(half_len, half_wid);
  const int r_lo = static_cast<int>(std::floor((center.y - reach - g.origin.y) / g.resolution));
  const int r_hi = static_cast<int>(std::ceil((center.y + reach - g.origin.y) / g.resolution));
  const int c_lo = static_cast<int>(std::floor((center.x - reach - g.origin.x) / g.resolution));
  const int c_hi = static_cast<int>(std::ceil((center.x + reach - g.origin.x) / g.resolution));
  const Vec2 along{std::cos(heading), std::sin(heading)};
  const Vec2 perp{-along.y, along.x};
  for (int r = std::max(0, r_lo); r <= std::min(g.rows - 1, r_hi); ++r) {
    for (int c = std::max(0, c_lo); c <= std::min(g.cols - 1, c_hi); ++c) {
      const Vec2 d = g.cell_center(r, c) - center;
      if (std::abs(d.dot(along)) <= half_len && std::abs(d.dot(perp)) <= half_wid) {
        g.set(layer, r, c, true);
      }
    }
  }
}

}  // namespace

MapGrid::MapGrid(int rows_, int cols_, double resolution_, Vec2 origin_)
    : rows(rows_), cols(cols_), resolution(resolution_), origin(origin_) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("map extent must be positive");
  if (!(resolution > 0.0)) throw std::invalid_argument("map resolution must be positive");
  for (auto& layer : layers) {
    layer.assign(static_cast<size_t>(rows) * cols, 0);
  }
}

void MapGrid::cell_of(Vec2 p, int& r, int& c) const {
  r = static_cast<int>(std::floor((p.y - origin.y) / resolution));
  c = static_cast<int>(std::floor((p.x - origin.x) / resolution));
}

bool MapGrid::query(MapLayer layer, Vec2 p) const {
  int r, c;
  cell_of(p, r, c);
  return in_bounds(r, c) && get(layer, r, c);
}

bool is_onroad(const MapGrid& g, Vec2 p) { return g.query(MapLayer::kDrivableArea, p); }

RoadNetwork build_road_network(uint64_t seed, const RoadNetworkSpec& spec) {
  if (!(spec.extent_m > 0.0) || !(spec.lane_width_m > 0.0) || !(spec.road_width_m > 0.0)) {
    throw std::invalid_argument("road network extent and widths must be positive");
  }
  RoadNetwork net;
  net.spec = spec;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double step = spec.resolution * 0.5;
  const double margin = spec.road_width_m;
  auto inside = [&](Vec2 p) {
    return p.x >= -margin && p.x <= spec.extent_m + margin && p.y >= -margin &&
           p.y <= spec.extent_m + margin;
  };

  for (int road = 0; road < spec.num_roads; ++road) {
    Vec2 pos;
    double heading;
    double max_len;
    if (road == 0 || net.roads.empty()) {
      // Trunk road spanning the whole grid.
      const bool horizontal = unit(rng) < 0.5;
      const double offset = spec.extent_m * (0.35 + 0.3 * unit(rng));
      if (horizontal) {
        pos = {-margin, offset};
        heading = 0.0;
      } else {
        pos = {offset, -margin};
        heading = kPi / 2.0;
      }
      max_len = spec.extent_m + 2.0 * margin;
    } else {
      // Branch rooted on an existing centerline, roughly perpendicular.
      const auto& host = net.roads[static_cast<size_t>(unit(rng) * net.roads.size()) %
                                   net.roads.size()];
      const size_t idx = static_cast<size_t>(unit(rng) * host.points.size()) % host.points.size();
      pos = host.points[idx];
      const double side = unit(rng) < 0.5 ? 1.0 : -1.0;
      heading = normalize_angle(host.headings[idx] + side * kPi / 2.0 + 0.3 * (unit(rng) - 0.5));
      max_len = spec.extent_m * (0.3 + 0.5 * unit(rng));
    }

    double curvature = 0.0;
    if (unit(rng) < spec.curve_prob) {
      curvature = (unit(rng) - 0.5) * 2.0 / 60.0;  // turn radius >= 60 m
    }

    RoadCenterline line;
    double traveled = 0.0;
    while (inside(pos) && traveled <= max_len) {
      line.points.push_back(pos);
      line.headings.push_back(heading);
      pos = pos + Vec2{std::cos(heading), std::sin(heading)} * step;
      heading = normalize_angle(heading + curvature * step);
      traveled += step;
    }
    if (line.points.size() >= 2) {
      net.roads.push_back(std::move(line));
    }
  }
  return net;
}

MapGrid rasterize_road_network(const RoadNetwork& net, uint64_t seed, const std::string& id) {
  const RoadNetworkSpec& spec = net.spec;
  const int side = std::max(1, static_cast<int>(std::llround(spec.extent_m / spec.resolution)));
  MapGrid g(side, side, spec.resolution, {0.0, 0.0});
  g.id = id;

  const double road_r = spec.road_width_m / 2.0;
  const double lane_r = std::min(spec.lane_width_m, spec.road_width_m) / 2.0;
  const double walk_r = spec.walkway_width_m / 2.0;

  for (const RoadCenterline& line : net.roads) {
    for (size_t i = 0; i < line.points.size(); ++i) {
      stamp_disc(g, MapLayer::kDrivableArea, line.points[i], road_r);
      stamp_disc(g, MapLayer::kRoadSegment, line.points[i], road_r);
      stamp_disc(g, MapLayer::kLane, line.points[i], lane_r);
      if (spec.walkway_width_m > 0.0) {
        const Vec2 perp{-std::sin(line.headings[i]), std::cos(line.headings[i])};
        stamp_disc(g, MapLayer::kWalkway, line.points[i] + perp * (road_r + walk_r), walk_r);
        stamp_disc(g, MapLayer::kWalkway, line.points[i] - perp * (road_r + walk_r), walk_r);
      }
    }
  }

  // Pedestrian crossings: short bands across the road at deterministic spots.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const RoadCenterline& line : net.roads) {
    for (int k = 0; k < spec.crossings_per_road; ++k) {
      if (line.points.size() < 8) break;
      const size_t idx = 4 + static_cast<size_t>(unit(rng) * (line.points.size() - 8));
      stamp_rect(g, MapLayer::kPedCrossing, line.points[idx], line.headings[idx], 1.5, road_r);
    }
  }

  // Lane cells are always drivable; walkways sit beside, not on, the road.
  for (size_t i = 0; i < g.layers[0].size(); ++i) {
    if (g.layers[static_cast<int>(MapLayer::kLane)][i]) {
      g.layers[static_cast<int>(MapLayer::kDrivableArea)][i] = 1;
    }
    if (g.layers[static_cast<int>(MapLayer::kDrivableArea)][i]) {
      g.layers[static_cast<int>(MapLayer::kWalkway)][i] = 0;
    }
  }
  return g;
}

MapGrid generate_map(uint64_t seed, const RoadNetworkSpec& spec) {
  return rasterize_road_network(build_road_network(seed, spec), seed,
                                "map-" + std::to_string(seed));
}

std::vector<Vec2> sample_bbox_grid(const AgentState& s, const VehicleDims& d, int n) {
  if (n < 2) throw std::invalid_argument("sample_bbox_grid needs n >= 2");
  const Vec2 along{std::cos(s.theta), std::sin(s.theta)};
  const Vec2 perp{-along.y, along.x};
  std::vector<Vec2> pts;
  pts.reserve(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const double u = -0.5 * d.length + d.length * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      const double w = -0.5 * d.width + d.width * j / (n - 1);
      pts.push_back(s.position() + along * u + perp * w);
    }
  }
  return pts;
}

SceneRaster::SceneRaster(int rows_, int cols_, double meters_per_pixel_)
    : rows(rows_), cols(cols_), meters_per_pixel(meters_per_pixel_) {
  for (auto& ch : channels) {
    ch.assign(static_cast<size_t>(rows) * cols, 0);
  }
}

SceneRaster crop_ego(const MapGrid& g, const Scene& scene, int ego, int t, const CropConfig& cfg) {
  if (ego < 0 || ego >= scene.num_agents) {
    throw std::out_of_range("crop_ego: ego index out of range");
  }
  if (t < 0 || t >= scene.horizon) {
    throw std::out_of_range("crop_ego: timestep out of range");
  }
  const AgentState& es = scene.at(t, ego);
  const int side = static_cast<int>(std::ceil(cfg.window_m / cfg.meters_per_pixel));
  SceneRaster out(side, side, cfg.meters_per_pixel);

  std::vector<OrientedBox> boxes;
  boxes.reserve(scene.num_agents);
  for (int i = 0; i < scene.num_agents; ++i) {
    const AgentState& s = scene.at(t, i);
    boxes.emplace_back(s.position(), scene.dims[i].width, scene.dims[i].length, s.theta);
  }

  const double half = cfg.window_m / 2.0;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      // Row 0 is the top of the image: +y (ego forward) in the ego frame.
      const Vec2 local{(c + 0.5) * cfg.meters_per_pixel - half,
                       half - (r + 0.5) * cfg.meters_per_pixel};
      const Vec2 world = cfg.rotate_to_heading ? ego_to_world(local, es)
                                               : es.position() + local;
      for (int layer = 0; layer < kNumMapLayers; ++layer) {
        out.set(layer, r, c, g.query(static_cast<MapLayer>(layer), world));
      }
      for (int i = 0; i < scene.num_agents; ++i) {
        if (!scene.valid[i]) continue;
        if (boxes[i].contains(world)) {
          out.set(i == ego ? SceneRaster::kEgoChannel : SceneRaster::kOthersChannel, r, c, true);
        }
      }
    }
  }
  return out;
}

SceneRaster rasterize_scene(const MapGrid& g, const Scene& scene, int t) {
  if (t < 0 || t >= scene.horizon) {
    throw std::out_of_range("rasterize_scene: timestep out of range");
  }
  SceneRaster out(g.rows, g.cols, g.resolution);
  for (int layer = 0; layer < kNumMapLayers; ++layer) {
    out.channels[layer] = g.layers[layer];
  }
  for (int i = 0; i < scene.num_agents; ++i) {
    if (!scene.valid[i]) continue;
    const AgentState& s = scene.at(t, i);
    const OrientedBox box(s.position(), scene.dims[i].width, scene.dims[i].length, s.theta);
    const double reach = 0.5 * std::hypot(box.width, box.length);
    int r_lo, c_lo, r_hi, c_hi;
    g.cell_of({s.x - reach, s.y - reach}, r_lo, c_lo);
    g.cell_of({s.x + reach, s.y + reach}, r_hi, c_hi);
    for (int r = std::max(0, r_lo); r <= std::min(g.rows - 1, r_hi); ++r) {
      for (int c = std::max(0, c_lo); c <= std::min(g.cols - 1, c_hi); ++c) {
        if (box.contains(g.cell_center(r, c))) {
          out.set(SceneRaster::kOthersChannel, r, c, true);
        }
      }
    }
  }
  return out;
}

}  // namespace scenediff
