#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "scenediff/geometry.hpp"
#include "scenediff/scene.hpp"

namespace scenediff {

enum class MapLayer : int {
  kDrivableArea = 0,
  kRoadSegment = 1,
  kLane = 2,
  kPedCrossing = 3,
  kWalkway = 4,
};
inline constexpr int kNumMapLayers = 5;
inline constexpr std::array<const char*, kNumMapLayers> kMapLayerNames = {
    "drivable_area", "road_segment", "lane", "ped_crossing", "walkway"};

/// Layered boolean occupancy raster. All layers share extent and resolution;
/// cell (r, c) covers the world square [origin + (c, r) * res, +res).
/// Row r grows with world +y.
struct MapGrid {
  int rows = 0;
  int cols = 0;
  double resolution = 0.5;
  Vec2 origin;
  std::string id;
  std::array<std::vector<uint8_t>, kNumMapLayers> layers;

  MapGrid() = default;
  MapGrid(int rows_, int cols_, double resolution_, Vec2 origin_);

  bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
  bool get(MapLayer layer, int r, int c) const {
    return layers[static_cast<int>(layer)][static_cast<size_t>(r) * cols + c] != 0;
  }
  void set(MapLayer layer, int r, int c, bool v) {
    layers[static_cast<int>(layer)][static_cast<size_t>(r) * cols + c] = v ? 1 : 0;
  }
  /// Floor-to-cell rule: the cell containing (p - origin) / resolution.
  void cell_of(Vec2 p, int& r, int& c) const;
  Vec2 cell_center(int r, int c) const {
    return {origin.x + (c + 0.5) * resolution, origin.y + (r + 0.5) * resolution};
  }
  /// True iff p falls in a drivable_area cell; anything off-grid is off-road.
  bool query(MapLayer layer, Vec2 p) const;
};

bool is_onroad(const MapGrid& g, Vec2 p);

/// Road-network parameters for the procedural generator.
struct RoadNetworkSpec {
  double extent_m = 120.0;
  double resolution = 0.5;
  int num_roads = 3;
  double road_width_m = 7.0;
  double lane_width_m = 3.5;
  double curve_prob = 0.5;
  double walkway_width_m = 2.0;
  int crossings_per_road = 1;
};

/// Centerline of one generated road: sampled points with tangent headings.
struct RoadCenterline {
  std::vector<Vec2> points;
  std::vector<double> headings;
};

struct RoadNetwork {
  RoadNetworkSpec spec;
  std::vector<RoadCenterline> roads;
};

/// Lays out road centerlines: a trunk road crossing the grid, then branches
/// rooted on existing roads so the drivable area stays connected.
RoadNetwork build_road_network(uint64_t seed, const RoadNetworkSpec& spec);

/// Paints a road network into the five layers. `seed` places the pedestrian
/// crossings; `id` names the grid.
MapGrid rasterize_road_network(const RoadNetwork& net, uint64_t seed,
                               const std::string& id = {});

/// Deterministic procedural map: rasterizes build_road_network's output into
/// the five layers. Throws on non-positive extent or widths.
MapGrid generate_map(uint64_t seed, const RoadNetworkSpec& spec);

/// n x n corner-inclusive lattice spanning the oriented footprint of (s, d),
/// in world coordinates. Throws for n < 2.
std::vector<Vec2> sample_bbox_grid(const AgentState& s, const VehicleDims& d, int n = 10);

/// Multi-channel raster image: the five map layers plus separate ego and
/// other-vehicle channels.
struct SceneRaster {
  int rows = 0;
  int cols = 0;
  double meters_per_pixel = 0.25;
  std::array<std::vector<uint8_t>, kNumMapLayers + 2> channels;

  static constexpr int kEgoChannel = kNumMapLayers;
  static constexpr int kOthersChannel = kNumMapLayers + 1;
  static constexpr int kNumChannels = kNumMapLayers + 2;

  SceneRaster() = default;
  SceneRaster(int rows_, int cols_, double meters_per_pixel_);

  bool get(int ch, int r, int c) const {
    return channels[ch][static_cast<size_t>(r) * cols + c] != 0;
  }
  void set(int ch, int r, int c, bool v) {
    channels[ch][static_cast<size_t>(r) * cols + c] = v ? 1 : 0;
  }
};

struct CropConfig {
  double window_m = 60.0;
  double meters_per_pixel = 0.25;
  /// Rotate so the ego heading points up; false keeps the window axis-aligned.
  bool rotate_to_heading = true;
};

/// Fixed-size window centered on the ego at timestep t, oriented per the
/// config, with the ego and the other vehicles painted into their channels.
/// Output is always ceil(window_m / meters_per_pixel) pixels per side.
SceneRaster crop_ego(const MapGrid& g, const Scene& scene, int ego, int t,
                     const CropConfig& cfg = {});

/// Full-grid render at map resolution with every valid vehicle painted as a
/// filled oriented rectangle in the others channel.
SceneRaster rasterize_scene(const MapGrid& g, const Scene& scene, int t);

}  // namespace scenediff
