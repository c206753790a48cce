#include "scenediff/map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "scenediff/map_io.hpp"

using namespace scenediff;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

RoadNetworkSpec small_spec() {
  RoadNetworkSpec spec;
  spec.extent_m = 100.0;
  spec.resolution = 0.5;
  spec.num_roads = 3;
  return spec;
}

long count_layer(const MapGrid& g, MapLayer layer) {
  long n = 0;
  for (uint8_t v : g.layers[static_cast<int>(layer)]) n += v;
  return n;
}

Scene one_agent_scene(Vec2 pos, double heading, VehicleDims dims) {
  Scene scene(2, 1, 0.5);
  scene.dims[0] = dims;
  scene.at(0, 0) = AgentState(pos.x, pos.y, 1.0, heading);
  scene.at(1, 0) = scene.at(0, 0);
  return scene;
}

std::filesystem::path temp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("generate_map is deterministic per seed") {
  const RoadNetworkSpec spec = small_spec();
  const MapGrid a = generate_map(7, spec);
  const MapGrid b = generate_map(7, spec);
  for (int layer = 0; layer < kNumMapLayers; ++layer) {
    CHECK(a.layers[layer] == b.layers[layer]);
  }
  const MapGrid c = generate_map(8, spec);
  bool any_diff = false;
  for (int layer = 0; layer < kNumMapLayers; ++layer) {
    any_diff = any_diff || a.layers[layer] != c.layers[layer];
  }
  CHECK(any_diff);
}

TEST_CASE("single straight road forms a band of the right area") {
  RoadNetworkSpec spec = small_spec();
  spec.num_roads = 1;
  spec.curve_prob = 0.0;
  spec.road_width_m = 7.0;
  for (uint64_t seed : {1ULL, 2ULL, 3ULL, 11ULL}) {
    const MapGrid g = generate_map(seed, spec);
    const long drivable = count_layer(g, MapLayer::kDrivableArea);
    const double expected = spec.road_width_m * spec.extent_m / (spec.resolution * spec.resolution);
    const double one_row = spec.extent_m / spec.resolution;
    CHECK(std::abs(drivable - expected) <= one_row);
  }
}

TEST_CASE("zero roads give an all-false drivable layer") {
  RoadNetworkSpec spec = small_spec();
  spec.num_roads = 0;
  const MapGrid g = generate_map(1, spec);
  CHECK(count_layer(g, MapLayer::kDrivableArea) == 0);
}

TEST_CASE("generate_map rejects bad extents") {
  RoadNetworkSpec spec = small_spec();
  spec.extent_m = -5.0;
  CHECK_THROWS_AS(generate_map(1, spec), std::invalid_argument);
  spec = small_spec();
  spec.lane_width_m = 0.0;
  CHECK_THROWS_AS(generate_map(1, spec), std::invalid_argument);
}

TEST_CASE("is_onroad basics") {
  const RoadNetworkSpec spec = small_spec();
  const RoadNetwork net = build_road_network(5, spec);
  const MapGrid g = rasterize_road_network(net, 5);
  // Centerline points inside the grid are on-road.
  int checked = 0;
  for (const Vec2& p : net.roads.front().points) {
    if (p.x > 1.0 && p.x < spec.extent_m - 1.0 && p.y > 1.0 && p.y < spec.extent_m - 1.0) {
      CHECK(is_onroad(g, p));
      ++checked;
    }
  }
  CHECK(checked > 10);
  CHECK_FALSE(is_onroad(g, {spec.extent_m + 1000.0, 0.0}));
  CHECK_FALSE(is_onroad(g, {-1000.0, -1000.0}));
}

TEST_CASE("is_onroad resolves cell boundaries with the floor rule") {
  MapGrid g(3, 3, 1.0, {0.0, 0.0});
  // Only the center cell (1, 1) is drivable: world square [1,2) x [1,2).
  g.set(MapLayer::kDrivableArea, 1, 1, true);
  for (double x = 0.0; x <= 3.0; x += 0.5) {
    for (double y = 0.0; y <= 3.0; y += 0.5) {
      const bool expect = x >= 1.0 && x < 2.0 && y >= 1.0 && y < 2.0;
      CHECK(is_onroad(g, {x, y}) == expect);
    }
  }
}

TEST_CASE("every lane cell is drivable in generated maps") {
  for (uint64_t seed : {1ULL, 9ULL, 123ULL}) {
    const MapGrid g = generate_map(seed, small_spec());
    for (size_t i = 0; i < g.layers[0].size(); ++i) {
      if (g.layers[static_cast<int>(MapLayer::kLane)][i]) {
        CHECK(g.layers[static_cast<int>(MapLayer::kDrivableArea)][i] == 1);
      }
    }
  }
}

TEST_CASE("sample_bbox_grid lattice") {
  const AgentState s(0.0, 0.0, 1.0, kPi / 2.0);
  const VehicleDims d(2.0, 4.0);

  // n = 2 gives exactly the box corners.
  const auto pts2 = sample_bbox_grid(s, d, 2);
  REQUIRE(pts2.size() == 4);
  const auto corners = box_corners(s, d);
  for (const Vec2& c : corners) {
    const bool found = std::any_of(pts2.begin(), pts2.end(), [&](const Vec2& p) {
      return std::abs(p.x - c.x) < 1e-12 && std::abs(p.y - c.y) < 1e-12;
    });
    CHECK(found);
  }

  // n = 10 on the axis-aligned 2x4 box: x in {-1..1}, y in {-2..2}, 9 steps.
  const auto pts10 = sample_bbox_grid(s, d, 10);
  REQUIRE(pts10.size() == 100);
  std::set<long> xs, ys;
  for (const Vec2& p : pts10) {
    xs.insert(std::lround(p.x * 1e9));
    ys.insert(std::lround(p.y * 1e9));
  }
  CHECK(xs.size() == 10);
  CHECK(ys.size() == 10);
  for (int i = 0; i < 10; ++i) {
    const double ex = -1.0 + 2.0 * i / 9.0;
    const double ey = -2.0 + 4.0 * i / 9.0;
    CHECK(xs.count(std::lround(ex * 1e9)) == 1);
    CHECK(ys.count(std::lround(ey * 1e9)) == 1);
  }

  // Every point passes the point-in-rectangle test.
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ua(-kPi, kPi);
  for (int trial = 0; trial < 50; ++trial) {
    const AgentState rs(trial * 0.37, -trial * 0.21, 1.0, ua(rng));
    const OrientedBox rbox(rs.position(), d.width + 1e-9, d.length + 1e-9, rs.theta);
    for (const Vec2& p : sample_bbox_grid(rs, d, 7)) {
      CHECK(rbox.contains(p));
    }
  }

  CHECK_THROWS_AS(sample_bbox_grid(s, d, 1), std::invalid_argument);
}

TEST_CASE("crop_ego with heading up equals the axis-aligned window") {
  const MapGrid g = generate_map(17, small_spec());
  const Vec2 center{50.0, 50.0};
  const Scene scene = one_agent_scene(center, kPi / 2.0, VehicleDims(2.0, 4.5));

  CropConfig cfg;
  const SceneRaster rotated = crop_ego(g, scene, 0, 0, cfg);
  cfg.rotate_to_heading = false;
  const SceneRaster aligned = crop_ego(g, scene, 0, 0, cfg);

  CHECK(rotated.rows == static_cast<int>(std::ceil(cfg.window_m / cfg.meters_per_pixel)));
  for (int ch = 0; ch < SceneRaster::kNumChannels; ++ch) {
    CHECK(rotated.channels[ch] == aligned.channels[ch]);
  }
  // The ego itself is painted into the ego channel, not the others channel.
  long ego_px = 0, other_px = 0;
  for (uint8_t v : rotated.channels[SceneRaster::kEgoChannel]) ego_px += v;
  for (uint8_t v : rotated.channels[SceneRaster::kOthersChannel]) other_px += v;
  CHECK(ego_px > 0);
  CHECK(other_px == 0);
}

TEST_CASE("crop_ego rotating the world with the ego changes almost nothing") {
  const RoadNetworkSpec spec = small_spec();
  const RoadNetwork net = build_road_network(23, spec);
  const MapGrid base = rasterize_road_network(net, 23);

  const double phi = 0.5;
  const Vec2 pivot{50.0, 50.0};
  auto rotate = [&](Vec2 p) {
    const Vec2 d = p - pivot;
    return Vec2{pivot.x + std::cos(phi) * d.x - std::sin(phi) * d.y,
                pivot.y + std::sin(phi) * d.x + std::cos(phi) * d.y};
  };
  RoadNetwork turned = net;
  for (RoadCenterline& road : turned.roads) {
    for (Vec2& p : road.points) p = rotate(p);
    for (double& h : road.headings) h = normalize_angle(h + phi);
  }
  const MapGrid rotated_map = rasterize_road_network(turned, 23);

  const Vec2 ego_pos{46.0, 52.0};
  const double ego_heading = 0.8;
  const VehicleDims dims(2.0, 4.5);
  const Scene scene_a = one_agent_scene(ego_pos, ego_heading, dims);
  const Scene scene_b = one_agent_scene(rotate(ego_pos), ego_heading + phi, dims);

  const SceneRaster crop_a = crop_ego(base, scene_a, 0, 0);
  const SceneRaster crop_b = crop_ego(rotated_map, scene_b, 0, 0);

  const long cells = static_cast<long>(crop_a.rows) * crop_a.cols;
  for (int ch : {static_cast<int>(MapLayer::kDrivableArea), SceneRaster::kEgoChannel}) {
    long diff = 0;
    for (long i = 0; i < cells; ++i) {
      diff += crop_a.channels[ch][i] != crop_b.channels[ch][i];
    }
    CHECK(diff <= cells / 50);  // <= 2% resampling tolerance
  }
}

TEST_CASE("crop_ego near the grid edge renders outside as off-road") {
  const MapGrid g = generate_map(29, small_spec());
  const Scene scene = one_agent_scene({1.0, 50.0}, kPi / 2.0, VehicleDims(2.0, 4.5));
  CropConfig cfg;
  cfg.rotate_to_heading = false;
  const SceneRaster crop = crop_ego(g, scene, 0, 0, cfg);
  // Window spans x in [-29, 31]: columns left of x = 0 are outside the map.
  const int outside_cols = static_cast<int>(29.0 / cfg.meters_per_pixel) - 1;
  for (int r = 0; r < crop.rows; ++r) {
    for (int c = 0; c < outside_cols; ++c) {
      CHECK_FALSE(crop.get(static_cast<int>(MapLayer::kDrivableArea), r, c));
    }
  }
  CHECK_THROWS_AS(crop_ego(g, scene, 5, 0), std::out_of_range);
}

TEST_CASE("rasterize_scene paints vehicles over the layers") {
  const MapGrid g = generate_map(31, small_spec());

  Scene empty(2, 1, 0.5);
  empty.valid[0] = 0;
  empty.at(0, 0) = AgentState(50, 50, 0, 0);
  empty.at(1, 0) = empty.at(0, 0);
  const SceneRaster plain = rasterize_scene(g, empty, 0);
  for (int layer = 0; layer < kNumMapLayers; ++layer) {
    CHECK(plain.channels[layer] == g.layers[layer]);
  }
  long painted = 0;
  for (uint8_t v : plain.channels[SceneRaster::kOthersChannel]) painted += v;
  CHECK(painted == 0);

  // One 2x4 vehicle paints about area / res^2 cells, within a boundary ring.
  const Scene one = one_agent_scene({50.0, 50.0}, 0.3, VehicleDims(2.0, 4.0));
  const SceneRaster with_car = rasterize_scene(g, one, 0);
  long count = 0;
  for (uint8_t v : with_car.channels[SceneRaster::kOthersChannel]) count += v;
  const double expected = 8.0 / (g.resolution * g.resolution);
  const double ring = 12.0 / g.resolution + 4.0;
  CHECK(std::abs(count - expected) <= ring);

  // Two overlapping vehicles paint the union, and agent order is irrelevant.
  Scene two(2, 2, 0.5);
  two.dims[0] = VehicleDims(2.0, 4.0);
  two.dims[1] = VehicleDims(2.0, 4.0);
  two.at(0, 0) = AgentState(50.0, 50.0, 0.0, 0.3);
  two.at(0, 1) = AgentState(51.0, 50.5, 0.0, 1.2);
  two.at(1, 0) = two.at(0, 0);
  two.at(1, 1) = two.at(0, 1);
  Scene swapped = two;
  std::swap(swapped.dims[0], swapped.dims[1]);
  for (int t = 0; t < 2; ++t) {
    std::swap(swapped.at(t, 0), swapped.at(t, 1));
  }
  const SceneRaster ab = rasterize_scene(g, two, 0);
  const SceneRaster ba = rasterize_scene(g, swapped, 0);
  CHECK(ab.channels[SceneRaster::kOthersChannel] == ba.channels[SceneRaster::kOthersChannel]);
}

TEST_CASE("map persistence round-trips") {
  const MapGrid g = generate_map(37, small_spec());
  const auto dir = temp_dir("scenediff_map_io");
  save_map(g, dir.string(), "config deadbeef");
  const MapGrid back = load_map(dir.string());
  CHECK(back.rows == g.rows);
  CHECK(back.cols == g.cols);
  CHECK(back.resolution == g.resolution);
  for (int layer = 0; layer < kNumMapLayers; ++layer) {
    CHECK(back.layers[layer] == g.layers[layer]);
  }
}

TEST_CASE("raster persistence round-trips") {
  const MapGrid g = generate_map(41, small_spec());
  const Scene scene = one_agent_scene({50.0, 50.0}, 1.0, VehicleDims(2.0, 4.5));
  const SceneRaster crop = crop_ego(g, scene, 0, 0);
  const auto dir = temp_dir("scenediff_raster_io");
  const std::string path = (dir / "crop.pgm").string();
  save_raster(crop, path, "config deadbeef");
  const SceneRaster back = load_raster(path);
  CHECK(back.rows == crop.rows);
  CHECK(back.meters_per_pixel == doctest::Approx(crop.meters_per_pixel));
  for (int ch = 0; ch < SceneRaster::kNumChannels; ++ch) {
    CHECK(back.channels[ch] == crop.channels[ch]);
  }
}

TEST_CASE("scene SVG render is deterministic and shows vehicles") {
  const MapGrid g = generate_map(43, small_spec());
  Scene two(2, 2, 0.5);
  two.dims[0] = VehicleDims(2.0, 4.0);
  two.dims[1] = VehicleDims(2.0, 4.6);
  two.at(0, 0) = AgentState(40.0, 50.0, 3.0, 0.0);
  two.at(0, 1) = AgentState(60.0, 50.0, 3.0, kPi);
  two.at(1, 0) = two.at(0, 0);
  two.at(1, 1) = two.at(0, 1);
  const std::string svg = render_scene_svg(g, two, 0, 0);
  CHECK(svg == render_scene_svg(g, two, 0, 0));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("#ffffff") != std::string::npos);  // ego white
  CHECK(svg.find("#ff8c00") != std::string::npos);  // others orange
}
