#include "scenediff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace scenediff {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace

VehicleDims sample_dims(std::mt19937_64& rng, const ToyDatasetConfig& cfg) {
  std::uniform_real_distribution<double> w(cfg.width_min, cfg.width_max);
  std::uniform_real_distribution<double> l(cfg.length_min, cfg.length_max);
  return VehicleDims(w(rng), l(rng));
}

std::vector<Scene> build_toy_dataset(const RoadNetwork& net, const MapGrid& map,
                                     const ToyDatasetConfig& cfg, uint64_t seed) {
  if (cfg.num_scenes < 1 || cfg.agents < 1 || cfg.horizon < 2) {
    throw std::invalid_argument("toy dataset needs scenes >= 1, agents >= 1, horizon >= 2");
  }
  if (net.roads.empty()) {
    throw std::invalid_argument("toy dataset needs at least one road");
  }

  // Drivable cell centers for free-arc starts.
  std::vector<Vec2> drivable;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (map.get(MapLayer::kDrivableArea, r, c)) {
        drivable.push_back(map.cell_center(r, c));
      }
    }
  }
  if (drivable.empty()) {
    throw std::invalid_argument("map has no drivable area");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> speed(cfg.speed_min, cfg.speed_max);
  std::uniform_real_distribution<double> accel(-cfg.accel_max, cfg.accel_max);

  std::vector<Scene> scenes;
  scenes.reserve(cfg.num_scenes);
  for (int s = 0; s < cfg.num_scenes; ++s) {
    Scene scene(cfg.horizon, cfg.agents, cfg.dt);
    scene.map_id = map.id;
    scene.seed = seed + static_cast<uint64_t>(s);
    for (int i = 0; i < cfg.agents; ++i) {
      scene.dims[i] = sample_dims(rng, cfg);

      Vec2 pos;
      double heading;
      double curvature;
      if (unit(rng) < cfg.lane_follow_prob) {
        const RoadCenterline& road =
            net.roads[static_cast<size_t>(unit(rng) * net.roads.size()) % net.roads.size()];
        const size_t idx =
            static_cast<size_t>(unit(rng) * road.points.size()) % road.points.size();
        const double lateral = (unit(rng) - 0.5) * net.spec.road_width_m * 0.5;
        const Vec2 perp{-std::sin(road.headings[idx]), std::cos(road.headings[idx])};
        pos = road.points[idx] + perp * lateral;
        heading = normalize_angle(road.headings[idx] + (unit(rng) < 0.5 ? 0.0 : kPi) +
                                  0.1 * (unit(rng) - 0.5));
        curvature = (unit(rng) - 0.5) * 0.01;
      } else {
        pos = drivable[static_cast<size_t>(unit(rng) * drivable.size()) % drivable.size()];
        heading = (unit(rng) * 2.0 - 1.0) * kPi;
        curvature = (unit(rng) - 0.5) * 2.0 * cfg.curvature_max;
      }

      double v = speed(rng);
      const double a = accel(rng);
      for (int t = 0; t < cfg.horizon; ++t) {
        scene.at(t, i) = AgentState(pos.x, pos.y, v, heading);
        pos.x += v * std::cos(heading) * cfg.dt;
        pos.y += v * std::sin(heading) * cfg.dt;
        heading = normalize_angle(heading + v * curvature * cfg.dt);
        v = std::clamp(v + a * cfg.dt, 0.5, 15.0);
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace scenediff
