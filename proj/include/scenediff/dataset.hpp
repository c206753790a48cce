#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "scenediff/map.hpp"
#include "scenediff/scene.hpp"

namespace scenediff {

/// Parameters of the procedurally rolled kinematic training trajectories:
/// lane-following paths seeded on road centerlines plus constant-curvature
/// arcs from random drivable cells.
struct ToyDatasetConfig {
  int num_scenes = 64;
  int agents = 4;
  int horizon = 20;
  double dt = 0.5;
  double speed_min = 2.0;
  double speed_max = 12.0;
  double accel_max = 0.3;        ///< m/s^2, constant per agent
  double curvature_max = 0.02;   ///< 1/m for free arcs
  double lane_follow_prob = 0.6;
  double width_min = 1.8;
  double width_max = 2.2;
  double length_min = 4.0;
  double length_max = 5.2;
};

/// Sampler for per-agent vehicle dimensions, shared by the dataset builder
/// and scene generation.
VehicleDims sample_dims(std::mt19937_64& rng, const ToyDatasetConfig& cfg);

/// Rolls deterministic kinematic scenes on the given road network.
std::vector<Scene> build_toy_dataset(const RoadNetwork& net, const MapGrid& map,
                                     const ToyDatasetConfig& cfg, uint64_t seed);

}  // namespace scenediff
