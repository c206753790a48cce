#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "scenediff/map.hpp"
#include "scenediff/scene.hpp"

namespace scenediff {

enum class EgoRule { kLongest, kDynamic, kRandom };

EgoRule ego_rule_from_string(const std::string& name);
std::string to_string(EgoRule rule);

/// One ego-centric training sample cut from a scene at timestep t: the crop
/// raster, the future target path and relative headings over the prediction
/// horizon, and every other vehicle's future box corners in the ego frame.
struct EgoInstance {
  int t = 0;
  SceneRaster raster;
  std::vector<Vec2> targets;
  std::vector<double> headings;

  /// Corners grouped per (vehicle, future step) so per-vehicle collision
  /// losses stay computable; the flat corner set is the union.
  struct FutureBox {
    int agent = 0;
    int step = 0;  ///< future offset t' in [1, T_p]
    std::array<Vec2, 4> corners;
  };
  std::vector<FutureBox> other_boxes;
  VehicleDims ego_dims;
};

/// Picks the ego among agents that move at least `min_travel` meters over the
/// horizon; returns nullopt when no agent qualifies. Ties break to the lowest
/// index. The random rule draws uniformly from the candidates with `seed`.
std::optional<int> select_ego(const Scene& scene, EgoRule rule, uint64_t seed = 0,
                              double min_travel = 1.0);

/// One instance per t in [0, T - T_p): future ego positions and headings
/// relative to the ego state at t, other vehicles' transformed box corners
/// over the same window, and the ego-up crop. Throws if T <= T_p.
std::vector<EgoInstance> build_instances(const Scene& scene, const MapGrid& map, int ego,
                                         int t_p, const CropConfig& crop = {});

/// Drops instances whose future window shows fewer than min_agents - 1 other
/// vehicles (the ego itself counts toward min_agents).
std::vector<EgoInstance> filter_instances(std::vector<EgoInstance> instances,
                                          int min_agents = 2);

/// Writes manifest.json plus one JSON record and one stacked-channel PGM per
/// instance. Returns the instance count. Round-trips through import_dataset.
int export_dataset(const std::vector<EgoInstance>& instances, const std::string& dir,
                   const std::string& provenance = {});
std::vector<EgoInstance> import_dataset(const std::string& dir);

}  // namespace scenediff
