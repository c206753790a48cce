#pragma once

#include <vector>

#include "scenediff/map.hpp"
#include "scenediff/scene.hpp"

namespace scenediff {

/// Weights and thresholds for the rule-satisfaction guides.
struct GuideConfig {
  double w_agent = 50.0;
  double w_map = 1.0;
  double w_speed = 1.0;
  double delta_buffer = 1.0;  ///< meters added to the radius sum for d_safe
  double gamma = 0.9;         ///< exponential decay base for timestep weights
  double v_min = 0.5;
  double v_max = 15.0;
  int grid_n = 10;            ///< footprint sample lattice side
  double moving_threshold = 0.1;  ///< m/s; agents never exceeding it are skipped

  void check() const;
};

/// Exponentially decaying timestep weights w(t) = gamma^t / sum_k gamma^k for
/// t = 1..T (index 0 holds t = 1). Positive, strictly decreasing, sum 1.
std::vector<double> decay_weights(int horizon, double gamma);

/// True if agent i's speed ever exceeds the moving threshold.
bool agent_is_moving(const Scene& scene, int i, double threshold);

/// Circle-approximation collision penalty over ordered moving-agent pairs:
/// sum_t w(t) * sum_{j != i} max(1 - d_ij / d_safe_ij, 0), d_safe = r_i + r_j + buffer.
double agent_collision_guide(const Scene& scene, const GuideConfig& cfg);

/// Off-road penalty: for each moving agent-timestep whose footprint lattice
/// straddles the road edge, sum over off-road points of
/// max(1 - distance to nearest on-road lattice point, 0), decay-weighted.
double map_collision_guide(const Scene& scene, const MapGrid& map, const GuideConfig& cfg);

/// Speed-range penalty: max(v - v_max, 0) + max(v_min - v, 0), decay-weighted,
/// moving agents only.
double speed_guide(const Scene& scene, const GuideConfig& cfg);

/// w_agent * R_agent + w_map * R_map + w_speed * R_speed. `map` may be null
/// when w_map is zero.
double total_guide(const Scene& scene, const MapGrid* map, const GuideConfig& cfg);

/// Descent direction for guided sampling, laid out
/// [(t * M + i) * 4 + {x,y,v,theta}]. Agent and speed terms are the analytic
/// penalty gradients (hinge subgradient 0 at corners). The map term pulls
/// banded off-road footprint points toward their nearest on-road points,
/// with the targets frozen in world coordinates: the raster penalty itself
/// is piecewise constant in the pose, so its literal derivative carries no
/// usable signal. Entries of non-moving agents are zero.
std::vector<double> guide_gradient(const Scene& scene, const MapGrid* map,
                                   const GuideConfig& cfg);

}  // namespace scenediff
