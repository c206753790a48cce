#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scenediff/guides.hpp"
#include "scenediff/map.hpp"
#include "scenediff/scene.hpp"

namespace scenediff {

// ---------------------------------------------------------------------------
// Scenario metrics

/// Mean fraction of agent-timesteps violating each constraint (0 = perfect
/// adherence): centers closer than d_safe for no-collision, any footprint
/// lattice point off-road for no-offroad.
struct RuleScores {
  double no_collision = 0.0;
  double no_offroad = 0.0;
};
RuleScores rule_metric(const std::vector<Scene>& scenes, const GuideConfig& cfg,
                       const MapGrid& map);

/// 1-Wasserstein distance between empirical distributions; sorted-pairing
/// mean for equal sizes, quantile-function integral otherwise.
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

inline const std::vector<std::string> kRealismFeatures = {"speed", "lon_accel", "lat_accel",
                                                          "jerk"};
inline const std::vector<std::string> kRelativeFeatures = {"nearest_distance",
                                                           "nearest_relative_speed"};

struct RealismScores {
  double real = 0.0;
  double rel_real = 0.0;
  std::map<std::string, double> real_components;
  std::map<std::string, double> rel_components;
};

/// real: mean Wasserstein distance over per-agent property histograms;
/// rel_real: the same over scene-level interaction properties.
RealismScores realism_metric(const std::vector<Scene>& gen, const std::vector<Scene>& ref,
                             const std::vector<std::string>& features = kRealismFeatures,
                             const std::vector<std::string>& relative = kRelativeFeatures);

/// Pooled samples of one named property across scenes (test / extension
/// surface for realism_metric).
std::vector<double> property_samples(const std::vector<Scene>& scenes, const std::string& name);

// ---------------------------------------------------------------------------
// Planning evaluation

/// Displacement error at the step nearest each horizon. Trajectories are
/// future position sequences: element j is the pose (j+1)*dt ahead.
std::map<double, double> planning_l2(std::span<const Vec2> pred, std::span<const Vec2> gt,
                                     double dt, const std::vector<double>& horizons_s = {1.0,
                                                                                         2.0,
                                                                                         3.0});

/// Mean of the per-horizon values (the reported "Avg." column).
double horizon_average(const std::map<double, double>& per_horizon);

/// Whether the ego box, swept along the predicted trajectory, overlaps any
/// other box at or before each horizon (1.0 when collided, else 0.0).
/// `others[j]` are the boxes at step j+1; headings are derived from the path
/// when not supplied.
std::map<double, double> collision_rate(std::span<const Vec2> pred, const VehicleDims& ego_dims,
                                        const std::vector<std::vector<OrientedBox>>& others,
                                        double dt,
                                        const std::vector<double>& horizons_s = {1.0, 2.0, 3.0},
                                        std::span<const double> headings = {});

// ---------------------------------------------------------------------------
// Loss formulas (pure functions)

struct MotionLosses {
  double jnll = 0.0;
  double min_fde = 0.0;
  int best = 0;
};

/// Joint negative log-likelihood of the closest-of-N candidate (unit-variance
/// Gaussian residual likelihood) plus the minimum squared final displacement.
MotionLosses motion_losses(const std::vector<std::vector<Vec2>>& candidates,
                           std::span<const double> probabilities, std::span<const Vec2> gt);

struct OccupancyLosses {
  double dice = 0.0;
  double bce = 0.0;
};

/// Dice (1 - overlap coefficient, eps = 1e-6) averaged over timesteps plus
/// mean binary cross-entropy. pred holds probabilities in [0, 1].
OccupancyLosses occupancy_losses(const std::vector<std::vector<double>>& pred,
                                 const std::vector<std::vector<uint8_t>>& gt);

/// Imitation term (summed squared displacement) plus IoU collision terms for
/// ego boxes inflated by each safety margin delta, weighted by lambdas.
double planning_loss(std::span<const Vec2> pred, std::span<const Vec2> gt,
                     const VehicleDims& ego_dims,
                     const std::vector<std::vector<OrientedBox>>& others,
                     const std::vector<double>& deltas = {0.0, 0.5, 1.0},
                     const std::vector<double>& lambdas = {2.5, 1.0, 0.25},
                     std::span<const double> headings = {});

/// Mean squared elementwise difference between two equally shaped feature
/// grids.
double feature_alignment_loss(std::span<const float> a, std::span<const float> b);

// ---------------------------------------------------------------------------
// Report

struct MetricsReport {
  RuleScores rule;
  RealismScores realism;
  std::map<double, double> l2_at;
  std::map<double, double> collision_rate_at;
  double l2_avg = 0.0;
  double collision_avg = 0.0;
  int gen_scenes = 0;
  int ref_scenes = 0;
  int predictions = 0;
  std::string l2_avg_convention = "mean-of-horizons";
  std::string config_hash;
  uint64_t seed = 0;
};

std::string metrics_report_to_json(const MetricsReport& report);
/// Flat metric,value CSV (one row per metric) for diffing in CI.
std::string metrics_report_to_csv(const MetricsReport& report);

}  // namespace scenediff
