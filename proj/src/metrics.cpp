#include "scenediff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace scenediff {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double sq(double x) { return x * x; }

// Heading sequence for a future-position trajectory rooted at the origin;
// falls back to "forward" (+y, the ego frame convention) while stationary.
std::vector<double> derive_headings(std::span<const Vec2> path) {
  std::vector<double> headings(path.size(), kPi / 2.0);
  Vec2 prev{0.0, 0.0};
  double last = kPi / 2.0;
  for (size_t j = 0; j < path.size(); ++j) {
    const Vec2 d = path[j] - prev;
    if (d.norm() > 1e-9) {
      last = std::atan2(d.y, d.x);
    }
    headings[j] = last;
    prev = path[j];
  }
  return headings;
}

int horizon_step(double horizon_s, double dt, size_t length) {
  const int step = static_cast<int>(std::llround(horizon_s / dt));
  if (step < 1 || step > static_cast<int>(length)) {
    throw std::invalid_argument("horizon beyond trajectory length");
  }
  return step;
}

}  // namespace

RuleScores rule_metric(const std::vector<Scene>& scenes, const GuideConfig& cfg,
                       const MapGrid& map) {
  if (scenes.empty()) throw std::invalid_argument("rule_metric needs at least one scene");
  RuleScores mean;
  for (const Scene& scene : scenes) {
    scene.check();
    long total = 0, collide = 0, offroad = 0;
    for (int t = 0; t < scene.horizon; ++t) {
      for (int i = 0; i < scene.num_agents; ++i) {
        if (!scene.valid[i]) continue;
        ++total;
        const AgentState& si = scene.at(t, i);
        bool hit = false;
        for (int j = 0; j < scene.num_agents && !hit; ++j) {
          if (j == i || !scene.valid[j]) continue;
          const double d_safe =
              scene.dims[i].radius() + scene.dims[j].radius() + cfg.delta_buffer;
          hit = (si.position() - scene.at(t, j).position()).norm() < d_safe;
        }
        collide += hit;
        bool off = false;
        for (const Vec2& p : sample_bbox_grid(si, scene.dims[i], cfg.grid_n)) {
          if (!is_onroad(map, p)) {
            off = true;
            break;
          }
        }
        offroad += off;
      }
    }
    if (total > 0) {
      mean.no_collision += static_cast<double>(collide) / total;
      mean.no_offroad += static_cast<double>(offroad) / total;
    }
  }
  mean.no_collision /= scenes.size();
  mean.no_offroad /= scenes.size();
  return mean;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein_1d needs samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  if (sa.size() == sb.size()) {
    double sum = 0.0;
    for (size_t i = 0; i < sa.size(); ++i) sum += std::abs(sa[i] - sb[i]);
    return sum / sa.size();
  }

  // Quantile-function integral over the merged breakpoints of both ECDFs.
  const size_t n = sa.size(), m = sb.size();
  std::vector<double> cuts;
  cuts.reserve(n + m + 1);
  for (size_t i = 0; i <= n; ++i) cuts.push_back(static_cast<double>(i) / n);
  for (size_t j = 0; j <= m; ++j) cuts.push_back(static_cast<double>(j) / m);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  double total = 0.0;
  for (size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double width = cuts[s + 1] - cuts[s];
    if (width <= 0.0) continue;
    const double u = 0.5 * (cuts[s] + cuts[s + 1]);
    const size_t ia = std::min(static_cast<size_t>(u * n), n - 1);
    const size_t ib = std::min(static_cast<size_t>(u * m), m - 1);
    total += width * std::abs(sa[ia] - sb[ib]);
  }
  return total;
}

std::vector<double> property_samples(const std::vector<Scene>& scenes, const std::string& name) {
  std::vector<double> out;
  for (const Scene& scene : scenes) {
    const double dt = scene.dt;
    for (int i = 0; i < scene.num_agents; ++i) {
      if (!scene.valid[i]) continue;
      if (name == "speed") {
        for (int t = 0; t < scene.horizon; ++t) out.push_back(scene.at(t, i).v);
      } else if (name == "lon_accel") {
        for (int t = 0; t + 1 < scene.horizon; ++t) {
          out.push_back((scene.at(t + 1, i).v - scene.at(t, i).v) / dt);
        }
      } else if (name == "lat_accel") {
        for (int t = 0; t + 1 < scene.horizon; ++t) {
          const double yaw_rate =
              normalize_angle(scene.at(t + 1, i).theta - scene.at(t, i).theta) / dt;
          out.push_back(scene.at(t, i).v * yaw_rate);
        }
      } else if (name == "jerk") {
        for (int t = 0; t + 2 < scene.horizon; ++t) {
          const double a0 = (scene.at(t + 1, i).v - scene.at(t, i).v) / dt;
          const double a1 = (scene.at(t + 2, i).v - scene.at(t + 1, i).v) / dt;
          out.push_back((a1 - a0) / dt);
        }
      } else if (name == "nearest_distance" || name == "nearest_relative_speed") {
        if (scene.num_agents < 2) continue;
        for (int t = 0; t < scene.horizon; ++t) {
          double best = 1e300;
          int who = -1;
          for (int j = 0; j < scene.num_agents; ++j) {
            if (j == i || !scene.valid[j]) continue;
            const double d = (scene.at(t, i).position() - scene.at(t, j).position()).norm();
            if (d < best) {
              best = d;
              who = j;
            }
          }
          if (who < 0) continue;
          if (name == "nearest_distance") {
            out.push_back(best);
          } else {
            out.push_back(std::abs(scene.at(t, i).v - scene.at(t, who).v));
          }
        }
      } else {
        throw std::invalid_argument("unknown scene property: " + name);
      }
    }
  }
  return out;
}

RealismScores realism_metric(const std::vector<Scene>& gen, const std::vector<Scene>& ref,
                             const std::vector<std::string>& features,
                             const std::vector<std::string>& relative) {
  if (gen.empty() || ref.empty()) {
    throw std::invalid_argument("realism_metric needs non-empty scene sets");
  }
  RealismScores scores;
  for (const std::string& name : features) {
    const std::vector<double> a = property_samples(gen, name);
    const std::vector<double> b = property_samples(ref, name);
    const double w = wasserstein_1d(a, b);
    scores.real_components[name] = w;
    scores.real += w;
  }
  if (!features.empty()) scores.real /= features.size();
  for (const std::string& name : relative) {
    const std::vector<double> a = property_samples(gen, name);
    const std::vector<double> b = property_samples(ref, name);
    const double w = wasserstein_1d(a, b);
    scores.rel_components[name] = w;
    scores.rel_real += w;
  }
  if (!relative.empty()) scores.rel_real /= relative.size();
  return scores;
}

std::map<double, double> planning_l2(std::span<const Vec2> pred, std::span<const Vec2> gt,
                                     double dt, const std::vector<double>& horizons_s) {
  if (pred.size() != gt.size()) throw std::invalid_argument("trajectory horizons mismatch");
  std::map<double, double> out;
  for (double h : horizons_s) {
    const int step = horizon_step(h, dt, pred.size());
    out[h] = (pred[step - 1] - gt[step - 1]).norm();
  }
  return out;
}

double horizon_average(const std::map<double, double>& per_horizon) {
  if (per_horizon.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [h, v] : per_horizon) sum += v;
  return sum / per_horizon.size();
}

std::map<double, double> collision_rate(std::span<const Vec2> pred, const VehicleDims& ego_dims,
                                        const std::vector<std::vector<OrientedBox>>& others,
                                        double dt, const std::vector<double>& horizons_s,
                                        std::span<const double> headings) {
  if (others.size() < pred.size()) {
    throw std::invalid_argument("collision_rate needs boxes for every step");
  }
  std::vector<double> derived;
  if (headings.empty()) {
    derived = derive_headings(pred);
    headings = derived;
  } else if (headings.size() != pred.size()) {
    throw std::invalid_argument("headings size mismatch");
  }

  // First step at which the ego box overlaps anything (0 = never).
  int first_hit = 0;
  for (size_t j = 0; j < pred.size() && first_hit == 0; ++j) {
    const OrientedBox ego(pred[j], ego_dims.width, ego_dims.length, headings[j]);
    for (const OrientedBox& other : others[j]) {
      if (box_iou(ego, other) > 0.0) {
        first_hit = static_cast<int>(j) + 1;
        break;
      }
    }
  }

  std::map<double, double> out;
  for (double h : horizons_s) {
    const int step = horizon_step(h, dt, pred.size());
    out[h] = (first_hit != 0 && first_hit <= step) ? 1.0 : 0.0;
  }
  return out;
}

MotionLosses motion_losses(const std::vector<std::vector<Vec2>>& candidates,
                           std::span<const double> probabilities, std::span<const Vec2> gt) {
  if (candidates.empty()) throw std::invalid_argument("motion_losses needs candidates");
  if (probabilities.size() != candidates.size()) {
    throw std::invalid_argument("one probability per candidate required");
  }
  const size_t T = gt.size();
  for (const auto& c : candidates) {
    if (c.size() != T) throw std::invalid_argument("candidate horizon mismatch");
  }
  if (T == 0) throw std::invalid_argument("empty ground truth");

  MotionLosses out;
  double best_ade = 1e300;
  for (size_t n = 0; n < candidates.size(); ++n) {
    double ade = 0.0;
    for (size_t t = 0; t < T; ++t) {
      ade += sq((candidates[n][t] - gt[t]).norm());
    }
    ade /= static_cast<double>(T);
    if (ade < best_ade) {
      best_ade = ade;
      out.best = static_cast<int>(n);
    }
  }

  const double p = probabilities[out.best];
  if (!(p > 0.0)) throw std::invalid_argument("zero probability at the selected candidate");

  // Unit-variance isotropic Gaussian likelihood of the residuals.
  double ssq = 0.0;
  for (size_t t = 0; t < T; ++t) {
    ssq += sq((candidates[out.best][t] - gt[t]).norm());
  }
  const double log_norm = 0.5 * static_cast<double>(2 * T) * std::log(2.0 * kPi);
  out.jnll = -std::log(p) + 0.5 * ssq + log_norm;

  double best_fde = 1e300;
  for (const auto& c : candidates) {
    best_fde = std::min(best_fde, sq((c[T - 1] - gt[T - 1]).norm()));
  }
  out.min_fde = best_fde;
  return out;
}

OccupancyLosses occupancy_losses(const std::vector<std::vector<double>>& pred,
                                 const std::vector<std::vector<uint8_t>>& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw std::invalid_argument("occupancy sequences must match and be non-empty");
  }
  constexpr double kDiceEps = 1e-6;
  constexpr double kProbFloor = 1e-7;
  OccupancyLosses out;
  size_t cells = 0;
  for (size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].size() != gt[t].size() || pred[t].empty()) {
      throw std::invalid_argument("occupancy grid shape mismatch");
    }
    double inter = 0.0, psum = 0.0, gsum = 0.0;
    for (size_t i = 0; i < pred[t].size(); ++i) {
      const double p = pred[t][i];
      if (p < 0.0 || p > 1.0) throw std::invalid_argument("occupancy probability out of range");
      const double g = gt[t][i] ? 1.0 : 0.0;
      inter += p * g;
      psum += p;
      gsum += g;
      const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
      out.bce += -(g * std::log(pc) + (1.0 - g) * std::log(1.0 - pc));
      ++cells;
    }
    out.dice += 1.0 - (2.0 * inter + kDiceEps) / (psum + gsum + kDiceEps);
  }
  out.dice /= pred.size();
  out.bce /= static_cast<double>(cells);
  return out;
}

double planning_loss(std::span<const Vec2> pred, std::span<const Vec2> gt,
                     const VehicleDims& ego_dims,
                     const std::vector<std::vector<OrientedBox>>& others,
                     const std::vector<double>& deltas, const std::vector<double>& lambdas,
                     std::span<const double> headings) {
  if (pred.size() != gt.size()) throw std::invalid_argument("trajectory horizons mismatch");
  if (deltas.size() != lambdas.size()) {
    throw std::invalid_argument("one lambda per delta required");
  }
  if (others.size() < pred.size()) {
    throw std::invalid_argument("planning_loss needs boxes for every step");
  }
  std::vector<double> derived;
  if (headings.empty()) {
    derived = derive_headings(pred);
    headings = derived;
  } else if (headings.size() != pred.size()) {
    throw std::invalid_argument("headings size mismatch");
  }

  double imitation = 0.0;
  for (size_t t = 0; t < pred.size(); ++t) {
    imitation += sq((pred[t] - gt[t]).norm());
  }

  double collision = 0.0;
  for (size_t d = 0; d < deltas.size(); ++d) {
    double col = 0.0;
    for (size_t t = 0; t < pred.size(); ++t) {
      const OrientedBox ego(pred[t], ego_dims.width + deltas[d], ego_dims.length + deltas[d],
                            headings[t]);
      for (const OrientedBox& other : others[t]) {
        col += box_iou(ego, other);
      }
    }
    collision += lambdas[d] * col;
  }
  return imitation + collision;
}

double feature_alignment_loss(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("feature grids must match and be non-empty");
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    sum += sq(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return sum / static_cast<double>(a.size());
}

std::string metrics_report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["schema_version"] = "1.0";
  j["rule"] = {{"no_collision", report.rule.no_collision},
               {"no_offroad", report.rule.no_offroad}};
  j["real"] = report.realism.real;
  j["rel_real"] = report.realism.rel_real;
  j["real_components"] = report.realism.real_components;
  j["rel_components"] = report.realism.rel_components;
  nlohmann::json l2 = nlohmann::json::object();
  for (const auto& [h, v] : report.l2_at) l2[std::to_string(h)] = v;
  j["l2_at"] = l2;
  nlohmann::json col = nlohmann::json::object();
  for (const auto& [h, v] : report.collision_rate_at) col[std::to_string(h)] = v;
  j["collision_rate_at"] = col;
  j["l2_avg"] = report.l2_avg;
  j["collision_avg"] = report.collision_avg;
  j["l2_avg_convention"] = report.l2_avg_convention;
  j["counts"] = {{"gen_scenes", report.gen_scenes},
                 {"ref_scenes", report.ref_scenes},
                 {"predictions", report.predictions}};
  if (!report.config_hash.empty()) j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  return j.dump(2) + "\n";
}

std::string metrics_report_to_csv(const MetricsReport& report) {
  std::ostringstream csv;
  csv << "metric,value\n";
  auto row = [&](const std::string& name, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    csv << name << "," << buf << "\n";
  };
  row("rule.no_collision", report.rule.no_collision);
  row("rule.no_offroad", report.rule.no_offroad);
  row("real", report.realism.real);
  for (const auto& [name, v] : report.realism.real_components) row("real." + name, v);
  row("rel_real", report.realism.rel_real);
  for (const auto& [name, v] : report.realism.rel_components) row("rel_real." + name, v);
  for (const auto& [h, v] : report.l2_at) {
    char key[32];
    std::snprintf(key, sizeof(key), "l2@%gs", h);
    row(key, v);
  }
  if (!report.l2_at.empty()) row("l2.avg", report.l2_avg);
  for (const auto& [h, v] : report.collision_rate_at) {
    char key[32];
    std::snprintf(key, sizeof(key), "collision@%gs", h);
    row(key, v);
  }
  if (!report.collision_rate_at.empty()) row("collision.avg", report.collision_avg);
  row("counts.gen_scenes", report.gen_scenes);
  row("counts.ref_scenes", report.ref_scenes);
  row("counts.predictions", report.predictions);
  return csv.str();
}

}  // namespace scenediff
