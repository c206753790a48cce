#include "scenediff/guides.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenediff {

namespace {

// Per-timestep map-collision term for one agent footprint.
double map_term(const MapGrid& map, const AgentState& s, const VehicleDims& d, int grid_n) {
  const std::vector<Vec2> pts = sample_bbox_grid(s, d, grid_n);
  std::vector<Vec2> onroad;
  std::vector<Vec2> offroad;
  for (const Vec2& p : pts) {
    (is_onroad(map, p) ? onroad : offroad).push_back(p);
  }
  if (onroad.empty() || offroad.empty()) {
    return 0.0;
  }
  double term = 0.0;
  for (const Vec2& off : offroad) {
    double best = 1e300;
    for (const Vec2& on : onroad) {
      best = std::min(best, (on - off).norm());
    }
    term += std::max(1.0 - best, 0.0);
  }
  return term;
}

std::vector<uint8_t> moving_mask(const Scene& scene, const GuideConfig& cfg) {
  std::vector<uint8_t> moving(scene.num_agents, 0);
  for (int i = 0; i < scene.num_agents; ++i) {
    moving[i] = scene.valid[i] && agent_is_moving(scene, i, cfg.moving_threshold);
  }
  return moving;
}

}  // namespace

void GuideConfig::check() const {
  if (!(gamma > 0.0) || !(gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
  if (v_min > v_max) throw std::invalid_argument("v_min must not exceed v_max");
  if (w_agent < 0.0 || w_map < 0.0 || w_speed < 0.0) {
    throw std::invalid_argument("guide weights must be non-negative");
  }
  if (grid_n < 2) throw std::invalid_argument("grid_n must be >= 2");
  if (delta_buffer < 0.0) throw std::invalid_argument("buffer distance must be >= 0");
}

std::vector<double> decay_weights(int horizon, double gamma) {
  if (horizon < 1) throw std::invalid_argument("decay_weights needs horizon >= 1");
  std::vector<double> w(horizon);
  double power = 1.0;
  double sum = 0.0;
  for (int t = 0; t < horizon; ++t) {
    power *= gamma;  // gamma^(t+1)
    w[t] = power;
    sum += power;
  }
  for (double& v : w) v /= sum;
  return w;
}

bool agent_is_moving(const Scene& scene, int i, double threshold) {
  for (int t = 0; t < scene.horizon; ++t) {
    if (std::abs(scene.at(t, i).v) > threshold) return true;
  }
  return false;
}

double agent_collision_guide(const Scene& scene, const GuideConfig& cfg) {
  cfg.check();
  const std::vector<double> w = decay_weights(scene.horizon, cfg.gamma);
  const std::vector<uint8_t> moving = moving_mask(scene, cfg);
  double total = 0.0;
  for (int i = 0; i < scene.num_agents; ++i) {
    if (!moving[i]) continue;
    const double ri = scene.dims[i].radius();
    for (int t = 0; t < scene.horizon; ++t) {
      const Vec2 pi = scene.at(t, i).position();
      double step_term = 0.0;
      for (int j = 0; j < scene.num_agents; ++j) {
        if (j == i || !scene.valid[j]) continue;
        const double d_safe = ri + scene.dims[j].radius() + cfg.delta_buffer;
        const double dist = (pi - scene.at(t, j).position()).norm();
        step_term += std::max(1.0 - dist / d_safe, 0.0);
      }
      total += w[t] * step_term;
    }
  }
  return total;
}

double map_collision_guide(const Scene& scene, const MapGrid& map, const GuideConfig& cfg) {
  cfg.check();
  const std::vector<double> w = decay_weights(scene.horizon, cfg.gamma);
  const std::vector<uint8_t> moving = moving_mask(scene, cfg);
  double total = 0.0;
  for (int i = 0; i < scene.num_agents; ++i) {
    if (!moving[i]) continue;
    for (int t = 0; t < scene.horizon; ++t) {
      total += w[t] * map_term(map, scene.at(t, i), scene.dims[i], cfg.grid_n);
    }
  }
  return total;
}

double speed_guide(const Scene& scene, const GuideConfig& cfg) {
  cfg.check();
  const std::vector<double> w = decay_weights(scene.horizon, cfg.gamma);
  const std::vector<uint8_t> moving = moving_mask(scene, cfg);
  double total = 0.0;
  for (int i = 0; i < scene.num_agents; ++i) {
    if (!moving[i]) continue;
    for (int t = 0; t < scene.horizon; ++t) {
      const double v = scene.at(t, i).v;
      total += w[t] * (std::max(v - cfg.v_max, 0.0) + std::max(cfg.v_min - v, 0.0));
    }
  }
  return total;
}

double total_guide(const Scene& scene, const MapGrid* map, const GuideConfig& cfg) {
  cfg.check();
  double total = 0.0;
  if (cfg.w_agent > 0.0) total += cfg.w_agent * agent_collision_guide(scene, cfg);
  if (cfg.w_map > 0.0) {
    if (map == nullptr) throw std::invalid_argument("map guide enabled but no map supplied");
    total += cfg.w_map * map_collision_guide(scene, *map, cfg);
  }
  if (cfg.w_speed > 0.0) total += cfg.w_speed * speed_guide(scene, cfg);
  return total;
}

std::vector<double> guide_gradient(const Scene& scene, const MapGrid* map,
                                   const GuideConfig& cfg) {
  cfg.check();
  scene.check();
  const int T = scene.horizon;
  const int M = scene.num_agents;
  std::vector<double> grad(static_cast<size_t>(T) * M * 4, 0.0);
  const std::vector<double> w = decay_weights(T, cfg.gamma);
  const std::vector<uint8_t> moving = moving_mask(scene, cfg);
  auto entry = [&](int t, int i, int ch) -> double& {
    return grad[(static_cast<size_t>(t) * M + i) * 4 + ch];
  };

  if (cfg.w_agent > 0.0) {
    for (int i = 0; i < M; ++i) {
      if (!moving[i]) continue;
      const double ri = scene.dims[i].radius();
      for (int t = 0; t < T; ++t) {
        const Vec2 pi = scene.at(t, i).position();
        for (int j = 0; j < M; ++j) {
          if (j == i || !scene.valid[j]) continue;
          const double d_safe = ri + scene.dims[j].radius() + cfg.delta_buffer;
          const Vec2 diff = pi - scene.at(t, j).position();
          const double dist = diff.norm();
          // Subgradient 0 at the hinge corner and at coincident centers.
          if (dist >= d_safe || dist <= 1e-12) continue;
          const double coef = -cfg.w_agent * w[t] / (d_safe * dist);
          entry(t, i, 0) += coef * diff.x;
          entry(t, i, 1) += coef * diff.y;
          entry(t, j, 0) -= coef * diff.x;
          entry(t, j, 1) -= coef * diff.y;
        }
      }
    }
  }

  if (cfg.w_speed > 0.0) {
    for (int i = 0; i < M; ++i) {
      if (!moving[i]) continue;
      for (int t = 0; t < T; ++t) {
        const double v = scene.at(t, i).v;
        if (v > cfg.v_max) {
          entry(t, i, 2) += cfg.w_speed * w[t];
        } else if (v < cfg.v_min) {
          entry(t, i, 2) -= cfg.w_speed * w[t];
        }
      }
    }
  }

  if (cfg.w_map > 0.0) {
    if (map == nullptr) throw std::invalid_argument("map guide enabled but no map supplied");
    // The raster penalty itself is a staircase in the pose (the footprint
    // lattice moves rigidly, so lattice-pair distances never change and only
    // membership flips at cell edges). The usable descent direction freezes
    // the nearest on-road points as world-frame targets and pulls every
    // banded off-road point toward its target; following -gradient shrinks
    // those distances and drives the penalty's membership terms to zero.
    for (int i = 0; i < M; ++i) {
      if (!moving[i]) continue;
      const VehicleDims& d = scene.dims[i];
      for (int t = 0; t < T; ++t) {
        const AgentState& s = scene.at(t, i);
        const std::vector<Vec2> pts = sample_bbox_grid(s, d, cfg.grid_n);
        std::vector<Vec2> onroad, offroad;
        for (const Vec2& p : pts) {
          (is_onroad(*map, p) ? onroad : offroad).push_back(p);
        }
        if (onroad.empty() || offroad.empty()) continue;
        const double scale = cfg.w_map * w[t];
        for (const Vec2& off : offroad) {
          double best = 1e300;
          Vec2 target;
          for (const Vec2& on : onroad) {
            const double dist = (on - off).norm();
            if (dist < best) {
              best = dist;
              target = on;
            }
          }
          // Outside the 1 m band the penalty term is clamped flat; at the
          // coincident corner the subgradient is 0.
          if (best >= 1.0 || best <= 1e-12) continue;
          const Vec2 unit = (off - target) * (1.0 / best);
          entry(t, i, 0) += scale * unit.x;
          entry(t, i, 1) += scale * unit.y;
          // The lattice point rotates about the agent center.
          const Vec2 arm = off - s.position();
          entry(t, i, 3) += scale * unit.dot({-arm.y, arm.x});
        }
      }
    }
  }

  // Stationary agents are never pushed, even by cross terms of moving pairs.
  for (int i = 0; i < M; ++i) {
    if (moving[i]) continue;
    for (int t = 0; t < T; ++t) {
      for (int ch = 0; ch < 4; ++ch) entry(t, i, ch) = 0.0;
    }
  }

  for (double g : grad) {
    if (!std::isfinite(g)) throw std::runtime_error("guide gradient is non-finite");
  }
  return grad;
}

}  // namespace scenediff
