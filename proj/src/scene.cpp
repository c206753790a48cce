#include "scenediff/scene.hpp"

#include <cmath>
#include <stdexcept>

namespace scenediff {

Scene::Scene(int horizon_, int num_agents_, double dt_)
    : horizon(horizon_),
      num_agents(num_agents_),
      dt(dt_),
      states(static_cast<size_t>(horizon_) * num_agents_),
      dims(num_agents_),
      valid(num_agents_, 1) {}

std::vector<Vec2> Scene::agent_path(int i) const {
  std::vector<Vec2> path;
  path.reserve(horizon);
  for (int t = 0; t < horizon; ++t) {
    path.push_back(at(t, i).position());
  }
  return path;
}

void Scene::check() const {
  if (horizon < 2) throw std::invalid_argument("scene horizon must be >= 2");
  if (num_agents < 1) throw std::invalid_argument("scene needs at least one agent");
  if (!(dt > 0.0)) throw std::invalid_argument("scene dt must be positive");
  if (states.size() != static_cast<size_t>(horizon) * num_agents ||
      dims.size() != static_cast<size_t>(num_agents) || valid.size() != static_cast<size_t>(num_agents)) {
    throw std::invalid_argument("scene tensor sizes inconsistent with horizon/num_agents");
  }
  for (const AgentState& s : states) {
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.v) || !std::isfinite(s.theta)) {
      throw std::invalid_argument("scene contains non-finite state");
    }
  }
}

}  // namespace scenediff
