#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenediff/geometry.hpp"

namespace scenediff {

/// A generated or recorded multi-agent trajectory rollout: horizon x agents
/// states plus per-agent footprints and a validity mask. States are stored
/// row-major by timestep: states[t * num_agents + i].
struct Scene {
  int horizon = 0;
  int num_agents = 0;
  double dt = 0.5;
  std::vector<AgentState> states;
  std::vector<VehicleDims> dims;
  std::vector<uint8_t> valid;
  std::string map_id;
  uint64_t seed = 0;

  Scene() = default;
  Scene(int horizon_, int num_agents_, double dt_ = 0.5);

  const AgentState& at(int t, int i) const { return states[static_cast<size_t>(t) * num_agents + i]; }
  AgentState& at(int t, int i) { return states[static_cast<size_t>(t) * num_agents + i]; }

  /// The agent's position sequence over the full horizon.
  std::vector<Vec2> agent_path(int i) const;

  /// Throws std::invalid_argument on any structural invariant breach
  /// (horizon < 2, empty agents, non-finite states, dt <= 0, size mismatch).
  void check() const;
};

}  // namespace scenediff
