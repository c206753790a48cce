#include <cmath>
#include <stdexcept>

#include "scenediff/diffusion.hpp"

namespace scenediff {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_step(int k, const VarianceSchedule& sched) {
  if (k < 1 || k > sched.steps()) {
    throw std::out_of_range("diffusion step k out of range");
  }
}

// Draws standard normals for every channel of one agent slot, t-major.
void fill_agent_noise(std::vector<float>& noise, int horizon, int agents, int slot,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int t = 0; t < horizon; ++t) {
    for (int ch = 0; ch < 4; ++ch) {
      noise[(static_cast<size_t>(t) * agents + slot) * 4 + ch] =
          static_cast<float>(normal(rng));
    }
  }
}

}  // namespace

uint64_t agent_stream_seed(uint64_t scene_seed, int slot) {
  return splitmix64(scene_seed ^ splitmix64(static_cast<uint64_t>(slot) + 1));
}

std::vector<std::mt19937_64> make_agent_streams(uint64_t seed, int agents) {
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(agents);
  for (int i = 0; i < agents; ++i) {
    rngs.emplace_back(agent_stream_seed(seed, i));
  }
  return rngs;
}

std::vector<std::mt19937_64> make_agent_streams(const std::vector<uint64_t>& agent_seeds) {
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(agent_seeds.size());
  for (uint64_t s : agent_seeds) {
    rngs.emplace_back(s);
  }
  return rngs;
}

std::vector<float> forward_sample(const std::vector<float>& tau0, int k,
                                  const std::vector<float>& noise,
                                  const VarianceSchedule& sched) {
  check_step(k, sched);
  if (noise.size() != tau0.size()) {
    throw std::invalid_argument("noise tensor shape mismatch");
  }
  const double ab = sched.alpha_bar(k);
  const float scale0 = static_cast<float>(std::sqrt(ab));
  const float scale_n = static_cast<float>(std::sqrt(1.0 - ab));
  std::vector<float> out(tau0.size());
  for (size_t i = 0; i < tau0.size(); ++i) {
    out[i] = scale0 * tau0[i] + scale_n * noise[i];
  }
  return out;
}

std::vector<float> reverse_step(const std::vector<float>& tau_k, int horizon, int agents, int k,
                                const ConditionFeature& cond, const EpsModel& model,
                                const VarianceSchedule& sched,
                                std::vector<std::mt19937_64>& agent_rngs) {
  GuidanceSettings off;
  off.guide.w_agent = 0.0;
  off.guide.w_map = 0.0;
  off.guide.w_speed = 0.0;
  return guided_reverse_step(tau_k, horizon, agents, k, cond, model, sched, off, {}, 0.5,
                             agent_rngs);
}

std::vector<float> guided_reverse_step(const std::vector<float>& tau_k, int horizon, int agents,
                                       int k, const ConditionFeature& cond, const EpsModel& model,
                                       const VarianceSchedule& sched,
                                       const GuidanceSettings& guidance,
                                       const std::vector<VehicleDims>& dims, double dt,
                                       std::vector<std::mt19937_64>& agent_rngs,
                                       int* fallback_count) {
  check_step(k, sched);
  if (agent_rngs.size() != static_cast<size_t>(agents)) {
    throw std::invalid_argument("need one noise stream per agent");
  }

  const std::vector<float> eps = model.predict(tau_k, horizon, agents, k, cond);
  const double beta = sched.beta(k);
  const double alpha = sched.alpha(k);
  const double ab = sched.alpha_bar(k);
  const float eps_coef = static_cast<float>(beta / std::sqrt(1.0 - ab));
  const float inv_sqrt_alpha = static_cast<float>(1.0 / std::sqrt(alpha));

  std::vector<float> mean(tau_k.size());
  for (size_t i = 0; i < tau_k.size(); ++i) {
    mean[i] = inv_sqrt_alpha * (tau_k[i] - eps_coef * eps[i]);
  }

  if (guidance.enabled()) {
    if (static_cast<int>(dims.size()) != agents) {
      throw std::invalid_argument("guided sampling needs per-agent dims");
    }
    const NormStats& norm = model.norm();
    bool shifted = false;
    try {
      const Scene at_mean =
          tensor_to_scene(denormalize_states(mean, norm), horizon, dims, dt, "");
      const std::vector<double> grad = guide_gradient(at_mean, guidance.map, guidance.guide);
      const double step_scale = guidance.scale * beta;
      const double sign = guidance.ascend ? 1.0 : -1.0;
      for (size_t i = 0; i < mean.size(); ++i) {
        // Chain rule through de-normalization: d/dz = d/ds * stdev.
        const double shift = sign * step_scale * grad[i] * norm.stdev[i % 4];
        mean[i] = static_cast<float>(mean[i] + shift);
      }
      shifted = true;
    } catch (const std::exception&) {
      shifted = false;
    }
    if (!shifted && fallback_count != nullptr) {
      ++(*fallback_count);
    }
  }

  if (k == 1) {
    return mean;  // final step is deterministic
  }
  std::vector<float> noise(tau_k.size());
  for (int i = 0; i < agents; ++i) {
    fill_agent_noise(noise, horizon, agents, i, agent_rngs[i]);
  }
  const float sigma = static_cast<float>(std::sqrt(beta));
  for (size_t i = 0; i < mean.size(); ++i) {
    mean[i] += sigma * noise[i];
  }
  return mean;
}

Scene generate_scene_with_streams(const MapGrid& map, int horizon,
                                  const std::vector<VehicleDims>& dims,
                                  const std::vector<uint64_t>& agent_seeds,
                                  const GuidanceSettings& guidance, const EpsModel& model,
                                  const VarianceSchedule& sched, double dt,
                                  const ConditionConfig& cond_cfg, int history) {
  const int agents = static_cast<int>(dims.size());
  if (agents < 1) throw std::invalid_argument("generation needs at least one agent");
  if (agent_seeds.size() != dims.size()) {
    throw std::invalid_argument("need one seed per agent slot");
  }

  const Vec2 center{map.origin.x + map.cols * map.resolution / 2.0,
                    map.origin.y + map.rows * map.resolution / 2.0};
  const ConditionFeature cond = encode_condition(map, center, history, cond_cfg);

  std::vector<std::mt19937_64> rngs = make_agent_streams(agent_seeds);
  std::vector<float> tau(static_cast<size_t>(horizon) * agents * 4);
  for (int i = 0; i < agents; ++i) {
    fill_agent_noise(tau, horizon, agents, i, rngs[i]);
  }

  for (int k = sched.steps(); k >= 1; --k) {
    tau = guided_reverse_step(tau, horizon, agents, k, cond, model, sched, guidance, dims, dt,
                              rngs);
  }

  Scene scene =
      tensor_to_scene(denormalize_states(tau, model.norm()), horizon, dims, dt, map.id);
  return scene;
}

Scene generate_scene(const MapGrid& map, int agents, int horizon,
                     const std::vector<VehicleDims>& dims, const GuidanceSettings& guidance,
                     const EpsModel& model, const VarianceSchedule& sched, uint64_t seed,
                     double dt, const ConditionConfig& cond_cfg, int history) {
  if (static_cast<int>(dims.size()) != agents) {
    throw std::invalid_argument("dims count must match agent count");
  }
  std::vector<uint64_t> seeds(agents);
  for (int i = 0; i < agents; ++i) seeds[i] = agent_stream_seed(seed, i);
  Scene scene = generate_scene_with_streams(map, horizon, dims, seeds, guidance, model, sched,
                                            dt, cond_cfg, history);
  scene.seed = seed;
  return scene;
}

}  // namespace scenediff
