#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "scenediff/diffusion.hpp"

namespace scenediff {

namespace {

// Canonical agent order (lexicographic on the initial state) so datasets that
// differ only by agent permutation train identically.
Scene canonicalize_agents(const Scene& scene) {
  std::vector<int> order(scene.num_agents);
  for (int i = 0; i < scene.num_agents; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const AgentState& sa = scene.at(0, a);
    const AgentState& sb = scene.at(0, b);
    return std::tie(sa.x, sa.y, sa.v, sa.theta) < std::tie(sb.x, sb.y, sb.v, sb.theta);
  });
  Scene out(scene.horizon, scene.num_agents, scene.dt);
  out.map_id = scene.map_id;
  out.seed = scene.seed;
  for (int i = 0; i < scene.num_agents; ++i) {
    out.dims[i] = scene.dims[order[i]];
    out.valid[i] = scene.valid[order[i]];
    for (int t = 0; t < scene.horizon; ++t) {
      out.at(t, i) = scene.at(t, order[i]);
    }
  }
  return out;
}

}  // namespace

TrainResult train_denoiser(Denoiser& den, const std::vector<Scene>& dataset,
                           const std::vector<ConditionFeature>& conds,
                           const VarianceSchedule& sched, const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  if (conds.size() != dataset.size()) {
    throw std::invalid_argument("need one condition feature per scene");
  }
  for (const Scene& scene : dataset) {
    scene.check();
    if (scene.horizon != den.arch().horizon) {
      throw std::invalid_argument("all scenes must share the denoiser horizon");
    }
  }
  if (cfg.steps < 1) throw std::invalid_argument("training needs at least one step");

  std::vector<Scene> canon;
  canon.reserve(dataset.size());
  for (const Scene& scene : dataset) canon.push_back(canonicalize_agents(scene));

  den.set_schedule(sched);
  den.norm_stats = compute_norm_stats(canon);
  std::vector<std::vector<float>> tensors;
  tensors.reserve(canon.size());
  for (const Scene& scene : canon) {
    tensors.push_back(normalize_states(scene_to_tensor(scene), den.norm_stats));
  }

  std::vector<float> params = den.flatten_params();
  std::vector<float> m(params.size(), 0.0f), v(params.size(), 0.0f), grads;
  std::vector<float> snapshot = params;
  int snapshot_step = 0;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick_scene(0, canon.size() - 1);
  std::uniform_int_distribution<int> pick_k(1, sched.steps());
  std::normal_distribution<double> normal(0.0, 1.0);

  const float beta1 = 0.9f, beta2 = 0.999f, adam_eps = 1e-8f;
  const float lr_end = cfg.lr / 100.0f;

  TrainResult result;
  result.losses.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    const size_t si = pick_scene(rng);
    const int k = pick_k(rng);
    const std::vector<float>& tau0 = tensors[si];
    std::vector<float> noise(tau0.size());
    for (float& x : noise) x = static_cast<float>(normal(rng));
    const std::vector<float> tau_k = forward_sample(tau0, k, noise, sched);

    const float loss =
        den.loss_and_gradients(tau_k, canon[si].num_agents, k, conds[si], noise, grads);

    if (!std::isfinite(loss)) {
      // Roll back to the last stable snapshot and stop.
      den.load_params(snapshot);
      result.diverged = true;
      result.steps_done = snapshot_step;
      return result;
    }
    result.losses.push_back(loss);

    float lr = cfg.lr;
    if (cfg.cosine_decay) {
      const float progress = static_cast<float>(step) / static_cast<float>(cfg.steps);
      lr = lr_end + 0.5f * (cfg.lr - lr_end) * (1.0f + std::cos(3.14159265f * progress));
    }
    const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(step + 1));
    const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(step + 1));
    for (size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0f - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0f - beta2) * grads[i] * grads[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + adam_eps);
    }
    den.load_params(params);

    if (cfg.snapshot_every > 0 && (step + 1) % cfg.snapshot_every == 0) {
      snapshot = params;
      snapshot_step = step + 1;
    }
  }
  result.steps_done = cfg.steps;
  return result;
}

}  // namespace scenediff
