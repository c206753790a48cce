#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "scenediff/guides.hpp"
#include "scenediff/map.hpp"
#include "scenediff/scene.hpp"

#include <Eigen/Dense>

namespace scenediff {

// ---------------------------------------------------------------------------
// Variance schedule

enum class ScheduleKind { kLinear, kCosine };

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Forward-process noise schedule. Index 0 holds diffusion step k = 1.
struct VarianceSchedule {
  ScheduleKind kind = ScheduleKind::kLinear;
  double beta_min = 0.0;
  double beta_max = 0.0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  int steps() const { return static_cast<int>(betas.size()); }
  double beta(int k) const { return betas[k - 1]; }
  double alpha(int k) const { return alphas[k - 1]; }
  double alpha_bar(int k) const { return alpha_bars[k - 1]; }
};

/// Monotone schedule with betas in (0, 1). Linear interpolates the bounds;
/// cosine uses the squared-cosine cumulative form with betas clamped to the
/// bounds. Throws on invalid bounds or steps < 1.
VarianceSchedule make_schedule(int steps, double beta_min, double beta_max, ScheduleKind kind);

/// Desk-scale default: linear 1e-4..0.02 scaled by 1000/steps so the terminal
/// marginal is near-Gaussian at small step counts (alpha_bar_K < 0.05).
VarianceSchedule make_default_schedule(int steps = 100);

// ---------------------------------------------------------------------------
// Condition encoding

struct ConditionConfig {
  double window_m = 60.0;
  int pool = 8;              ///< pooled cells per side and layer
  int samples_per_cell = 4;  ///< sample lattice side inside each pooled cell
};

/// Context feature derived from map-layer content around a point.
struct ConditionFeature {
  std::vector<float> values;
};

inline int condition_dim(const ConditionConfig& cfg, int history) {
  return kNumMapLayers * cfg.pool * cfg.pool * history;
}

/// Average-pooled map-layer patches in a fixed axis-aligned window around
/// `center`, concatenated over `history` rasters. Pure function of inputs.
ConditionFeature encode_condition(const MapGrid& map, Vec2 center, int history,
                                  const ConditionConfig& cfg = {});

// ---------------------------------------------------------------------------
// State tensors and normalization

/// Per-channel z-scoring statistics for (x, y, v, theta).
struct NormStats {
  std::array<float, 4> mean{0.f, 0.f, 0.f, 0.f};
  std::array<float, 4> stdev{1.f, 1.f, 1.f, 1.f};
};

NormStats compute_norm_stats(const std::vector<Scene>& scenes);

/// Flattens scene states to [ (t * M + i) * 4 + ch ] in physical units.
std::vector<float> scene_to_tensor(const Scene& scene);
std::vector<float> normalize_states(const std::vector<float>& physical, const NormStats& norm);
std::vector<float> denormalize_states(const std::vector<float>& normalized, const NormStats& norm);

/// Builds a Scene from a physical-unit tensor; speeds are floored at zero and
/// headings re-wrapped.
Scene tensor_to_scene(const std::vector<float>& physical, int horizon,
                      const std::vector<VehicleDims>& dims, double dt, const std::string& map_id);

// ---------------------------------------------------------------------------
// Denoiser

/// Anything that predicts the forward noise from a noised trajectory tensor.
/// Tests inject analytic oracles through this seam.
class EpsModel {
 public:
  virtual ~EpsModel() = default;
  /// tau_k is normalized, laid out like scene_to_tensor. Returns a tensor of
  /// identical shape with the predicted noise.
  virtual std::vector<float> predict(const std::vector<float>& tau_k, int horizon, int agents,
                                     int k, const ConditionFeature& cond) const = 0;
  virtual const NormStats& norm() const = 0;
};

struct DenoiserArch {
  int horizon = 20;
  int hidden = 64;
  int k_embed = 8;
  int cond_dim = 320;

  int input_dim() const { return horizon * 4 + k_embed + cond_dim; }
  int output_dim() const { return horizon * 4; }
};

/// Per-agent temporal encoder with shared weights plus a mean-pooled
/// cross-agent context vector, so the model is permutation-equivariant over
/// agents. The pooled mean is summed in sorted order, which makes the
/// equivariance bit-exact. The prediction carries a sqrt(1 - alpha_bar_k)
/// skip of the input, so the net only learns the correction and the reverse
/// chain stays contractive far from the data.
class Denoiser final : public EpsModel {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserArch& arch, uint64_t init_seed,
           const VarianceSchedule& sched = VarianceSchedule{});

  std::vector<float> predict(const std::vector<float>& tau_k, int horizon, int agents, int k,
                             const ConditionFeature& cond) const override;
  const NormStats& norm() const override { return norm_stats; }

  /// Loss of one training example plus analytic parameter gradients in the
  /// flatten_params layout.
  float loss_and_gradients(const std::vector<float>& tau_k, int agents, int k,
                           const ConditionFeature& cond, const std::vector<float>& target_eps,
                           std::vector<float>& grads) const;

  const DenoiserArch& arch() const { return arch_; }
  size_t param_count() const;
  std::vector<float> flatten_params() const;
  void load_params(const std::vector<float>& flat);

  /// Input-skip coefficient sqrt(1 - alpha_bar_k); 0 without a schedule.
  float skip_scale(int k) const {
    return k >= 1 && k <= static_cast<int>(skip_scales_.size()) ? skip_scales_[k - 1] : 0.0f;
  }
  void set_schedule(const VarianceSchedule& sched);

  NormStats norm_stats;

  // Weight layout: enc1 (hidden x input) -> tanh -> enc2 (hidden x hidden)
  // -> tanh -> pool -> dec1 (hidden x 2*hidden) -> tanh -> dec2 (out x hidden).
  Eigen::MatrixXf w1, w2, w3, w4;
  Eigen::VectorXf b1, b2, b3, b4;

 private:
  DenoiserArch arch_;
  std::vector<float> skip_scales_;
};

/// Sinusoidal embedding of the diffusion step index.
Eigen::VectorXf embed_step(int k, int dim);

// ---------------------------------------------------------------------------
// Checkpoint persistence: "SDCK" magic, u32 LE header length, JSON header
// (arch, normalization, schedule), then the raw float32 LE parameter block.

struct Checkpoint {
  Denoiser denoiser;
  VarianceSchedule schedule;
};

void save_checkpoint(const Denoiser& den, const VarianceSchedule& sched, const std::string& path,
                     const std::string& provenance = {});
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int steps = 4000;
  float lr = 2e-4f;
  bool cosine_decay = true;
  uint64_t seed = 0;
  int snapshot_every = 200;
};

struct TrainResult {
  std::vector<float> losses;  ///< per-step noise-prediction MSE
  bool diverged = false;
  int steps_done = 0;
};

/// Noise-prediction (epsilon) regression with Adam and cosine learning-rate
/// decay. Agents are canonicalized (sorted by initial state) at intake so
/// permuted datasets reproduce identical runs. On a non-finite loss the last
/// snapshot is restored and `diverged` is set.
TrainResult train_denoiser(Denoiser& den, const std::vector<Scene>& dataset,
                           const std::vector<ConditionFeature>& conds,
                           const VarianceSchedule& sched, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Sampling

/// Closed-form forward marginal: sqrt(ab_k) tau0 + sqrt(1 - ab_k) noise.
std::vector<float> forward_sample(const std::vector<float>& tau0, int k,
                                  const std::vector<float>& noise,
                                  const VarianceSchedule& sched);

/// Derives one independent noise stream per agent slot.
std::vector<std::mt19937_64> make_agent_streams(uint64_t seed, int agents);
std::vector<std::mt19937_64> make_agent_streams(const std::vector<uint64_t>& agent_seeds);

/// One ancestral step tau_k -> tau_{k-1} with fixed variance beta_k; the final
/// step (k = 1) is noise-free.
std::vector<float> reverse_step(const std::vector<float>& tau_k, int horizon, int agents, int k,
                                const ConditionFeature& cond, const EpsModel& model,
                                const VarianceSchedule& sched,
                                std::vector<std::mt19937_64>& agent_rngs);

struct GuidanceSettings {
  GuideConfig guide;
  const MapGrid* map = nullptr;
  double scale = 1.0;   ///< guidance step is scale * beta_k
  bool ascend = false;  ///< add the gradient instead of subtracting it

  bool enabled() const {
    return guide.w_agent > 0.0 || guide.w_map > 0.0 || guide.w_speed > 0.0;
  }
};

/// reverse_step with the posterior mean shifted against the guide gradient
/// evaluated at the mean. Bit-identical to reverse_step when all guide
/// weights are zero. A non-finite gradient falls back to the unguided mean
/// for that step and bumps *fallback_count.
std::vector<float> guided_reverse_step(const std::vector<float>& tau_k, int horizon, int agents,
                                       int k, const ConditionFeature& cond, const EpsModel& model,
                                       const VarianceSchedule& sched,
                                       const GuidanceSettings& guidance,
                                       const std::vector<VehicleDims>& dims, double dt,
                                       std::vector<std::mt19937_64>& agent_rngs,
                                       int* fallback_count = nullptr);

/// Full K-step guided chain from pure noise; deterministic per seed.
Scene generate_scene(const MapGrid& map, int agents, int horizon,
                     const std::vector<VehicleDims>& dims, const GuidanceSettings& guidance,
                     const EpsModel& model, const VarianceSchedule& sched, uint64_t seed,
                     double dt = 0.5, const ConditionConfig& cond_cfg = {}, int history = 1);

/// Same chain with explicit per-agent seed streams (permuting agents together
/// with their seeds permutes the output identically).
Scene generate_scene_with_streams(const MapGrid& map, int horizon,
                                  const std::vector<VehicleDims>& dims,
                                  const std::vector<uint64_t>& agent_seeds,
                                  const GuidanceSettings& guidance, const EpsModel& model,
                                  const VarianceSchedule& sched, double dt = 0.5,
                                  const ConditionConfig& cond_cfg = {}, int history = 1);

uint64_t agent_stream_seed(uint64_t scene_seed, int slot);

}  // namespace scenediff
