#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenediff/dataset.hpp"
#include "scenediff/diffusion.hpp"
#include "scenediff/ego.hpp"
#include "scenediff/guides.hpp"
#include "scenediff/map.hpp"

namespace scenediff {

/// Bad configuration or incompatible inputs (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Missing or malformed data files (CLI exit code 3).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Numeric failures such as training divergence (CLI exit code 4).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScheduleParams {
  int steps = 100;
  double beta_min = -1.0;  ///< negative = derive the desk-scale default
  double beta_max = -1.0;
  std::string kind = "linear";

  VarianceSchedule build() const;
};

struct DenoiserParams {
  int hidden = 64;
  int k_embed = 8;
  int cond_pool = 8;
  int history = 1;
};

struct TrainingParams {
  int steps = 4000;
  float lr = 2e-4f;
  bool cosine_decay = true;
  int snapshot_every = 200;
};

struct GenerationParams {
  int num_scenes = 10;
  int agents = 6;
  int horizon = 40;
  double dt = 0.5;
  double guide_scale = 1.0;
  bool guide_ascend = false;
  bool render_svg = false;
};

struct ConvertParams {
  int t_p = 6;
  std::string ego_rule = "longest";
  int min_agents = 2;
};

struct EvalParams {
  std::vector<double> horizons_s = {1.0, 2.0, 3.0};
};

/// Everything a pipeline run needs; a persisted config re-runs to identical
/// outputs.
struct RunConfig {
  uint64_t seed = 42;
  RoadNetworkSpec map;
  ScheduleParams schedule;
  DenoiserParams denoiser;
  TrainingParams training;
  ToyDatasetConfig dataset;
  GuideConfig guide;
  GenerationParams generation;
  ConvertParams convert;
  CropConfig crop;
  EvalParams eval;
  int workers = 1;
  std::string out_dir;

  ConditionConfig condition_config() const;
  DenoiserArch denoiser_arch() const;
};

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

/// FNV-1a over the canonical JSON dump; stamped into every output file.
std::string config_hash(const RunConfig& cfg);

/// Scene file (JSON): dt, horizon, agents with dims and per-step states,
/// map id, seed, guide config, provenance.
void save_scene(const Scene& scene, const GuideConfig& guide, const std::string& path,
                const std::string& config_hash_hex);
Scene load_scene(const std::string& path, GuideConfig* guide_out = nullptr);

/// Default output root: $SCENEDIFF_OUT or "./out".
std::string default_out_root();

}  // namespace scenediff
