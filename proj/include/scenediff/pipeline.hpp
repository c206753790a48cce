#pragma once

#include <string>
#include <utility>
#include <vector>

#include "scenediff/config.hpp"
#include "scenediff/metrics.hpp"

namespace scenediff {

struct TrainOutput {
  std::string checkpoint_path;
  std::string loss_csv_path;
  float first_window_loss = 0.0f;
  float last_window_loss = 0.0f;
  int steps_done = 0;
};

/// Builds the procedural dataset, trains the denoiser, writes the checkpoint
/// and the loss curve. Throws NumericError (after writing the last stable
/// checkpoint) when the loss goes non-finite.
TrainOutput cmd_train(const RunConfig& cfg, const std::string& out_dir);

struct GenerateOutput {
  std::string manifest_path;
  std::vector<std::string> scene_files;
};

/// Samples scenes with guided diffusion. Scene i uses seed
/// cfg.seed * 1000003 + i, recorded in the manifest.
GenerateOutput cmd_generate(const RunConfig& cfg, const std::string& checkpoint_path,
                            const std::string& out_dir);

struct ConvertOutput {
  std::string manifest_path;
  /// (scene file stem, surviving instance count); -1 marks a skipped scene.
  std::vector<std::pair<std::string, int>> per_scene;
  int total_instances = 0;
  int skipped_scenes = 0;
};

ConvertOutput cmd_convert(const RunConfig& cfg, const std::string& scenes_dir,
                          const std::string& out_dir);

struct EvalOutput {
  std::string json_path;
  std::string csv_path;
  MetricsReport report;
};

/// rule/real/rel-real over the scene sets plus planning L2 / collision rate
/// for any predictions.json found in the generated directory.
EvalOutput cmd_eval(const RunConfig& cfg, const std::string& gen_dir, const std::string& ref_dir,
                    const std::string& out_dir);

struct RenderOutput {
  std::string svg_path;
  std::string pgm_dir;
};

RenderOutput cmd_render(const RunConfig& cfg, const std::string& scene_file,
                        const std::string& out_dir, int t = 0);

/// Scene files listed by the directory's manifest, falling back to a sorted
/// scan for scene_*.json.
std::vector<std::string> list_scene_files(const std::string& dir);

}  // namespace scenediff
