#include "scenediff/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <thread>

#include "json.hpp"
#include "scenediff/map_io.hpp"

namespace scenediff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t scene_seed(uint64_t base, int index) {
  return base * 1000003ULL + static_cast<uint64_t>(index);
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::min(std::max(workers, 1), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

GuidanceSettings guidance_from(const RunConfig& cfg, const MapGrid* map) {
  GuidanceSettings g;
  g.guide = cfg.guide;
  g.map = map;
  g.scale = cfg.generation.guide_scale;
  g.ascend = cfg.generation.guide_ascend;
  return g;
}

void check_checkpoint_compatible(const RunConfig& cfg, const Checkpoint& ckpt) {
  const DenoiserArch want = cfg.denoiser_arch();
  const DenoiserArch& have = ckpt.denoiser.arch();
  if (want.horizon != have.horizon || want.hidden != have.hidden ||
      want.k_embed != have.k_embed || want.cond_dim != have.cond_dim) {
    throw ConfigError("checkpoint architecture does not match the config descriptor");
  }
  if (ckpt.schedule.steps() != cfg.schedule.steps) {
    throw ConfigError("checkpoint schedule does not match the config");
  }
}

// Instance fields needed for planning evaluation (raster not loaded).
struct InstanceForEval {
  std::vector<Vec2> targets;
  VehicleDims ego_dims;
  std::vector<std::vector<OrientedBox>> others_by_step;  // index = t' - 1
};

InstanceForEval load_instance_for_eval(const std::string& path, int t_p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read instance record: " + path);
  json rec;
  try {
    rec = json::parse(in);
    InstanceForEval out;
    for (const auto& p : rec.at("targets")) {
      out.targets.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    out.ego_dims = VehicleDims(rec.at("ego_dims").at("width").get<double>(),
                               rec.at("ego_dims").at("length").get<double>());
    out.others_by_step.resize(t_p);
    for (const auto& jb : rec.at("other_boxes")) {
      const int step = jb.at("step").get<int>();
      if (step < 1 || step > t_p) continue;
      std::array<Vec2, 4> corners;
      for (int c = 0; c < 4; ++c) {
        corners[c] = {jb.at("corners")[c][0].get<double>(),
                      jb.at("corners")[c][1].get<double>()};
      }
      out.others_by_step[step - 1].push_back(box_from_corners(corners));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError("malformed instance record " + path + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> list_scene_files(const std::string& dir) {
  std::vector<std::string> files;
  const fs::path manifest = fs::path(dir) / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    try {
      const json j = json::parse(in);
      const std::string v = j.at("schema_version").get<std::string>();
      if (v.substr(0, v.find('.')) != "1") {
        throw DataError("unsupported manifest schema version " + v + " in " + dir);
      }
      for (const auto& entry : j.at("scenes")) {
        files.push_back((fs::path(dir) / entry.at("file").get<std::string>()).string());
      }
      return files;
    } catch (const json::exception& e) {
      throw DataError("malformed manifest in " + dir + ": " + e.what());
    }
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("scene_", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no scene files found in " + dir);
  return files;
}

TrainOutput cmd_train(const RunConfig& cfg, const std::string& out_dir) {
  if (cfg.dataset.horizon != cfg.generation.horizon) {
    throw ConfigError("dataset horizon must match the generation horizon");
  }
  fs::create_directories(out_dir);
  const std::string hash = config_hash(cfg);

  const MapGrid map = generate_map(cfg.seed, cfg.map);
  const RoadNetwork net = build_road_network(cfg.seed, cfg.map);
  const std::vector<Scene> dataset =
      build_toy_dataset(net, map, cfg.dataset, scene_seed(cfg.seed, -1));

  const Vec2 center{map.origin.x + map.cols * map.resolution / 2.0,
                    map.origin.y + map.rows * map.resolution / 2.0};
  const ConditionFeature cond =
      encode_condition(map, center, cfg.denoiser.history, cfg.condition_config());
  const std::vector<ConditionFeature> conds(dataset.size(), cond);

  const VarianceSchedule sched = cfg.schedule.build();
  Denoiser den(cfg.denoiser_arch(), cfg.seed);

  TrainConfig tc;
  tc.steps = cfg.training.steps;
  tc.lr = cfg.training.lr;
  tc.cosine_decay = cfg.training.cosine_decay;
  tc.snapshot_every = cfg.training.snapshot_every;
  tc.seed = cfg.seed;
  const TrainResult result = train_denoiser(den, dataset, conds, sched, tc);

  TrainOutput out;
  out.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
  out.loss_csv_path = (fs::path(out_dir) / "train_loss.csv").string();
  save_checkpoint(den, sched, out.checkpoint_path, "config " + hash);

  std::ofstream csv(out.loss_csv_path);
  if (!csv) throw DataError("cannot write loss curve: " + out.loss_csv_path);
  csv << "step,loss\n";
  for (size_t i = 0; i < result.losses.size(); ++i) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%zu,%.8g\n", i, static_cast<double>(result.losses[i]));
    csv << buf;
  }
  csv.close();

  const size_t window = std::max<size_t>(1, result.losses.size() / 10);
  if (!result.losses.empty()) {
    double first = 0.0, last = 0.0;
    for (size_t i = 0; i < window; ++i) first += result.losses[i];
    for (size_t i = result.losses.size() - window; i < result.losses.size(); ++i) {
      last += result.losses[i];
    }
    out.first_window_loss = static_cast<float>(first / window);
    out.last_window_loss = static_cast<float>(last / window);
  }
  out.steps_done = result.steps_done;

  json summary;
  summary["schema_version"] = "1.0";
  summary["config_hash"] = hash;
  summary["seed"] = cfg.seed;
  summary["steps_done"] = result.steps_done;
  summary["diverged"] = result.diverged;
  summary["first_window_loss"] = out.first_window_loss;
  summary["last_window_loss"] = out.last_window_loss;
  std::ofstream sum(fs::path(out_dir) / "train_summary.json");
  sum << summary.dump(2) << "\n";
  sum.close();

  if (result.diverged) {
    throw NumericError("training loss went non-finite at step " +
                       std::to_string(result.steps_done) +
                       "; last stable checkpoint written to " + out.checkpoint_path);
  }
  return out;
}

GenerateOutput cmd_generate(const RunConfig& cfg, const std::string& checkpoint_path,
                            const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string hash = config_hash(cfg);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  check_checkpoint_compatible(cfg, ckpt);

  const MapGrid map = generate_map(cfg.seed, cfg.map);
  save_map(map, (fs::path(out_dir) / "map").string(), "config " + hash);
  const GuidanceSettings guidance = guidance_from(cfg, &map);

  const int n = cfg.generation.num_scenes;
  std::vector<Scene> scenes(n);
  parallel_for(n, cfg.workers, [&](int i) {
    const uint64_t seed = scene_seed(cfg.seed, i);
    std::mt19937_64 dims_rng(seed);
    std::vector<VehicleDims> dims;
    dims.reserve(cfg.generation.agents);
    for (int a = 0; a < cfg.generation.agents; ++a) {
      dims.push_back(sample_dims(dims_rng, cfg.dataset));
    }
    scenes[i] = generate_scene(map, cfg.generation.agents, cfg.generation.horizon, dims,
                               guidance, ckpt.denoiser, ckpt.schedule, seed,
                               cfg.generation.dt, cfg.condition_config(), cfg.denoiser.history);
  });

  GenerateOutput out;
  json manifest;
  manifest["schema_version"] = "1.0";
  manifest["config_hash"] = hash;
  manifest["seed"] = cfg.seed;
  manifest["count"] = n;
  manifest["scenes"] = json::array();
  for (int i = 0; i < n; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%05d", i);
    const std::string file = std::string(stem) + ".json";
    save_scene(scenes[i], cfg.guide, (fs::path(out_dir) / file).string(), hash);
    if (cfg.generation.render_svg) {
      std::ofstream svg(fs::path(out_dir) / (std::string(stem) + ".svg"));
      svg << "<!-- config " << hash << " seed " << scenes[i].seed << " -->\n"
          << render_scene_svg(map, scenes[i], 0);
    }
    manifest["scenes"].push_back({{"file", file}, {"seed", scenes[i].seed}});
    out.scene_files.push_back((fs::path(out_dir) / file).string());
  }
  out.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream man(out.manifest_path);
  if (!man) throw DataError("cannot write manifest: " + out.manifest_path);
  man << manifest.dump(2) << "\n";
  return out;
}

ConvertOutput cmd_convert(const RunConfig& cfg, const std::string& scenes_dir,
                          const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string hash = config_hash(cfg);
  const MapGrid map = generate_map(cfg.seed, cfg.map);
  const EgoRule rule = ego_rule_from_string(cfg.convert.ego_rule);
  const std::vector<std::string> files = list_scene_files(scenes_dir);

  ConvertOutput out;
  out.per_scene.resize(files.size());
  std::vector<int> counts(files.size(), -1);

  parallel_for(static_cast<int>(files.size()), cfg.workers, [&](int i) {
    const Scene scene = load_scene(files[i]);
    if (!scene.map_id.empty() && scene.map_id != map.id) {
      throw DataError("scene " + files[i] + " references map '" + scene.map_id +
                      "' but the config generates '" + map.id + "'");
    }
    const std::optional<int> ego = select_ego(scene, rule, scene.seed);
    if (!ego.has_value()) {
      return;  // counts[i] stays -1: skipped
    }
    std::vector<EgoInstance> instances =
        build_instances(scene, map, *ego, cfg.convert.t_p, cfg.crop);
    instances = filter_instances(std::move(instances), cfg.convert.min_agents);
    const std::string stem = fs::path(files[i]).stem().string();
    counts[i] = export_dataset(instances, (fs::path(out_dir) / stem).string(),
                               "config " + hash);
  });

  json manifest;
  manifest["schema_version"] = "1.0";
  manifest["config_hash"] = hash;
  manifest["seed"] = cfg.seed;
  manifest["scenes"] = json::array();
  for (size_t i = 0; i < files.size(); ++i) {
    const std::string stem = fs::path(files[i]).stem().string();
    out.per_scene[i] = {stem, counts[i]};
    if (counts[i] < 0) {
      ++out.skipped_scenes;
      std::cout << stem << ": skipped (no eligible ego)\n";
    } else {
      out.total_instances += counts[i];
      std::cout << stem << ": " << counts[i] << " instances\n";
    }
    manifest["scenes"].push_back(
        {{"scene", stem}, {"instances", counts[i]}, {"skipped", counts[i] < 0}});
  }
  out.manifest_path = (fs::path(out_dir) / "convert_manifest.json").string();
  std::ofstream man(out.manifest_path);
  if (!man) throw DataError("cannot write manifest: " + out.manifest_path);
  man << manifest.dump(2) << "\n";
  return out;
}

EvalOutput cmd_eval(const RunConfig& cfg, const std::string& gen_dir, const std::string& ref_dir,
                    const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string hash = config_hash(cfg);
  const MapGrid map = generate_map(cfg.seed, cfg.map);

  auto load_dir = [&](const std::string& dir) {
    std::vector<std::string> files = list_scene_files(dir);
    std::vector<Scene> scenes(files.size());
    parallel_for(static_cast<int>(files.size()), cfg.workers,
                 [&](int i) { scenes[i] = load_scene(files[i]); });
    return scenes;
  };
  const std::vector<Scene> gen = load_dir(gen_dir);
  const std::vector<Scene> ref = load_dir(ref_dir);

  EvalOutput out;
  out.report.rule = rule_metric(gen, cfg.guide, map);
  out.report.realism = realism_metric(gen, ref);
  out.report.gen_scenes = static_cast<int>(gen.size());
  out.report.ref_scenes = static_cast<int>(ref.size());
  out.report.config_hash = hash;
  out.report.seed = cfg.seed;

  // Optional instance-level predictions for planning metrics.
  const fs::path pred_path = fs::path(gen_dir) / "predictions.json";
  if (fs::exists(pred_path)) {
    std::ifstream in(pred_path);
    json preds;
    try {
      preds = json::parse(in);
      const std::string v = preds.at("schema_version").get<std::string>();
      if (v.substr(0, v.find('.')) != "1") {
        throw DataError("unsupported predictions schema version " + v);
      }
    } catch (const json::exception& e) {
      throw DataError("malformed predictions.json: " + std::string(e.what()));
    }
    std::map<double, double> l2_sum, col_sum;
    int count = 0;
    for (const auto& entry : preds.at("predictions")) {
      const std::string rec_rel = entry.at("instance").get<std::string>();
      const InstanceForEval inst =
          load_instance_for_eval((pred_path.parent_path() / rec_rel).string(), cfg.convert.t_p);
      std::vector<Vec2> pred;
      for (const auto& p : entry.at("pred")) {
        pred.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      if (pred.size() != inst.targets.size()) {
        throw DataError("prediction horizon mismatch for " + rec_rel);
      }
      const auto l2 = planning_l2(pred, inst.targets, cfg.generation.dt, cfg.eval.horizons_s);
      const auto col = collision_rate(pred, inst.ego_dims, inst.others_by_step,
                                      cfg.generation.dt, cfg.eval.horizons_s);
      for (const auto& [h, v] : l2) l2_sum[h] += v;
      for (const auto& [h, v] : col) col_sum[h] += v;
      ++count;
    }
    if (count > 0) {
      for (auto& [h, v] : l2_sum) out.report.l2_at[h] = v / count;
      for (auto& [h, v] : col_sum) out.report.collision_rate_at[h] = v / count;
      out.report.l2_avg = horizon_average(out.report.l2_at);
      out.report.collision_avg = horizon_average(out.report.collision_rate_at);
      out.report.predictions = count;
    }
  }

  out.json_path = (fs::path(out_dir) / "report.json").string();
  out.csv_path = (fs::path(out_dir) / "report.csv").string();
  std::ofstream js(out.json_path);
  if (!js) throw DataError("cannot write report: " + out.json_path);
  js << metrics_report_to_json(out.report);
  std::ofstream csv(out.csv_path);
  if (!csv) throw DataError("cannot write report: " + out.csv_path);
  csv << "config_hash," << hash << "\nseed," << cfg.seed << "\n"
      << metrics_report_to_csv(out.report);
  return out;
}

RenderOutput cmd_render(const RunConfig& cfg, const std::string& scene_file,
                        const std::string& out_dir, int t) {
  fs::create_directories(out_dir);
  const std::string hash = config_hash(cfg);
  const MapGrid map = generate_map(cfg.seed, cfg.map);
  const Scene scene = load_scene(scene_file);
  if (t < 0 || t >= scene.horizon) throw ConfigError("render timestep out of range");

  RenderOutput out;
  const std::string stem = fs::path(scene_file).stem().string();
  out.svg_path = (fs::path(out_dir) / (stem + ".svg")).string();
  std::ofstream svg(out.svg_path);
  if (!svg) throw DataError("cannot write render: " + out.svg_path);
  svg << "<!-- config " << hash << " seed " << scene.seed << " -->\n"
      << render_scene_svg(map, scene, t);

  out.pgm_dir = (fs::path(out_dir) / (stem + "_channels")).string();
  save_raster_channels(rasterize_scene(map, scene, t), out.pgm_dir, "config " + hash);
  return out;
}

}  // namespace scenediff
