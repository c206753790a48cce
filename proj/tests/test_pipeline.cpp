#include "scenediff/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "json.hpp"

using namespace scenediff;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.map.extent_m = 80.0;
  cfg.map.resolution = 0.5;
  cfg.map.num_roads = 2;
  cfg.schedule.steps = 30;
  cfg.denoiser.hidden = 24;
  cfg.denoiser.cond_pool = 4;
  cfg.training.steps = 800;
  cfg.training.lr = 3e-3f;
  cfg.dataset.num_scenes = 8;
  cfg.dataset.agents = 3;
  cfg.generation.num_scenes = 3;
  cfg.generation.agents = 3;
  cfg.generation.horizon = 12;
  cfg.dataset.horizon = 12;
  cfg.crop.meters_per_pixel = 0.5;
  cfg.convert.t_p = 6;
  return cfg;
}

fs::path temp_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("run config JSON round-trips and hashes stably") {
  RunConfig cfg = tiny_config();
  const std::string text = run_config_to_json(cfg);
  const RunConfig back = run_config_from_json(text);
  CHECK(run_config_to_json(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));

  // A changed field changes the hash.
  RunConfig other = cfg;
  other.guide.w_agent = 12.0;
  CHECK(config_hash(other) != config_hash(cfg));

  CHECK_THROWS_AS(run_config_from_json("not json"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json("{\"schema_version\":\"9.0\"}"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json("{\"guide\":{\"gamma\":2.0}}"), ConfigError);
}

TEST_CASE("scene files round-trip") {
  Scene scene(4, 2, 0.5);
  scene.dims[0] = VehicleDims(2.0, 4.5);
  scene.dims[1] = VehicleDims(1.9, 4.0);
  scene.map_id = "map-7";
  scene.seed = 99;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (AgentState& s : scene.states) {
    s = AgentState(u(rng), u(rng), std::abs(u(rng)) / 4.0, u(rng) / 7.0);
  }

  const auto dir = temp_dir("scenediff_scene_io");
  const std::string path = (dir / "scene_test.json").string();
  GuideConfig guide;
  guide.w_agent = 25.0;
  save_scene(scene, guide, path, "abc123");

  GuideConfig guide_back;
  const Scene back = load_scene(path, &guide_back);
  CHECK(back.horizon == scene.horizon);
  CHECK(back.num_agents == scene.num_agents);
  CHECK(back.map_id == scene.map_id);
  CHECK(back.seed == scene.seed);
  CHECK(guide_back.w_agent == 25.0);
  for (size_t i = 0; i < scene.states.size(); ++i) {
    CHECK(back.states[i].x == scene.states[i].x);
    CHECK(back.states[i].y == scene.states[i].y);
    CHECK(back.states[i].v == scene.states[i].v);
    CHECK(back.states[i].theta == scene.states[i].theta);
  }

  CHECK_THROWS_AS(load_scene((dir / "missing.json").string()), DataError);
}

TEST_CASE("cmd_train writes a checkpoint and improves the loss") {
  const RunConfig cfg = tiny_config();
  const auto out_a = temp_dir("scenediff_train_a");
  const auto out_b = temp_dir("scenediff_train_b");

  const TrainOutput a = cmd_train(cfg, out_a.string());
  CHECK(fs::exists(a.checkpoint_path));
  CHECK(fs::exists(a.loss_csv_path));
  CHECK(a.last_window_loss < a.first_window_loss);

  // Same config and seed: bit-identical checkpoint and loss curve.
  const TrainOutput b = cmd_train(cfg, out_b.string());
  CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
  CHECK(slurp(a.loss_csv_path) == slurp(b.loss_csv_path));
}

TEST_CASE("generate, convert, and eval compose deterministically") {
  const RunConfig cfg = tiny_config();
  const auto train_dir = temp_dir("scenediff_pipe_train");
  const auto gen_a = temp_dir("scenediff_pipe_gen_a");
  const auto gen_b = temp_dir("scenediff_pipe_gen_b");
  const auto conv_dir = temp_dir("scenediff_pipe_conv");
  const auto eval_dir = temp_dir("scenediff_pipe_eval");
  const auto eval_dir2 = temp_dir("scenediff_pipe_eval2");

  const TrainOutput trained = cmd_train(cfg, train_dir.string());

  const GenerateOutput ga = cmd_generate(cfg, trained.checkpoint_path, gen_a.string());
  CHECK(ga.scene_files.size() == 3);
  CHECK(fs::exists(ga.manifest_path));

  const GenerateOutput gb = cmd_generate(cfg, trained.checkpoint_path, gen_b.string());
  for (size_t i = 0; i < ga.scene_files.size(); ++i) {
    CHECK(slurp(ga.scene_files[i]) == slurp(gb.scene_files[i]));
  }

  // Checkpoint/config mismatch is a config error.
  RunConfig wrong = cfg;
  wrong.denoiser.hidden = 99;
  CHECK_THROWS_AS(cmd_generate(wrong, trained.checkpoint_path, gen_b.string()), ConfigError);

  const ConvertOutput conv = cmd_convert(cfg, gen_a.string(), conv_dir.string());
  CHECK(conv.per_scene.size() == 3);
  for (const auto& [stem, count] : conv.per_scene) {
    if (count >= 0) {
      CHECK(count <= cfg.generation.horizon - cfg.convert.t_p);
    }
  }

  const EvalOutput eval = cmd_eval(cfg, gen_a.string(), gen_a.string(), eval_dir.string());
  CHECK(eval.report.realism.real == 0.0);
  CHECK(eval.report.realism.rel_real == 0.0);
  CHECK(eval.report.gen_scenes == 3);

  // Re-running eval reproduces the CSV byte for byte.
  const EvalOutput eval2 = cmd_eval(cfg, gen_a.string(), gen_a.string(), eval_dir2.string());
  CHECK(slurp(eval.csv_path) == slurp(eval2.csv_path));

  // Render emits an SVG and the per-channel PGMs.
  const auto render_dir = temp_dir("scenediff_pipe_render");
  const RenderOutput render = cmd_render(cfg, ga.scene_files[0], render_dir.string(), 0);
  CHECK(fs::exists(render.svg_path));
  CHECK(fs::exists(fs::path(render.pgm_dir) / "drivable_area.pgm"));
  CHECK(fs::exists(fs::path(render.pgm_dir) / "others.pgm"));
}

TEST_CASE("convert on a horizon-40 scene yields 34 instances before filtering") {
  RunConfig cfg = tiny_config();
  cfg.generation.horizon = 40;
  cfg.dataset.horizon = 40;
  cfg.convert.min_agents = 1;  // keep every instance: count the raw yield

  const MapGrid map = generate_map(cfg.seed, cfg.map);
  Scene scene(40, 2, 0.5);
  scene.map_id = map.id;
  scene.seed = 4;
  scene.dims[0] = VehicleDims(2.0, 4.5);
  scene.dims[1] = VehicleDims(2.0, 4.5);
  for (int t = 0; t < 40; ++t) {
    scene.at(t, 0) = AgentState(10.0 + t * 1.5, 40.0, 3.0, 0.0);
    scene.at(t, 1) = AgentState(20.0 + t * 1.0, 44.0, 2.0, 0.0);
  }

  const auto scenes_dir = temp_dir("scenediff_conv40_scenes");
  save_scene(scene, cfg.guide, (scenes_dir / "scene_00000.json").string(), "x");
  const auto out = temp_dir("scenediff_conv40_out");
  const ConvertOutput conv = cmd_convert(cfg, scenes_dir.string(), out.string());
  REQUIRE(conv.per_scene.size() == 1);
  CHECK(conv.per_scene[0].second == 34);

  // An all-stationary scene is skipped and logged, not an error.
  Scene still(40, 2, 0.5);
  still.map_id = map.id;
  still.dims[0] = still.dims[1] = VehicleDims(2.0, 4.5);
  for (int t = 0; t < 40; ++t) {
    still.at(t, 0) = AgentState(30.0, 40.0, 0.0, 0.0);
    still.at(t, 1) = AgentState(40.0, 44.0, 0.0, 0.0);
  }
  const auto still_dir = temp_dir("scenediff_conv40_still");
  save_scene(still, cfg.guide, (still_dir / "scene_00000.json").string(), "x");
  const auto out2 = temp_dir("scenediff_conv40_out2");
  const ConvertOutput skipped = cmd_convert(cfg, still_dir.string(), out2.string());
  CHECK(skipped.skipped_scenes == 1);
  CHECK(skipped.total_instances == 0);
}

TEST_CASE("eval consumes instance-level predictions when present") {
  RunConfig cfg = tiny_config();
  cfg.generation.horizon = 40;
  cfg.dataset.horizon = 40;

  const MapGrid map = generate_map(cfg.seed, cfg.map);
  Scene scene(40, 2, 0.5);
  scene.map_id = map.id;
  scene.seed = 4;
  scene.dims[0] = VehicleDims(2.0, 4.5);
  scene.dims[1] = VehicleDims(2.0, 4.5);
  for (int t = 0; t < 40; ++t) {
    scene.at(t, 0) = AgentState(10.0 + t * 1.5, 40.0, 3.0, 0.0);
    scene.at(t, 1) = AgentState(20.0 + t * 1.0, 44.0, 2.0, 0.0);
  }
  const auto scenes_dir = temp_dir("scenediff_eval_scenes");
  save_scene(scene, cfg.guide, (scenes_dir / "scene_00000.json").string(), "x");
  const auto conv_dir = temp_dir("scenediff_eval_conv");
  cmd_convert(cfg, scenes_dir.string(), conv_dir.string());

  // Predict the exact targets for the first two instances: zero L2 and no
  // collisions. The records are referenced relative to predictions.json.
  nlohmann::json preds;
  preds["schema_version"] = "1.0";
  preds["predictions"] = nlohmann::json::array();
  for (int n = 0; n < 2; ++n) {
    char name[48];
    std::snprintf(name, sizeof(name), "instance_%05d.json", n);
    std::ifstream in(conv_dir / "scene_00000" / name);
    REQUIRE(in);
    const nlohmann::json record = nlohmann::json::parse(in);
    const fs::path rel =
        fs::relative(conv_dir / "scene_00000" / name, scenes_dir);
    preds["predictions"].push_back(
        {{"instance", rel.string()}, {"pred", record.at("targets")}});
  }
  std::ofstream pred_out(scenes_dir / "predictions.json");
  pred_out << preds.dump(2);
  pred_out.close();

  const auto eval_dir = temp_dir("scenediff_eval_out");
  const EvalOutput out =
      cmd_eval(cfg, scenes_dir.string(), scenes_dir.string(), eval_dir.string());
  CHECK(out.report.predictions == 2);
  CHECK(out.report.l2_at.at(1.0) == 0.0);
  CHECK(out.report.l2_at.at(3.0) == 0.0);
  CHECK(out.report.collision_rate_at.at(3.0) == 0.0);
}
