#include "scenediff/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "json.hpp"

namespace scenediff {

using nlohmann::json;

namespace {

// Missing keys keep defaults; present keys must have the right type.
template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json guide_to_json(const GuideConfig& g) {
  return {{"w_agent", g.w_agent},       {"w_map", g.w_map},
          {"w_speed", g.w_speed},       {"delta_buffer", g.delta_buffer},
          {"gamma", g.gamma},           {"v_min", g.v_min},
          {"v_max", g.v_max},           {"grid_n", g.grid_n},
          {"moving_threshold", g.moving_threshold}};
}

GuideConfig guide_from_json(const json& j) {
  GuideConfig g;
  read_field(j, "w_agent", g.w_agent);
  read_field(j, "w_map", g.w_map);
  read_field(j, "w_speed", g.w_speed);
  read_field(j, "delta_buffer", g.delta_buffer);
  read_field(j, "gamma", g.gamma);
  read_field(j, "v_min", g.v_min);
  read_field(j, "v_max", g.v_max);
  read_field(j, "grid_n", g.grid_n);
  read_field(j, "moving_threshold", g.moving_threshold);
  g.check();
  return g;
}

}  // namespace

VarianceSchedule ScheduleParams::build() const {
  if (beta_min < 0.0 || beta_max < 0.0) {
    if (kind == "linear") return make_default_schedule(steps);
    const double scale = 1000.0 / steps;
    return make_schedule(steps, 1e-4 * scale, std::min(0.02 * scale, 0.999),
                         schedule_kind_from_string(kind));
  }
  return make_schedule(steps, beta_min, beta_max, schedule_kind_from_string(kind));
}

ConditionConfig RunConfig::condition_config() const {
  ConditionConfig cc;
  cc.window_m = crop.window_m;
  cc.pool = denoiser.cond_pool;
  return cc;
}

DenoiserArch RunConfig::denoiser_arch() const {
  DenoiserArch arch;
  arch.horizon = generation.horizon;
  arch.hidden = denoiser.hidden;
  arch.k_embed = denoiser.k_embed;
  arch.cond_dim = condition_dim(condition_config(), denoiser.history);
  return arch;
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    if (j.contains("schema_version")) {
      const std::string v = j.at("schema_version").get<std::string>();
      if (v.substr(0, v.find('.')) != "1") {
        throw ConfigError("unsupported config schema version " + v);
      }
    }
    RunConfig cfg;
    read_field(j, "seed", cfg.seed);
    read_field(j, "workers", cfg.workers);
    read_field(j, "out_dir", cfg.out_dir);
    if (j.contains("map")) {
      const json& m = j.at("map");
      read_field(m, "extent_m", cfg.map.extent_m);
      read_field(m, "resolution", cfg.map.resolution);
      read_field(m, "num_roads", cfg.map.num_roads);
      read_field(m, "road_width_m", cfg.map.road_width_m);
      read_field(m, "lane_width_m", cfg.map.lane_width_m);
      read_field(m, "curve_prob", cfg.map.curve_prob);
      read_field(m, "walkway_width_m", cfg.map.walkway_width_m);
      read_field(m, "crossings_per_road", cfg.map.crossings_per_road);
    }
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      read_field(s, "steps", cfg.schedule.steps);
      read_field(s, "beta_min", cfg.schedule.beta_min);
      read_field(s, "beta_max", cfg.schedule.beta_max);
      read_field(s, "kind", cfg.schedule.kind);
    }
    if (j.contains("denoiser")) {
      const json& d = j.at("denoiser");
      read_field(d, "hidden", cfg.denoiser.hidden);
      read_field(d, "k_embed", cfg.denoiser.k_embed);
      read_field(d, "cond_pool", cfg.denoiser.cond_pool);
      read_field(d, "history", cfg.denoiser.history);
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      read_field(t, "steps", cfg.training.steps);
      read_field(t, "lr", cfg.training.lr);
      read_field(t, "cosine_decay", cfg.training.cosine_decay);
      read_field(t, "snapshot_every", cfg.training.snapshot_every);
    }
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      read_field(d, "num_scenes", cfg.dataset.num_scenes);
      read_field(d, "agents", cfg.dataset.agents);
      read_field(d, "speed_min", cfg.dataset.speed_min);
      read_field(d, "speed_max", cfg.dataset.speed_max);
      read_field(d, "accel_max", cfg.dataset.accel_max);
      read_field(d, "curvature_max", cfg.dataset.curvature_max);
      read_field(d, "lane_follow_prob", cfg.dataset.lane_follow_prob);
      read_field(d, "width_min", cfg.dataset.width_min);
      read_field(d, "width_max", cfg.dataset.width_max);
      read_field(d, "length_min", cfg.dataset.length_min);
      read_field(d, "length_max", cfg.dataset.length_max);
    }
    if (j.contains("guide")) cfg.guide = guide_from_json(j.at("guide"));
    if (j.contains("generation")) {
      const json& g = j.at("generation");
      read_field(g, "num_scenes", cfg.generation.num_scenes);
      read_field(g, "agents", cfg.generation.agents);
      read_field(g, "horizon", cfg.generation.horizon);
      read_field(g, "dt", cfg.generation.dt);
      read_field(g, "guide_scale", cfg.generation.guide_scale);
      read_field(g, "guide_ascend", cfg.generation.guide_ascend);
      read_field(g, "render_svg", cfg.generation.render_svg);
    }
    if (j.contains("convert")) {
      const json& c = j.at("convert");
      read_field(c, "t_p", cfg.convert.t_p);
      read_field(c, "ego_rule", cfg.convert.ego_rule);
      read_field(c, "min_agents", cfg.convert.min_agents);
    }
    if (j.contains("crop")) {
      const json& c = j.at("crop");
      read_field(c, "window_m", cfg.crop.window_m);
      read_field(c, "meters_per_pixel", cfg.crop.meters_per_pixel);
      read_field(c, "rotate_to_heading", cfg.crop.rotate_to_heading);
    }
    if (j.contains("eval")) {
      read_field(j.at("eval"), "horizons_s", cfg.eval.horizons_s);
    }
    // Keep dataset rollouts consistent with the generation shape.
    cfg.dataset.horizon = cfg.generation.horizon;
    cfg.dataset.dt = cfg.generation.dt;
    if (j.contains("dataset")) {
      read_field(j.at("dataset"), "horizon", cfg.dataset.horizon);
      read_field(j.at("dataset"), "dt", cfg.dataset.dt);
    }
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json(text);
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = "1.0";
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["out_dir"] = cfg.out_dir;
  j["map"] = {{"extent_m", cfg.map.extent_m},
              {"resolution", cfg.map.resolution},
              {"num_roads", cfg.map.num_roads},
              {"road_width_m", cfg.map.road_width_m},
              {"lane_width_m", cfg.map.lane_width_m},
              {"curve_prob", cfg.map.curve_prob},
              {"walkway_width_m", cfg.map.walkway_width_m},
              {"crossings_per_road", cfg.map.crossings_per_road}};
  j["schedule"] = {{"steps", cfg.schedule.steps},
                   {"beta_min", cfg.schedule.beta_min},
                   {"beta_max", cfg.schedule.beta_max},
                   {"kind", cfg.schedule.kind}};
  j["denoiser"] = {{"hidden", cfg.denoiser.hidden},
                   {"k_embed", cfg.denoiser.k_embed},
                   {"cond_pool", cfg.denoiser.cond_pool},
                   {"history", cfg.denoiser.history}};
  j["training"] = {{"steps", cfg.training.steps},
                   {"lr", cfg.training.lr},
                   {"cosine_decay", cfg.training.cosine_decay},
                   {"snapshot_every", cfg.training.snapshot_every}};
  j["dataset"] = {{"num_scenes", cfg.dataset.num_scenes},
                  {"agents", cfg.dataset.agents},
                  {"horizon", cfg.dataset.horizon},
                  {"dt", cfg.dataset.dt},
                  {"speed_min", cfg.dataset.speed_min},
                  {"speed_max", cfg.dataset.speed_max},
                  {"accel_max", cfg.dataset.accel_max},
                  {"curvature_max", cfg.dataset.curvature_max},
                  {"lane_follow_prob", cfg.dataset.lane_follow_prob},
                  {"width_min", cfg.dataset.width_min},
                  {"width_max", cfg.dataset.width_max},
                  {"length_min", cfg.dataset.length_min},
                  {"length_max", cfg.dataset.length_max}};
  j["guide"] = guide_to_json(cfg.guide);
  j["generation"] = {{"num_scenes", cfg.generation.num_scenes},
                     {"agents", cfg.generation.agents},
                     {"horizon", cfg.generation.horizon},
                     {"dt", cfg.generation.dt},
                     {"guide_scale", cfg.generation.guide_scale},
                     {"guide_ascend", cfg.generation.guide_ascend},
                     {"render_svg", cfg.generation.render_svg}};
  j["convert"] = {{"t_p", cfg.convert.t_p},
                  {"ego_rule", cfg.convert.ego_rule},
                  {"min_agents", cfg.convert.min_agents}};
  j["crop"] = {{"window_m", cfg.crop.window_m},
               {"meters_per_pixel", cfg.crop.meters_per_pixel},
               {"rotate_to_heading", cfg.crop.rotate_to_heading}};
  j["eval"] = {{"horizons_s", cfg.eval.horizons_s}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = run_config_to_json(cfg);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_scene(const Scene& scene, const GuideConfig& guide, const std::string& path,
                const std::string& config_hash_hex) {
  scene.check();
  json j;
  j["schema_version"] = "1.0";
  j["dt"] = scene.dt;
  j["horizon"] = scene.horizon;
  j["num_agents"] = scene.num_agents;
  j["map_id"] = scene.map_id;
  j["seed"] = scene.seed;
  if (!config_hash_hex.empty()) j["config_hash"] = config_hash_hex;
  j["guide_config"] = guide_to_json(guide);
  j["agents"] = json::array();
  for (int i = 0; i < scene.num_agents; ++i) {
    json agent;
    agent["dims"] = {{"width", scene.dims[i].width}, {"length", scene.dims[i].length}};
    agent["valid"] = static_cast<bool>(scene.valid[i]);
    json states = json::array();
    for (int t = 0; t < scene.horizon; ++t) {
      const AgentState& s = scene.at(t, i);
      states.push_back({s.x, s.y, s.v, s.theta});
    }
    agent["states"] = states;
    j["agents"].push_back(agent);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write scene file: " + path);
  out << j.dump(2) << "\n";
}

Scene load_scene(const std::string& path, GuideConfig* guide_out) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read scene file: " + path);
  json j;
  try {
    j = json::parse(in);
    const std::string v = j.at("schema_version").get<std::string>();
    if (v.substr(0, v.find('.')) != "1") {
      throw DataError("unsupported scene schema version " + v + " in " + path);
    }
    Scene scene(j.at("horizon").get<int>(), j.at("num_agents").get<int>(),
                j.at("dt").get<double>());
    scene.map_id = j.value("map_id", "");
    scene.seed = j.value("seed", 0ULL);
    const json& agents = j.at("agents");
    if (agents.size() != static_cast<size_t>(scene.num_agents)) {
      throw DataError("agent count mismatch in " + path);
    }
    for (int i = 0; i < scene.num_agents; ++i) {
      const json& agent = agents[i];
      scene.dims[i] = VehicleDims(agent.at("dims").at("width").get<double>(),
                                  agent.at("dims").at("length").get<double>());
      scene.valid[i] = agent.value("valid", true) ? 1 : 0;
      const json& states = agent.at("states");
      if (states.size() != static_cast<size_t>(scene.horizon)) {
        throw DataError("state count mismatch in " + path);
      }
      for (int t = 0; t < scene.horizon; ++t) {
        scene.at(t, i) =
            AgentState(states[t][0].get<double>(), states[t][1].get<double>(),
                       states[t][2].get<double>(), states[t][3].get<double>());
      }
    }
    if (guide_out != nullptr && j.contains("guide_config")) {
      *guide_out = guide_from_json(j.at("guide_config"));
    }
    scene.check();
    return scene;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("malformed scene file " + path + ": " + e.what());
  }
}

std::string default_out_root() {
  const char* env = std::getenv("SCENEDIFF_OUT");
  return env != nullptr && env[0] != '\0' ? env : "./out";
}

}  // namespace scenediff
