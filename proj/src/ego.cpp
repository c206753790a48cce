#include "scenediff/ego.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "scenediff/map_io.hpp"

namespace scenediff {

namespace fs = std::filesystem;
using nlohmann::json;

EgoRule ego_rule_from_string(const std::string& name) {
  if (name == "longest") return EgoRule::kLongest;
  if (name == "dynamic") return EgoRule::kDynamic;
  if (name == "random") return EgoRule::kRandom;
  throw std::invalid_argument("unknown ego rule: " + name);
}

std::string to_string(EgoRule rule) {
  switch (rule) {
    case EgoRule::kLongest: return "longest";
    case EgoRule::kDynamic: return "dynamic";
    default: return "random";
  }
}

std::optional<int> select_ego(const Scene& scene, EgoRule rule, uint64_t seed,
                              double min_travel) {
  scene.check();
  std::vector<int> candidates;
  std::vector<double> travel(scene.num_agents, 0.0);
  std::vector<double> lateral(scene.num_agents, 0.0);
  for (int i = 0; i < scene.num_agents; ++i) {
    if (!scene.valid[i]) continue;
    const std::vector<Vec2> path = scene.agent_path(i);
    travel[i] = path_length(path);
    for (size_t t = 0; t + 1 < path.size(); ++t) {
      lateral[i] += std::abs(path[t + 1].x - path[t].x);
    }
    if (travel[i] >= min_travel) {
      candidates.push_back(i);
    }
  }
  if (candidates.empty()) return std::nullopt;

  switch (rule) {
    case EgoRule::kLongest: {
      int best = candidates.front();
      for (int i : candidates) {
        if (travel[i] > travel[best]) best = i;
      }
      return best;
    }
    case EgoRule::kDynamic: {
      int best = candidates.front();
      for (int i : candidates) {
        if (lateral[i] > lateral[best]) best = i;
      }
      return best;
    }
    default: {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
      return candidates[pick(rng)];
    }
  }
}

std::vector<EgoInstance> build_instances(const Scene& scene, const MapGrid& map, int ego,
                                         int t_p, const CropConfig& crop) {
  scene.check();
  if (ego < 0 || ego >= scene.num_agents || !scene.valid[ego]) {
    throw std::out_of_range("ego index out of range");
  }
  if (t_p < 1 || scene.horizon <= t_p) {
    throw std::invalid_argument("need horizon > T_p >= 1");
  }

  std::vector<EgoInstance> instances;
  instances.reserve(scene.horizon - t_p);
  for (int t = 0; t < scene.horizon - t_p; ++t) {
    const AgentState& anchor = scene.at(t, ego);
    EgoInstance inst;
    inst.t = t;
    inst.ego_dims = scene.dims[ego];
    inst.raster = crop_ego(map, scene, ego, t, crop);
    inst.targets.reserve(t_p);
    inst.headings.reserve(t_p);
    for (int dt = 1; dt <= t_p; ++dt) {
      const AgentState& future = scene.at(t + dt, ego);
      inst.targets.push_back(transform_to_ego(future.position(), anchor));
      inst.headings.push_back(transform_heading(future.theta, anchor));
    }
    for (int j = 0; j < scene.num_agents; ++j) {
      if (j == ego || !scene.valid[j]) continue;
      for (int dt = 1; dt <= t_p; ++dt) {
        EgoInstance::FutureBox box;
        box.agent = j;
        box.step = dt;
        const auto world = box_corners(scene.at(t + dt, j), scene.dims[j]);
        for (int c = 0; c < 4; ++c) {
          box.corners[c] = transform_to_ego(world[c], anchor);
        }
        inst.other_boxes.push_back(box);
      }
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<EgoInstance> filter_instances(std::vector<EgoInstance> instances, int min_agents) {
  std::vector<EgoInstance> kept;
  kept.reserve(instances.size());
  for (auto& inst : instances) {
    std::set<int> others;
    for (const auto& box : inst.other_boxes) others.insert(box.agent);
    if (static_cast<int>(others.size()) >= min_agents - 1) {
      kept.push_back(std::move(inst));
    }
  }
  return kept;
}

int export_dataset(const std::vector<EgoInstance>& instances, const std::string& dir,
                   const std::string& provenance) {
  fs::create_directories(dir);
  json manifest;
  manifest["schema_version"] = "1.0";
  manifest["count"] = instances.size();
  if (!provenance.empty()) manifest["provenance"] = provenance;
  manifest["instances"] = json::array();

  for (size_t i = 0; i < instances.size(); ++i) {
    const EgoInstance& inst = instances[i];
    char stem[32];
    std::snprintf(stem, sizeof(stem), "instance_%05zu", i);

    json rec;
    rec["schema_version"] = "1.0";
    rec["t"] = inst.t;
    rec["ego_dims"] = {{"width", inst.ego_dims.width}, {"length", inst.ego_dims.length}};
    rec["targets"] = json::array();
    for (const Vec2& p : inst.targets) rec["targets"].push_back({p.x, p.y});
    rec["headings"] = inst.headings;
    rec["other_boxes"] = json::array();
    for (const auto& box : inst.other_boxes) {
      json corners = json::array();
      for (const Vec2& c : box.corners) corners.push_back({c.x, c.y});
      rec["other_boxes"].push_back(
          {{"agent", box.agent}, {"step", box.step}, {"corners", corners}});
    }
    rec["raster"] = std::string(stem) + ".pgm";
    if (!provenance.empty()) rec["provenance"] = provenance;

    const fs::path rec_path = fs::path(dir) / (std::string(stem) + ".json");
    std::ofstream out(rec_path);
    if (!out) throw std::runtime_error("cannot write instance record: " + rec_path.string());
    out << rec.dump(2) << "\n";
    save_raster(inst.raster, (fs::path(dir) / (std::string(stem) + ".pgm")).string(),
                provenance);
    manifest["instances"].push_back(std::string(stem) + ".json");
  }

  const fs::path man_path = fs::path(dir) / "manifest.json";
  std::ofstream out(man_path);
  if (!out) throw std::runtime_error("cannot write manifest: " + man_path.string());
  out << manifest.dump(2) << "\n";
  return static_cast<int>(instances.size());
}

std::vector<EgoInstance> import_dataset(const std::string& dir) {
  std::ifstream man_in(fs::path(dir) / "manifest.json");
  if (!man_in) throw std::runtime_error("cannot read manifest in: " + dir);
  const json manifest = json::parse(man_in);
  const std::string version = manifest.at("schema_version").get<std::string>();
  if (version.substr(0, version.find('.')) != "1") {
    throw std::runtime_error("unsupported dataset schema version " + version);
  }

  std::vector<EgoInstance> instances;
  for (const auto& name : manifest.at("instances")) {
    const fs::path rec_path = fs::path(dir) / name.get<std::string>();
    std::ifstream in(rec_path);
    if (!in) throw std::runtime_error("cannot read instance record: " + rec_path.string());
    const json rec = json::parse(in);

    EgoInstance inst;
    inst.t = rec.at("t").get<int>();
    inst.ego_dims = VehicleDims(rec.at("ego_dims").at("width").get<double>(),
                                rec.at("ego_dims").at("length").get<double>());
    for (const auto& p : rec.at("targets")) {
      inst.targets.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    inst.headings = rec.at("headings").get<std::vector<double>>();
    for (const auto& jb : rec.at("other_boxes")) {
      EgoInstance::FutureBox box;
      box.agent = jb.at("agent").get<int>();
      box.step = jb.at("step").get<int>();
      for (int c = 0; c < 4; ++c) {
        box.corners[c] = {jb.at("corners")[c][0].get<double>(),
                          jb.at("corners")[c][1].get<double>()};
      }
      inst.other_boxes.push_back(box);
    }
    inst.raster = load_raster((fs::path(dir) / rec.at("raster").get<std::string>()).string());
    instances.push_back(std::move(inst));
  }
  return instances;
}

}  // namespace scenediff
