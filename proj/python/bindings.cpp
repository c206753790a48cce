#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scenediff/dataset.hpp"
#include "scenediff/diffusion.hpp"
#include "scenediff/ego.hpp"
#include "scenediff/guides.hpp"
#include "scenediff/map.hpp"
#include "scenediff/map_io.hpp"
#include "scenediff/metrics.hpp"
#include "scenediff/pipeline.hpp"

namespace py = pybind11;
using namespace scenediff;

namespace {

Scene scene_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> states,
                       const std::vector<std::pair<double, double>>& dims, double dt) {
  if (states.ndim() != 3 || states.shape(2) != 4) {
    throw std::invalid_argument("states must have shape (T, M, 4)");
  }
  const int horizon = static_cast<int>(states.shape(0));
  const int agents = static_cast<int>(states.shape(1));
  if (static_cast<int>(dims.size()) != agents) {
    throw std::invalid_argument("need one (width, length) pair per agent");
  }
  Scene scene(horizon, agents, dt);
  auto view = states.unchecked<3>();
  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < agents; ++i) {
      scene.at(t, i) =
          AgentState(view(t, i, 0), view(t, i, 1), view(t, i, 2), view(t, i, 3));
    }
  }
  for (int i = 0; i < agents; ++i) {
    scene.dims[i] = VehicleDims(dims[i].first, dims[i].second);
  }
  scene.check();
  return scene;
}

py::array_t<double> scene_states(const Scene& scene) {
  py::array_t<double> out({scene.horizon, scene.num_agents, 4});
  auto view = out.mutable_unchecked<3>();
  for (int t = 0; t < scene.horizon; ++t) {
    for (int i = 0; i < scene.num_agents; ++i) {
      const AgentState& s = scene.at(t, i);
      view(t, i, 0) = s.x;
      view(t, i, 1) = s.y;
      view(t, i, 2) = s.v;
      view(t, i, 3) = s.theta;
    }
  }
  return out;
}

py::array_t<uint8_t> raster_channel(const SceneRaster& raster, int ch) {
  if (ch < 0 || ch >= SceneRaster::kNumChannels) {
    throw std::out_of_range("channel index out of range");
  }
  py::array_t<uint8_t> out({raster.rows, raster.cols});
  std::copy(raster.channels[ch].begin(), raster.channels[ch].end(), out.mutable_data());
  return out;
}

py::array_t<uint8_t> map_layer(const MapGrid& g, const std::string& name) {
  for (int i = 0; i < kNumMapLayers; ++i) {
    if (name == kMapLayerNames[i]) {
      py::array_t<uint8_t> out({g.rows, g.cols});
      std::copy(g.layers[i].begin(), g.layers[i].end(), out.mutable_data());
      return out;
    }
  }
  throw std::invalid_argument("unknown layer: " + name);
}

py::array_t<double> gradient_array(const Scene& scene, const MapGrid* map,
                                   const GuideConfig& cfg) {
  const std::vector<double> flat = guide_gradient(scene, map, cfg);
  py::array_t<double> out({scene.horizon, scene.num_agents, 4});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Guided-diffusion driving-scenario generation core";

  // ---- geometry ----
  py::class_<Vec2>(m, "Vec2")
      .def(py::init<double, double>())
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y);

  py::class_<AgentState>(m, "AgentState")
      .def(py::init<double, double, double, double>(), py::arg("x"), py::arg("y"),
           py::arg("v"), py::arg("theta"))
      .def_readonly("x", &AgentState::x)
      .def_readonly("y", &AgentState::y)
      .def_readonly("v", &AgentState::v)
      .def_readonly("theta", &AgentState::theta);

  py::class_<VehicleDims>(m, "VehicleDims")
      .def(py::init<double, double>(), py::arg("width"), py::arg("length"))
      .def_readonly("width", &VehicleDims::width)
      .def_readonly("length", &VehicleDims::length)
      .def("radius", &VehicleDims::radius);

  py::class_<OrientedBox>(m, "OrientedBox")
      .def(py::init<Vec2, double, double, double>(), py::arg("center"), py::arg("width"),
           py::arg("length"), py::arg("heading"))
      .def("corners",
           [](const OrientedBox& b) {
             std::vector<std::pair<double, double>> out;
             for (const Vec2& c : b.corners()) out.emplace_back(c.x, c.y);
             return out;
           })
      .def("area", &OrientedBox::area);

  m.def("normalize_angle", &normalize_angle);
  m.def(
      "transform_to_ego",
      [](std::pair<double, double> p, const AgentState& s) {
        const Vec2 out = transform_to_ego({p.first, p.second}, s);
        return std::make_pair(out.x, out.y);
      },
      py::arg("point"), py::arg("state"));
  m.def("transform_heading", &transform_heading, py::arg("theta"), py::arg("state"));
  m.def("box_iou", &box_iou);
  m.def(
      "path_length",
      [](const std::vector<std::pair<double, double>>& pts) {
        std::vector<Vec2> v;
        for (const auto& p : pts) v.push_back({p.first, p.second});
        return path_length(v);
      },
      py::arg("positions"));

  // ---- scenes ----
  py::class_<Scene>(m, "Scene")
      .def_readonly("horizon", &Scene::horizon)
      .def_readonly("num_agents", &Scene::num_agents)
      .def_readonly("dt", &Scene::dt)
      .def_readonly("map_id", &Scene::map_id)
      .def_readonly("seed", &Scene::seed)
      .def("states", &scene_states);
  m.def("make_scene", &scene_from_array, py::arg("states"), py::arg("dims"),
        py::arg("dt") = 0.5);
  m.def("load_scene", [](const std::string& path) { return load_scene(path, nullptr); });

  // ---- map ----
  py::class_<RoadNetworkSpec>(m, "RoadNetworkSpec")
      .def(py::init<>())
      .def_readwrite("extent_m", &RoadNetworkSpec::extent_m)
      .def_readwrite("resolution", &RoadNetworkSpec::resolution)
      .def_readwrite("num_roads", &RoadNetworkSpec::num_roads)
      .def_readwrite("road_width_m", &RoadNetworkSpec::road_width_m)
      .def_readwrite("lane_width_m", &RoadNetworkSpec::lane_width_m)
      .def_readwrite("curve_prob", &RoadNetworkSpec::curve_prob);

  py::class_<MapGrid>(m, "MapGrid")
      .def_readonly("rows", &MapGrid::rows)
      .def_readonly("cols", &MapGrid::cols)
      .def_readonly("resolution", &MapGrid::resolution)
      .def_readonly("id", &MapGrid::id)
      .def("layer", &map_layer, py::arg("name"))
      .def("is_onroad", [](const MapGrid& g, double x, double y) {
        return is_onroad(g, {x, y});
      });

  m.def("generate_map", &generate_map, py::arg("seed"), py::arg("spec"));
  m.def(
      "sample_bbox_grid",
      [](const AgentState& s, const VehicleDims& d, int n) {
        std::vector<std::pair<double, double>> out;
        for (const Vec2& p : sample_bbox_grid(s, d, n)) out.emplace_back(p.x, p.y);
        return out;
      },
      py::arg("state"), py::arg("dims"), py::arg("n") = 10);

  py::class_<SceneRaster>(m, "SceneRaster")
      .def_readonly("rows", &SceneRaster::rows)
      .def_readonly("cols", &SceneRaster::cols)
      .def_readonly("meters_per_pixel", &SceneRaster::meters_per_pixel)
      .def("channel", &raster_channel, py::arg("index"));

  py::class_<CropConfig>(m, "CropConfig")
      .def(py::init<>())
      .def_readwrite("window_m", &CropConfig::window_m)
      .def_readwrite("meters_per_pixel", &CropConfig::meters_per_pixel)
      .def_readwrite("rotate_to_heading", &CropConfig::rotate_to_heading);

  m.def("crop_ego", &crop_ego, py::arg("map"), py::arg("scene"), py::arg("ego"),
        py::arg("t"), py::arg("config") = CropConfig{});
  m.def("rasterize_scene", &rasterize_scene, py::arg("map"), py::arg("scene"), py::arg("t"));
  m.def("render_scene_svg", &render_scene_svg, py::arg("map"), py::arg("scene"), py::arg("t"),
        py::arg("ego") = -1);

  // ---- guides ----
  py::class_<GuideConfig>(m, "GuideConfig")
      .def(py::init<>())
      .def_readwrite("w_agent", &GuideConfig::w_agent)
      .def_readwrite("w_map", &GuideConfig::w_map)
      .def_readwrite("w_speed", &GuideConfig::w_speed)
      .def_readwrite("delta_buffer", &GuideConfig::delta_buffer)
      .def_readwrite("gamma", &GuideConfig::gamma)
      .def_readwrite("v_min", &GuideConfig::v_min)
      .def_readwrite("v_max", &GuideConfig::v_max)
      .def_readwrite("grid_n", &GuideConfig::grid_n);

  m.def("decay_weights", &decay_weights, py::arg("horizon"), py::arg("gamma"));
  m.def("agent_collision_guide", &agent_collision_guide);
  m.def("map_collision_guide", &map_collision_guide);
  m.def("speed_guide", &speed_guide);
  m.def(
      "total_guide",
      [](const Scene& scene, const MapGrid* map, const GuideConfig& cfg) {
        return total_guide(scene, map, cfg);
      },
      py::arg("scene"), py::arg("map") = nullptr, py::arg("config") = GuideConfig{});
  m.def("guide_gradient", &gradient_array, py::arg("scene"), py::arg("map") = nullptr,
        py::arg("config") = GuideConfig{});

  // ---- diffusion ----
  py::class_<VarianceSchedule>(m, "VarianceSchedule")
      .def_readonly("betas", &VarianceSchedule::betas)
      .def_readonly("alpha_bars", &VarianceSchedule::alpha_bars)
      .def("steps", &VarianceSchedule::steps);
  m.def(
      "make_schedule",
      [](int steps, double beta_min, double beta_max, const std::string& kind) {
        return make_schedule(steps, beta_min, beta_max, schedule_kind_from_string(kind));
      },
      py::arg("steps"), py::arg("beta_min"), py::arg("beta_max"), py::arg("kind") = "linear");
  m.def("make_default_schedule", &make_default_schedule, py::arg("steps") = 100);
  m.def(
      "forward_sample",
      [](const std::vector<float>& tau0, int k, const std::vector<float>& noise,
         const VarianceSchedule& sched) { return forward_sample(tau0, k, noise, sched); },
      py::arg("tau0"), py::arg("k"), py::arg("noise"), py::arg("schedule"));

  // ---- ego ----
  m.def(
      "select_ego",
      [](const Scene& scene, const std::string& rule, uint64_t seed) -> py::object {
        const auto ego = select_ego(scene, ego_rule_from_string(rule), seed);
        if (!ego.has_value()) return py::none();
        return py::int_(*ego);
      },
      py::arg("scene"), py::arg("rule") = "longest", py::arg("seed") = 0);

  // ---- metrics ----
  m.def(
      "wasserstein_1d",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return wasserstein_1d(a, b);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "planning_l2",
      [](const std::vector<std::pair<double, double>>& pred,
         const std::vector<std::pair<double, double>>& gt, double dt,
         const std::vector<double>& horizons) {
        std::vector<Vec2> p, g;
        for (const auto& v : pred) p.push_back({v.first, v.second});
        for (const auto& v : gt) g.push_back({v.first, v.second});
        return planning_l2(p, g, dt, horizons);
      },
      py::arg("pred"), py::arg("gt"), py::arg("dt") = 0.5,
      py::arg("horizons_s") = std::vector<double>{1.0, 2.0, 3.0});
  m.def(
      "feature_alignment_loss",
      [](const std::vector<float>& a, const std::vector<float>& b) {
        return feature_alignment_loss(a, b);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "occupancy_losses",
      [](const std::vector<std::vector<double>>& pred,
         const std::vector<std::vector<uint8_t>>& gt) {
        const OccupancyLosses out = occupancy_losses(pred, gt);
        return std::make_pair(out.dice, out.bce);
      },
      py::arg("pred"), py::arg("gt"));

  // ---- pipeline ----
  m.def(
      "run_train",
      [](const std::string& config_json, const std::string& out_dir) {
        const TrainOutput out = cmd_train(run_config_from_json(config_json), out_dir);
        return py::dict(py::arg("checkpoint") = out.checkpoint_path,
                        py::arg("loss_csv") = out.loss_csv_path,
                        py::arg("first_loss") = out.first_window_loss,
                        py::arg("last_loss") = out.last_window_loss);
      },
      py::arg("config_json"), py::arg("out_dir"));
  m.def(
      "run_generate",
      [](const std::string& config_json, const std::string& checkpoint,
         const std::string& out_dir) {
        const GenerateOutput out =
            cmd_generate(run_config_from_json(config_json), checkpoint, out_dir);
        return py::dict(py::arg("manifest") = out.manifest_path,
                        py::arg("scenes") = out.scene_files);
      },
      py::arg("config_json"), py::arg("checkpoint"), py::arg("out_dir"));
  m.def(
      "run_convert",
      [](const std::string& config_json, const std::string& scenes_dir,
         const std::string& out_dir) {
        const ConvertOutput out =
            cmd_convert(run_config_from_json(config_json), scenes_dir, out_dir);
        return py::dict(py::arg("manifest") = out.manifest_path,
                        py::arg("total_instances") = out.total_instances,
                        py::arg("skipped_scenes") = out.skipped_scenes);
      },
      py::arg("config_json"), py::arg("scenes_dir"), py::arg("out_dir"));
  m.def(
      "run_eval",
      [](const std::string& config_json, const std::string& gen_dir, const std::string& ref_dir,
         const std::string& out_dir) {
        const EvalOutput out =
            cmd_eval(run_config_from_json(config_json), gen_dir, ref_dir, out_dir);
        return py::dict(py::arg("report_json") = out.json_path,
                        py::arg("report_csv") = out.csv_path,
                        py::arg("real") = out.report.realism.real,
                        py::arg("rel_real") = out.report.realism.rel_real,
                        py::arg("rule_no_collision") = out.report.rule.no_collision,
                        py::arg("rule_no_offroad") = out.report.rule.no_offroad);
      },
      py::arg("config_json"), py::arg("gen_dir"), py::arg("ref_dir"), py::arg("out_dir"));

  m.attr("__version__") = "0.1.0";
}
