#include "scenediff/map_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace scenediff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void throw_io(const std::string& path, const std::string& what) {
  throw std::runtime_error(what + ": " + path);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void write_pgm(const std::string& path, int rows, int cols, const std::vector<uint8_t>& cells,
               const std::string& comment) {
  if (cells.size() != static_cast<size_t>(rows) * cols) {
    throw std::invalid_argument("write_pgm: cell count does not match shape");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io(path, "cannot open for writing");
  out << "P5\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << cols << " " << rows << "\n255\n";
  std::vector<uint8_t> bytes(cells.size());
  for (size_t i = 0; i < cells.size(); ++i) bytes[i] = cells[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_io(path, "write failed");
}

std::vector<uint8_t> read_pgm(const std::string& path, int& rows, int& cols,
                              std::string* comment) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io(path, "cannot open for reading");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw_io(path, "not a binary PGM");
  // Header tokens with optional '#' comment lines between them.
  int fields[3];
  int got = 0;
  while (got < 3) {
    in >> std::ws;
    if (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      if (comment && comment->empty() && line.size() > 1) {
        *comment = line.substr(line.find_first_not_of("# "));
      }
      continue;
    }
    if (!(in >> fields[got])) throw_io(path, "malformed PGM header");
    ++got;
  }
  cols = fields[0];
  rows = fields[1];
  in.get();  // single whitespace after maxval
  std::vector<uint8_t> bytes(static_cast<size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw_io(path, "truncated PGM payload");
  for (auto& b : bytes) b = b ? 1 : 0;
  return bytes;
}

void save_map(const MapGrid& g, const std::string& dir, const std::string& provenance) {
  fs::create_directories(dir);
  json meta;
  meta["schema_version"] = "1.0";
  meta["id"] = g.id;
  meta["resolution"] = g.resolution;
  meta["origin"] = {g.origin.x, g.origin.y};
  meta["extent"] = {g.rows, g.cols};
  meta["layers"] = json::array();
  for (int i = 0; i < kNumMapLayers; ++i) {
    meta["layers"].push_back(kMapLayerNames[i]);
    write_pgm((fs::path(dir) / (std::string(kMapLayerNames[i]) + ".pgm")).string(), g.rows,
              g.cols, g.layers[i], provenance);
  }
  if (!provenance.empty()) meta["provenance"] = provenance;
  std::ofstream out(fs::path(dir) / "map.json");
  if (!out) throw_io(dir, "cannot write map.json");
  out << meta.dump(2) << "\n";
}

MapGrid load_map(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "map.json");
  if (!in) throw_io(dir, "cannot read map.json");
  json meta = json::parse(in);
  const std::string version = meta.at("schema_version").get<std::string>();
  if (version.substr(0, version.find('.')) != "1") {
    throw std::runtime_error("unsupported map schema version " + version);
  }
  MapGrid g(meta.at("extent")[0].get<int>(), meta.at("extent")[1].get<int>(),
            meta.at("resolution").get<double>(),
            Vec2{meta.at("origin")[0].get<double>(), meta.at("origin")[1].get<double>()});
  g.id = meta.value("id", "");
  for (int i = 0; i < kNumMapLayers; ++i) {
    int rows, cols;
    g.layers[i] = read_pgm((fs::path(dir) / (std::string(kMapLayerNames[i]) + ".pgm")).string(),
                           rows, cols);
    if (rows != g.rows || cols != g.cols) {
      throw std::runtime_error("layer shape mismatch in " + dir);
    }
  }
  return g;
}

void save_raster(const SceneRaster& raster, const std::string& path,
                 const std::string& provenance) {
  std::vector<uint8_t> stacked;
  stacked.reserve(static_cast<size_t>(SceneRaster::kNumChannels) * raster.rows * raster.cols);
  for (const auto& ch : raster.channels) {
    stacked.insert(stacked.end(), ch.begin(), ch.end());
  }
  std::ostringstream comment;
  comment << "scenediff-raster channels=" << SceneRaster::kNumChannels << " rows=" << raster.rows
          << " cols=" << raster.cols << " mpp=" << raster.meters_per_pixel;
  if (!provenance.empty()) comment << " " << provenance;
  write_pgm(path, SceneRaster::kNumChannels * raster.rows, raster.cols, stacked, comment.str());
}

SceneRaster load_raster(const std::string& path) {
  int rows, cols;
  std::string comment;
  const std::vector<uint8_t> stacked = read_pgm(path, rows, cols, &comment);
  double mpp = 0.25;
  int channels = SceneRaster::kNumChannels;
  std::istringstream tokens(comment);
  std::string tok;
  while (tokens >> tok) {
    if (tok.rfind("mpp=", 0) == 0) mpp = std::stod(tok.substr(4));
    if (tok.rfind("channels=", 0) == 0) channels = std::stoi(tok.substr(9));
  }
  if (channels != SceneRaster::kNumChannels || rows % channels != 0) {
    throw std::runtime_error("unexpected raster channel layout: " + path);
  }
  SceneRaster out(rows / channels, cols, mpp);
  const size_t plane = static_cast<size_t>(out.rows) * out.cols;
  for (int ch = 0; ch < channels; ++ch) {
    std::copy(stacked.begin() + ch * plane, stacked.begin() + (ch + 1) * plane,
              out.channels[ch].begin());
  }
  return out;
}

void save_raster_channels(const SceneRaster& raster, const std::string& dir,
                          const std::string& provenance) {
  fs::create_directories(dir);
  const std::array<const char*, 2> extra = {"ego", "others"};
  for (int ch = 0; ch < SceneRaster::kNumChannels; ++ch) {
    const std::string name =
        ch < kNumMapLayers ? kMapLayerNames[ch] : extra[ch - kNumMapLayers];
    write_pgm((fs::path(dir) / (name + std::string(".pgm"))).string(), raster.rows, raster.cols,
              raster.channels[ch], provenance);
  }
}

std::string render_scene_svg(const MapGrid& g, const Scene& scene, int t, int ego) {
  const double w = g.cols * g.resolution;
  const double h = g.rows * g.resolution;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << fmt(w) << " " << fmt(h)
      << "\">\n";
  svg << "<rect width=\"" << fmt(w) << "\" height=\"" << fmt(h) << "\" fill=\"#1b1b1b\"/>\n";

  // Layers as merged row runs; SVG y axis points down, world +y up.
  const struct {
    MapLayer layer;
    const char* color;
  } styles[] = {
      {MapLayer::kDrivableArea, "#3d3d3d"},
      {MapLayer::kWalkway, "#2e4632"},
      {MapLayer::kPedCrossing, "#8a7b4f"},
      {MapLayer::kLane, "#4a4a4a"},
  };
  for (const auto& style : styles) {
    svg << "<g fill=\"" << style.color << "\">\n";
    for (int r = 0; r < g.rows; ++r) {
      int c = 0;
      while (c < g.cols) {
        if (!g.get(style.layer, r, c)) {
          ++c;
          continue;
        }
        int run = c;
        while (run < g.cols && g.get(style.layer, r, run)) ++run;
        const double x = g.origin.x + c * g.resolution;
        const double y_top = g.origin.y + (r + 1) * g.resolution;
        svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(h - y_top) << "\" width=\""
            << fmt((run - c) * g.resolution) << "\" height=\"" << fmt(g.resolution) << "\"/>\n";
        c = run;
      }
    }
    svg << "</g>\n";
  }

  // Vehicles: ego white, others orange.
  for (int i = 0; i < scene.num_agents; ++i) {
    if (!scene.valid[i]) continue;
    const auto corners = box_corners(scene.at(t, i), scene.dims[i]);
    svg << "<polygon points=\"";
    for (const Vec2& c : corners) {
      svg << fmt(c.x - g.origin.x) << "," << fmt(h - (c.y - g.origin.y)) << " ";
    }
    svg << "\" fill=\"" << (i == ego ? "#ffffff" : "#ff8c00") << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_scene_svg(const std::string& path, const MapGrid& g, const Scene& scene, int t,
                     int ego) {
  std::ofstream out(path);
  if (!out) throw_io(path, "cannot open for writing");
  out << render_scene_svg(g, scene, t, ego);
}

}  // namespace scenediff
