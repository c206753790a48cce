#pragma once

#include <string>
#include <vector>

#include "scenediff/map.hpp"

namespace scenediff {

/// Binary P5 PGM with 0/255 for false/true. `comment` lands after the magic
/// line, so provenance survives in the file.
void write_pgm(const std::string& path, int rows, int cols, const std::vector<uint8_t>& cells,
               const std::string& comment = {});

/// Reads a binary P5 PGM back to 0/1 cells (any nonzero byte is true).
/// The first '#' comment line, if any, is returned through `comment`.
std::vector<uint8_t> read_pgm(const std::string& path, int& rows, int& cols,
                              std::string* comment = nullptr);

/// One PGM per layer plus a map.json sidecar under `dir`.
void save_map(const MapGrid& g, const std::string& dir, const std::string& provenance = {});
MapGrid load_map(const std::string& dir);

/// All channels stacked vertically in one PGM, with shape metadata in the
/// comment line. Lossless round trip through load_raster.
void save_raster(const SceneRaster& raster, const std::string& path,
                 const std::string& provenance = {});
SceneRaster load_raster(const std::string& path);

/// One PGM per channel under `dir` (render-friendly flavor).
void save_raster_channels(const SceneRaster& raster, const std::string& dir,
                          const std::string& provenance = {});

/// Vector render of the scene at timestep t over the map layers. The ego is
/// drawn white and the other vehicles orange; pass ego = -1 for none.
std::string render_scene_svg(const MapGrid& g, const Scene& scene, int t, int ego = -1);
void write_scene_svg(const std::string& path, const MapGrid& g, const Scene& scene, int t,
                     int ego = -1);

}  // namespace scenediff
