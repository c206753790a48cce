#include <stdexcept>

#include "scenediff/diffusion.hpp"

namespace scenediff {

ConditionFeature encode_condition(const MapGrid& map, Vec2 center, int history,
                                  const ConditionConfig& cfg) {
  if (history < 1) throw std::invalid_argument("condition history must be >= 1");
  if (cfg.pool < 1 || cfg.samples_per_cell < 1 || !(cfg.window_m > 0.0)) {
    throw std::invalid_argument("invalid condition config");
  }
  ConditionFeature out;
  out.values.resize(condition_dim(cfg, history));

  const double stride = cfg.window_m / cfg.pool;
  const double sub = stride / cfg.samples_per_cell;
  const int q = cfg.samples_per_cell;
  const Vec2 corner{center.x - cfg.window_m / 2.0, center.y - cfg.window_m / 2.0};

  size_t idx = 0;
  // The map is static, so every history slot pools the same raster; the
  // layout still reserves one block per past timestamp.
  for (int h = 0; h < history; ++h) {
    for (int layer = 0; layer < kNumMapLayers; ++layer) {
      for (int pr = 0; pr < cfg.pool; ++pr) {
        for (int pc = 0; pc < cfg.pool; ++pc) {
          int hits = 0;
          for (int sr = 0; sr < q; ++sr) {
            for (int sc = 0; sc < q; ++sc) {
              const Vec2 p{corner.x + pc * stride + (sc + 0.5) * sub,
                           corner.y + pr * stride + (sr + 0.5) * sub};
              hits += map.query(static_cast<MapLayer>(layer), p) ? 1 : 0;
            }
          }
          out.values[idx++] = static_cast<float>(hits) / static_cast<float>(q * q);
        }
      }
    }
  }
  return out;
}

}  // namespace scenediff
