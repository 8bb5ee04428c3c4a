#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descry/errors.hpp"
#include "descry/image.hpp"
#include "descry/label_map.hpp"
#include "descry/rng.hpp"

namespace descry {

/// Axis-aligned rectangle with a paint intensity.
struct RectSpec {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  double intensity = 0.0;
};

struct SynthScene {
  GrayImage image;
  LabelMap truth;  // one label per visible maximal same-paint area
};

/// Paints rectangles over a uniform background (later rectangles overwrite
/// earlier ones), then adds uniform integer noise from splitmix64 drawn per
/// pixel in raster order, clamped to [0, 255]. The ground truth labels the
/// 4-connected components of the paint map, so a partially occluded rectangle
/// contributes one truth region per visible part.
inline SynthScene synth_scene(int width, int height, const std::vector<RectSpec>& rects,
                              double background, int noise_amplitude, std::uint64_t seed) {
  if (background < 0.0 || background > 255.0) {
    throw config_error("background intensity out of [0,255]: " + std::to_string(background));
  }
  if (noise_amplitude < 0) {
    throw config_error("noise amplitude must be non-negative");
  }
  GrayImage img(width, height, background);
  LabelMap paint(width, height, 0);

  std::int32_t id = 0;
  for (const RectSpec& r : rects) {
    ++id;
    if (r.width < 1 || r.height < 1 || r.x < 0 || r.y < 0 || r.x + r.width > width ||
        r.y + r.height > height) {
      throw config_error("rectangle " + std::to_string(id - 1) + " out of bounds for " +
                         std::to_string(width) + "x" + std::to_string(height) + " scene");
    }
    if (r.intensity < 0.0 || r.intensity > 255.0) {
      throw config_error("rectangle " + std::to_string(id - 1) + " intensity out of [0,255]");
    }
    for (int y = r.y; y < r.y + r.height; ++y) {
      for (int x = r.x; x < r.x + r.width; ++x) {
        img.at(x, y) = r.intensity;
        paint.at(x, y) = id;
      }
    }
  }

  if (noise_amplitude > 0) {
    SplitMix64 rng(seed);
    const std::uint64_t span = 2ULL * static_cast<std::uint64_t>(noise_amplitude) + 1ULL;
    for (double& v : img.pixels) {
      const std::int64_t offset =
          static_cast<std::int64_t>(rng.next_below(span)) - noise_amplitude;
      v = std::min(255.0, std::max(0.0, v + static_cast<double>(offset)));
    }
  }

  return SynthScene{std::move(img), connected_components(paint)};
}

}  // namespace descry
