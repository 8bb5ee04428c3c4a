#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

#include "descry/errors.hpp"

namespace descry {

/// Per-pixel region labels for one pyramid level. Every pixel carries exactly
/// one non-negative label. connected_components produces dense labels in
/// raster order of first occurrence; refinement keeps label identity instead
/// (vanished regions leave gaps, fresh regions take strictly increasing ids).
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;  // row-major

  LabelMap() = default;

  LabelMap(int w, int h, std::int32_t fill = 0) : width(w), height(h) {
    if (w < 1 || h < 1) {
      throw config_error("label map dimensions must be positive, got " + std::to_string(w) + "x" +
                         std::to_string(h));
    }
    labels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
  }

  std::int64_t pixel_count() const {
    return static_cast<std::int64_t>(width) * static_cast<std::int64_t>(height);
  }

  std::int32_t at(int x, int y) const {
    assert(x >= 0 && x < width && y >= 0 && y < height);
    return labels[static_cast<std::size_t>(y) * width + x];
  }

  std::int32_t& at(int x, int y) {
    assert(x >= 0 && x < width && y >= 0 && y < height);
    return labels[static_cast<std::size_t>(y) * width + x];
  }

  std::int32_t max_label() const {
    std::int32_t m = -1;
    for (std::int32_t l : labels) m = std::max(m, l);
    return m;
  }

  /// Sorted list of the labels actually present.
  std::vector<std::int32_t> distinct_labels() const {
    std::vector<std::int32_t> out(labels.begin(), labels.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool operator==(const LabelMap&) const = default;
};

/// 4-connected components of equal-value cells. Output labels are dense,
/// 0..n-1, numbered by raster order of each component's first pixel.
inline LabelMap connected_components(const LabelMap& clusters) {
  LabelMap out(clusters.width, clusters.height, -1);
  const int w = clusters.width;
  const int h = clusters.height;
  std::vector<std::int64_t> stack;
  std::int32_t next = 0;

  for (std::int64_t start = 0; start < clusters.pixel_count(); ++start) {
    if (out.labels[static_cast<std::size_t>(start)] >= 0) continue;
    const std::int32_t value = clusters.labels[static_cast<std::size_t>(start)];
    const std::int32_t label = next++;
    out.labels[static_cast<std::size_t>(start)] = label;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::int64_t idx = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(idx % w);
      const int y = static_cast<int>(idx / w);
      const int nx[4] = {x, x - 1, x + 1, x};
      const int ny[4] = {y - 1, y, y, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
        const std::int64_t nidx = static_cast<std::int64_t>(ny[k]) * w + nx[k];
        if (out.labels[static_cast<std::size_t>(nidx)] >= 0) continue;
        if (clusters.labels[static_cast<std::size_t>(nidx)] != value) continue;
        out.labels[static_cast<std::size_t>(nidx)] = label;
        stack.push_back(nidx);
      }
    }
  }
  return out;
}

}  // namespace descry
