#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

#include "descry/errors.hpp"
#include "descry/image.hpp"
#include "descry/label_map.hpp"

namespace descry {

/// Per-label pixel count and intensity sum, indexed by label id. The sum is
/// kept explicitly (never a running mean) so that incremental updates match a
/// from-scratch recomputation. Labels whose count dropped to zero are defunct
/// but keep their slot; ids are never reused.
struct RegionStats {
  std::vector<std::int64_t> counts;
  std::vector<double> sums;

  void ensure_label(std::int32_t label) {
    if (static_cast<std::size_t>(label) >= counts.size()) {
      counts.resize(static_cast<std::size_t>(label) + 1, 0);
      sums.resize(static_cast<std::size_t>(label) + 1, 0.0);
    }
  }

  bool alive(std::int32_t label) const {
    return label >= 0 && static_cast<std::size_t>(label) < counts.size() &&
           counts[static_cast<std::size_t>(label)] > 0;
  }

  double mean(std::int32_t label) const {
    assert(alive(label));
    return sums[static_cast<std::size_t>(label)] /
           static_cast<double>(counts[static_cast<std::size_t>(label)]);
  }

  void add(std::int32_t label, double value) {
    ensure_label(label);
    counts[static_cast<std::size_t>(label)] += 1;
    sums[static_cast<std::size_t>(label)] += value;
  }

  void remove(std::int32_t label, double value) {
    assert(alive(label));
    counts[static_cast<std::size_t>(label)] -= 1;
    sums[static_cast<std::size_t>(label)] -= value;
    if (counts[static_cast<std::size_t>(label)] == 0) {
      sums[static_cast<std::size_t>(label)] = 0.0;  // kill residual dust on defunct labels
    }
  }

  std::int64_t alive_count() const {
    std::int64_t n = 0;
    for (std::int64_t c : counts) n += (c > 0) ? 1 : 0;
    return n;
  }
};

/// From-scratch stats for a labeling, accumulated in raster order.
inline RegionStats compute_stats(const LabelMap& labels, const GrayImage& img) {
  if (labels.width != img.width || labels.height != img.height) {
    throw data_error("label map and image dimensions differ");
  }
  RegionStats stats;
  stats.ensure_label(labels.max_label());
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const std::int32_t l = labels.labels[i];
    stats.counts[static_cast<std::size_t>(l)] += 1;
    stats.sums[static_cast<std::size_t>(l)] += img.pixels[i];
  }
  return stats;
}

/// 1-D agglomerative sweep over the intensity axis: distinct values ascending,
/// a value joins the current cluster while its gap from the cluster's running
/// mean stays within tol, otherwise it starts the next cluster. Returns the
/// per-pixel cluster index (ascending with intensity).
inline LabelMap cluster_intensities(const GrayImage& img, double tol) {
  if (!(tol > 0.0)) {
    throw config_error("intensity tolerance must be positive");
  }
  std::vector<double> values(img.pixels);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<std::int32_t> cluster_of(values.size(), 0);
  std::int32_t cluster = 0;
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (count > 0 && values[i] - sum / static_cast<double>(count) > tol) {
      ++cluster;
      sum = 0.0;
      count = 0;
    }
    cluster_of[i] = cluster;
    sum += values[i];
    count += 1;
  }

  LabelMap map(img.width, img.height, 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto it = std::lower_bound(values.begin(), values.end(), img.pixels[i]);
    map.labels[i] = cluster_of[static_cast<std::size_t>(it - values.begin())];
  }
  return map;
}

struct TopSegmentation {
  LabelMap labels;
  RegionStats stats;
};

/// Segments the pyramid top: intensity clustering, then 4-connected
/// components, then stats against the top image.
inline TopSegmentation segment_top(const GrayImage& img, double tol) {
  LabelMap labels = connected_components(cluster_intensities(img, tol));
  RegionStats stats = compute_stats(labels, img);
  return TopSegmentation{std::move(labels), std::move(stats)};
}

}  // namespace descry
