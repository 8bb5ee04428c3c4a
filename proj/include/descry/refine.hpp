#pragma once

// Top-down refinement: labels expanded from the coarser level are checked
// against the current level's image, deviating pixels migrate to the
// best-fitting neighbor region or aggregate into seeds of newly emerging
// regions, and the cycle repeats per level until the full-resolution
// segmentation is reached.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "descry/errors.hpp"
#include "descry/image.hpp"
#include "descry/label_map.hpp"
#include "descry/pyramid.hpp"
#include "descry/segment.hpp"

namespace descry {

struct RefineConfig {
  double tol = 10.0;              // "significant" intensity deviation
  int max_sweeps = 10;            // refinement cycle cap per level
  std::int64_t min_seed_size = 1; // smaller seed groups are not minted
};

inline void validate(const RefineConfig& cfg) {
  if (!(cfg.tol > 0.0)) throw config_error("tol must be positive");
  if (cfg.max_sweeps < 1) throw config_error("max_sweeps must be at least 1");
  if (cfg.min_seed_size < 1) throw config_error("min_seed_size must be at least 1");
}

struct LevelResult {
  int level = 0;
  LabelMap labels;
  RegionStats stats;
  bool converged = false;
  // Entry 0 is the deviant count before any sweep, entry i the count after
  // sweep i. converged == (back() == 0).
  std::vector<std::int64_t> deviant_count_history;
};

/// 1-to-4 expansion: fine pixel (x, y) inherits the label at (x/2, y/2).
/// Label values are preserved, so region identity survives the level change.
inline LabelMap expand_labels(const LabelMap& coarse, int fine_width, int fine_height) {
  if (fine_width < 1 || fine_height < 1 || coarse.width != (fine_width + 1) / 2 ||
      coarse.height != (fine_height + 1) / 2) {
    throw data_error("expansion dimension mismatch: " + std::to_string(coarse.width) + "x" +
                     std::to_string(coarse.height) + " cannot expand to " +
                     std::to_string(fine_width) + "x" + std::to_string(fine_height));
  }
  LabelMap fine(fine_width, fine_height);
  for (int y = 0; y < fine_height; ++y) {
    for (int x = 0; x < fine_width; ++x) {
      fine.at(x, y) = coarse.at(x / 2, y / 2);
    }
  }
  return fine;
}

/// Majority vote over each 2x2 block (ties go to the smaller label).
/// Retraction of expand_labels: downsample_majority(expand_labels(m)) == m.
inline LabelMap downsample_majority(const LabelMap& fine, int coarse_width, int coarse_height) {
  if (coarse_width != (fine.width + 1) / 2 || coarse_height != (fine.height + 1) / 2) {
    throw data_error("downsample dimension mismatch");
  }
  LabelMap coarse(coarse_width, coarse_height);
  for (int y = 0; y < coarse_height; ++y) {
    for (int x = 0; x < coarse_width; ++x) {
      std::int32_t cells[4];
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int fx = 2 * x + dx;
          const int fy = 2 * y + dy;
          if (fx < fine.width && fy < fine.height) cells[n++] = fine.at(fx, fy);
        }
      }
      std::int32_t best = cells[0];
      int best_count = 0;
      for (int i = 0; i < n; ++i) {
        int c = 0;
        for (int j = 0; j < n; ++j) c += (cells[j] == cells[i]) ? 1 : 0;
        if (c > best_count || (c == best_count && cells[i] < best)) {
          best = cells[i];
          best_count = c;
        }
      }
      coarse.at(x, y) = best;
    }
  }
  return coarse;
}

/// Raster-ordered indices of pixels whose intensity is more than tol away
/// from their region's mean.
inline std::vector<std::int64_t> detect_deviants(const LabelMap& labels, const RegionStats& stats,
                                                 const GrayImage& reference, double tol) {
  if (labels.width != reference.width || labels.height != reference.height) {
    throw data_error("label map and reference image dimensions differ");
  }
  std::vector<std::int64_t> out;
  for (std::int64_t i = 0; i < labels.pixel_count(); ++i) {
    const std::int32_t l = labels.labels[static_cast<std::size_t>(i)];
    if (std::fabs(reference.pixels[static_cast<std::size_t>(i)] - stats.mean(l)) > tol) {
      out.push_back(i);
    }
  }
  return out;
}

namespace detail {

// 4-connected components restricted to a pixel subset, discovered in raster
// order of each component's first member. `member` must be 1 exactly on the
// sorted indices in `pixels`.
inline std::vector<std::vector<std::int64_t>> subset_components(
    const std::vector<std::int64_t>& pixels, const std::vector<char>& member, int w, int h) {
  std::vector<std::vector<std::int64_t>> comps;
  // Stamped visited marks so repeated calls skip the O(image) clear.
  static thread_local std::vector<std::uint64_t> visited;
  static thread_local std::uint64_t stamp = 0;
  if (visited.size() < member.size()) visited.resize(member.size(), 0);
  ++stamp;
  std::vector<std::int64_t> stack;
  for (std::int64_t start : pixels) {
    if (visited[static_cast<std::size_t>(start)] == stamp) continue;
    std::vector<std::int64_t> comp;
    visited[static_cast<std::size_t>(start)] = stamp;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::int64_t idx = stack.back();
      stack.pop_back();
      comp.push_back(idx);
      const int x = static_cast<int>(idx % w);
      const int y = static_cast<int>(idx / w);
      const int nx[4] = {x, x - 1, x + 1, x};
      const int ny[4] = {y - 1, y, y, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
        const std::int64_t nidx = static_cast<std::int64_t>(ny[k]) * w + nx[k];
        if (!member[static_cast<std::size_t>(nidx)] ||
            visited[static_cast<std::size_t>(nidx)] == stamp) {
          continue;
        }
        visited[static_cast<std::size_t>(nidx)] = stamp;
        stack.push_back(nidx);
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

// Same ascending-value sweep as cluster_intensities, over an explicit value
// list. Returns the cluster index per distinct value.
inline std::vector<std::int32_t> sweep_clusters(const std::vector<double>& distinct, double tol) {
  std::vector<std::int32_t> cluster_of(distinct.size(), 0);
  std::int32_t cluster = 0;
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    if (count > 0 && distinct[i] - sum / static_cast<double>(count) > tol) {
      ++cluster;
      sum = 0.0;
      count = 0;
    }
    cluster_of[i] = cluster;
    sum += distinct[i];
    count += 1;
  }
  return cluster_of;
}

}  // namespace detail

/// One level of the refinement cycle. Sweeps run until no pixel deviates from
/// its region mean by more than tol, or max_sweeps is hit (reported through
/// `converged`, never an error).
///
/// Per sweep, in raster order over the deviants found at sweep start, each
/// pixel still deviant against the live (incrementally updated) means either
/// moves to the 4-neighbor region whose mean is nearest to its intensity
/// (within tol; ties to the lower label) or is marked as a seed. Seeds are
/// then grouped into 4-connected, mutually tol-close clusters; a group whose
/// mean fits an adjacent region within tol joins that region, otherwise
/// groups of at least min_seed_size are minted as fresh regions and smaller
/// ones stay put. Finally any region left 4-disconnected by the migrations
/// keeps its label on its largest component (ties to the earliest raster
/// pixel) and the remainder components are minted fresh. Fresh labels are
/// strictly increasing; a region keeps its label for life.
inline LevelResult refine_level(LabelMap labels, RegionStats stats, const GrayImage& reference,
                                const RefineConfig& cfg, int level = 0,
                                std::int32_t first_fresh_label = -1) {
  validate(cfg);
  if (labels.width != reference.width || labels.height != reference.height) {
    throw data_error("label map and reference image dimensions differ");
  }
  const int w = labels.width;
  const int h = labels.height;
  const std::int64_t n = labels.pixel_count();
  std::int32_t next_label =
      (first_fresh_label >= 0) ? first_fresh_label : labels.max_label() + 1;

  LevelResult result;
  result.level = level;

  std::vector<std::int64_t> deviants = detect_deviants(labels, stats, reference, cfg.tol);
  result.deviant_count_history.push_back(static_cast<std::int64_t>(deviants.size()));

  std::vector<char> is_seed(static_cast<std::size_t>(n), 0);
  std::vector<char> in_group(static_cast<std::size_t>(n), 0);

  int sweeps = 0;
  while (!deviants.empty() && sweeps < cfg.max_sweeps) {
    // Migration pass.
    std::vector<std::int64_t> seeds;
    for (std::int64_t idx : deviants) {
      const std::int32_t own = labels.labels[static_cast<std::size_t>(idx)];
      const double v = reference.pixels[static_cast<std::size_t>(idx)];
      if (std::fabs(v - stats.mean(own)) <= cfg.tol) continue;  // no longer deviant

      const int x = static_cast<int>(idx % w);
      const int y = static_cast<int>(idx / w);
      const int nx[4] = {x, x - 1, x + 1, x};
      const int ny[4] = {y - 1, y, y, y + 1};
      std::int32_t best = -1;
      double best_dist = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
        const std::int32_t cand = labels.at(nx[k], ny[k]);
        if (cand == own) continue;
        const double d = std::fabs(v - stats.mean(cand));
        if (best < 0 || d < best_dist || (d == best_dist && cand < best)) {
          best = cand;
          best_dist = d;
        }
      }
      if (best >= 0 && best_dist <= cfg.tol) {
        stats.remove(own, v);
        stats.add(best, v);
        labels.labels[static_cast<std::size_t>(idx)] = best;
      } else {
        seeds.push_back(idx);
        is_seed[static_cast<std::size_t>(idx)] = 1;
      }
    }

    // Seed aggregation: spatial components, intensity clusters within each,
    // then 4-connected subgroups of each cluster.
    const auto seed_comps = detail::subset_components(seeds, is_seed, w, h);
    for (std::int64_t idx : seeds) is_seed[static_cast<std::size_t>(idx)] = 0;

    for (const auto& comp : seed_comps) {
      std::vector<double> distinct;
      distinct.reserve(comp.size());
      for (std::int64_t idx : comp) distinct.push_back(reference.pixels[static_cast<std::size_t>(idx)]);
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      const auto cluster_of = detail::sweep_clusters(distinct, cfg.tol);
      const std::int32_t cluster_count = cluster_of.empty() ? 0 : cluster_of.back() + 1;

      for (std::int32_t c = 0; c < cluster_count; ++c) {
        std::vector<std::int64_t> members;
        for (std::int64_t idx : comp) {
          const double v = reference.pixels[static_cast<std::size_t>(idx)];
          const auto it = std::lower_bound(distinct.begin(), distinct.end(), v);
          if (cluster_of[static_cast<std::size_t>(it - distinct.begin())] == c) {
            members.push_back(idx);
          }
        }
        for (std::int64_t idx : members) in_group[static_cast<std::size_t>(idx)] = 1;
        const auto groups = detail::subset_components(members, in_group, w, h);
        for (std::int64_t idx : members) in_group[static_cast<std::size_t>(idx)] = 0;

        for (const auto& group : groups) {
          double gsum = 0.0;
          for (std::int64_t idx : group) gsum += reference.pixels[static_cast<std::size_t>(idx)];
          const double gmean = gsum / static_cast<double>(group.size());

          // A group bordering a region whose mean already fits is not a newly
          // emerging region; it joins that neighbor instead of being minted.
          for (std::int64_t idx : group) in_group[static_cast<std::size_t>(idx)] = 1;
          std::int32_t best = -1;
          double best_dist = 0.0;
          for (std::int64_t idx : group) {
            const int x = static_cast<int>(idx % w);
            const int y = static_cast<int>(idx / w);
            const int nx[4] = {x, x - 1, x + 1, x};
            const int ny[4] = {y - 1, y, y, y + 1};
            for (int k = 0; k < 4; ++k) {
              if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
              const std::int64_t nidx = static_cast<std::int64_t>(ny[k]) * w + nx[k];
              if (in_group[static_cast<std::size_t>(nidx)]) continue;
              const std::int32_t cand = labels.labels[static_cast<std::size_t>(nidx)];
              const double d = std::fabs(gmean - stats.mean(cand));
              if (best < 0 || d < best_dist || (d == best_dist && cand < best)) {
                best = cand;
                best_dist = d;
              }
            }
          }
          for (std::int64_t idx : group) in_group[static_cast<std::size_t>(idx)] = 0;

          std::int32_t target = -1;
          if (best >= 0 && best_dist <= cfg.tol) {
            target = best;
          } else if (static_cast<std::int64_t>(group.size()) >= cfg.min_seed_size) {
            target = next_label++;
          }
          if (target >= 0) {
            for (std::int64_t idx : group) {
              const double v = reference.pixels[static_cast<std::size_t>(idx)];
              stats.remove(labels.labels[static_cast<std::size_t>(idx)], v);
              stats.add(target, v);
              labels.labels[static_cast<std::size_t>(idx)] = target;
            }
          }
        }
      }
    }

    // Donor connectivity repair: a region split by the migrations keeps its
    // label on the largest component, the rest become fresh regions.
    {
      std::vector<char> visited(static_cast<std::size_t>(n), 0);
      std::vector<std::int64_t> stack;
      std::map<std::int32_t, std::vector<std::vector<std::int64_t>>> comps_by_label;
      for (std::int64_t start = 0; start < n; ++start) {
        if (visited[static_cast<std::size_t>(start)]) continue;
        const std::int32_t l = labels.labels[static_cast<std::size_t>(start)];
        std::vector<std::int64_t> comp;
        visited[static_cast<std::size_t>(start)] = 1;
        stack.assign(1, start);
        while (!stack.empty()) {
          const std::int64_t idx = stack.back();
          stack.pop_back();
          comp.push_back(idx);
          const int x = static_cast<int>(idx % w);
          const int y = static_cast<int>(idx / w);
          const int nx[4] = {x, x - 1, x + 1, x};
          const int ny[4] = {y - 1, y, y, y + 1};
          for (int k = 0; k < 4; ++k) {
            if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
            const std::int64_t nidx = static_cast<std::int64_t>(ny[k]) * w + nx[k];
            if (visited[static_cast<std::size_t>(nidx)]) continue;
            if (labels.labels[static_cast<std::size_t>(nidx)] != l) continue;
            visited[static_cast<std::size_t>(nidx)] = 1;
            stack.push_back(nidx);
          }
        }
        std::sort(comp.begin(), comp.end());
        comps_by_label[l].push_back(std::move(comp));
      }
      for (auto& [label, comps] : comps_by_label) {
        if (comps.size() < 2) continue;
        std::size_t keeper = 0;
        for (std::size_t i = 1; i < comps.size(); ++i) {
          if (comps[i].size() > comps[keeper].size()) keeper = i;
          // equal sizes: the earlier-discovered component has the earlier
          // raster first pixel and wins
        }
        for (std::size_t i = 0; i < comps.size(); ++i) {
          if (i == keeper) continue;
          const std::int32_t fresh = next_label++;
          for (std::int64_t idx : comps[i]) {
            const double v = reference.pixels[static_cast<std::size_t>(idx)];
            stats.remove(label, v);
            stats.add(fresh, v);
            labels.labels[static_cast<std::size_t>(idx)] = fresh;
          }
        }
      }
    }

    ++sweeps;
    deviants = detect_deviants(labels, stats, reference, cfg.tol);
    result.deviant_count_history.push_back(static_cast<std::int64_t>(deviants.size()));
  }

  result.converged = deviants.empty();
  result.labels = std::move(labels);
  result.stats = std::move(stats);
  return result;
}

/// Full pipeline: shrink to the pyramid top, segment it, then expand, restat
/// and refine level by level down to the original image. Results are ordered
/// top (coarsest) first; the entry for the top is the raw top segmentation
/// with its deviance scan. Fresh labels stay unique across the whole run.
inline std::vector<LevelResult> segment_image(const GrayImage& img, const RefineConfig& cfg = {},
                                              std::int64_t top_target = 100) {
  validate(cfg);
  const Pyramid pyr = build_pyramid(img, top_target);
  std::vector<LevelResult> results;
  results.reserve(static_cast<std::size_t>(pyr.num_levels()));

  TopSegmentation top = segment_top(pyr.top(), cfg.tol);
  {
    LevelResult r;
    r.level = pyr.num_levels() - 1;
    const auto devs = detect_deviants(top.labels, top.stats, pyr.top(), cfg.tol);
    r.deviant_count_history.push_back(static_cast<std::int64_t>(devs.size()));
    r.converged = devs.empty();
    r.labels = std::move(top.labels);
    r.stats = std::move(top.stats);
    results.push_back(std::move(r));
  }

  std::int32_t next_label = results.front().labels.max_label() + 1;
  for (int level = pyr.num_levels() - 2; level >= 0; --level) {
    const GrayImage& reference = pyr.levels[static_cast<std::size_t>(level)];
    LabelMap labels =
        expand_labels(results.back().labels, reference.width, reference.height);
    RegionStats stats = compute_stats(labels, reference);
    LevelResult r = refine_level(std::move(labels), std::move(stats), reference, cfg, level,
                                 next_label);
    next_label = std::max(next_label, r.labels.max_label() + 1);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace descry
