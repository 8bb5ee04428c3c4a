#pragma once

// The stacked level descriptions: every region at every level registered with
// its size, center of mass, average intensity, bounding box, parent region at
// the next coarser level and qualitative relations to its neighbors. Together
// with the retained label maps the stack is an executable description — see
// reconstruct().

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "descry/errors.hpp"
#include "descry/image.hpp"
#include "descry/label_map.hpp"
#include "descry/pyramid.hpp"
#include "descry/refine.hpp"

namespace descry {

enum class RelPosition { left_of, right_of, above, below };

inline const char* to_string(RelPosition p) {
  switch (p) {
    case RelPosition::left_of: return "left-of";
    case RelPosition::right_of: return "right-of";
    case RelPosition::above: return "above";
    case RelPosition::below: return "below";
  }
  return "?";
}

inline RelPosition rel_position_from_string(const std::string& s) {
  if (s == "left-of") return RelPosition::left_of;
  if (s == "right-of") return RelPosition::right_of;
  if (s == "above") return RelPosition::above;
  if (s == "below") return RelPosition::below;
  throw data_error("unknown relative position '" + s + "'");
}

/// Qualitative position of the owning region relative to one adjacent region.
struct AdjacentRelation {
  std::int32_t label = 0;
  RelPosition position = RelPosition::left_of;

  bool operator==(const AdjacentRelation&) const = default;
};

struct RegionDescriptor {
  int level = 0;
  std::int32_t label = 0;
  std::int64_t size = 0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double mean_intensity = 0.0;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  std::optional<std::int32_t> parent_label;  // none on the top level
  std::vector<AdjacentRelation> adjacent;    // sorted by label

  int bbox_width() const { return max_x - min_x + 1; }
  int bbox_height() const { return max_y - min_y + 1; }

  const AdjacentRelation* relation_to(std::int32_t other) const {
    for (const auto& a : adjacent) {
      if (a.label == other) return &a;
    }
    return nullptr;
  }

  bool operator==(const RegionDescriptor&) const = default;
};

struct LevelDescriptors {
  int level = 0;
  int width = 0;
  int height = 0;
  std::vector<RegionDescriptor> regions;  // sorted by label

  const RegionDescriptor* find(std::int32_t label) const {
    for (const auto& r : regions) {
      if (r.label == label) return &r;
    }
    return nullptr;
  }
};

/// Per-level region descriptors, coarsest level first, plus an echo of the
/// source dimensions and the configuration that produced them.
struct DescriptionStack {
  int image_width = 0;
  int image_height = 0;
  RefineConfig config;
  std::int64_t top_target = 100;
  std::vector<LevelDescriptors> levels;  // front() = top, back() = level 0

  const LevelDescriptors* find_level(int level) const {
    for (const auto& l : levels) {
      if (l.level == level) return &l;
    }
    return nullptr;
  }
};

namespace detail {

// Dominant-axis qualitative position of a relative to b. Horizontal wins
// ties; coincident centroids fall back to the lower label being left-of.
inline RelPosition position_of(double ax, double ay, std::int32_t alabel, double bx, double by,
                               std::int32_t blabel) {
  const double dx = bx - ax;
  const double dy = by - ay;
  if (std::fabs(dx) >= std::fabs(dy)) {
    if (dx > 0.0) return RelPosition::left_of;
    if (dx < 0.0) return RelPosition::right_of;
    return alabel < blabel ? RelPosition::left_of : RelPosition::right_of;
  }
  return dy > 0.0 ? RelPosition::above : RelPosition::below;
}

}  // namespace detail

/// Builds the description stack from segmentation results (top first) and the
/// pyramid they were computed on. The parent of a region is the next-coarser
/// label covering the plurality of its pixels under the (x/2, y/2) projection
/// (ties to the lower label).
inline DescriptionStack register_regions(const std::vector<LevelResult>& results,
                                         const Pyramid& pyramid, const RefineConfig& cfg = {},
                                         std::int64_t top_target = 100) {
  if (results.empty() || results.size() != static_cast<std::size_t>(pyramid.num_levels())) {
    throw data_error("segmentation results do not match the pyramid level count");
  }
  for (std::size_t i = 0; i < results.size(); ++i) {
    const GrayImage& img = pyramid.levels[static_cast<std::size_t>(results[i].level)];
    if (results[i].labels.width != img.width || results[i].labels.height != img.height) {
      throw data_error("segmentation result dimensions do not match the pyramid");
    }
  }

  DescriptionStack stack;
  stack.image_width = pyramid.base_width();
  stack.image_height = pyramid.base_height();
  stack.config = cfg;
  stack.top_target = top_target;

  for (std::size_t ri = 0; ri < results.size(); ++ri) {
    const LevelResult& res = results[ri];
    const LabelMap& labels = res.labels;
    const int w = labels.width;
    const int h = labels.height;
    const bool is_top = (ri == 0);
    const LabelMap* coarse = is_top ? nullptr : &results[ri - 1].labels;

    struct Acc {
      std::int64_t size = 0;
      std::int64_t sum_x = 0, sum_y = 0;
      int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
      std::map<std::int32_t, std::int64_t> parent_votes;
    };
    std::map<std::int32_t, Acc> accs;

    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::int32_t l = labels.at(x, y);
        auto [it, fresh] = accs.try_emplace(l);
        Acc& a = it->second;
        if (fresh) {
          a.min_x = a.max_x = x;
          a.min_y = a.max_y = y;
        } else {
          a.min_x = std::min(a.min_x, x);
          a.max_x = std::max(a.max_x, x);
          a.min_y = std::min(a.min_y, y);
          a.max_y = std::max(a.max_y, y);
        }
        a.size += 1;
        a.sum_x += x;
        a.sum_y += y;
        if (coarse) a.parent_votes[coarse->at(x / 2, y / 2)] += 1;
      }
    }

    // Adjacency from neighboring pixel pairs.
    std::map<std::int32_t, std::vector<std::int32_t>> adjacency;
    auto note_pair = [&adjacency](std::int32_t a, std::int32_t b) {
      if (a == b) return;
      adjacency[a].push_back(b);
      adjacency[b].push_back(a);
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x + 1 < w) note_pair(labels.at(x, y), labels.at(x + 1, y));
        if (y + 1 < h) note_pair(labels.at(x, y), labels.at(x, y + 1));
      }
    }

    LevelDescriptors level;
    level.level = res.level;
    level.width = w;
    level.height = h;
    for (auto& [l, a] : accs) {
      RegionDescriptor d;
      d.level = res.level;
      d.label = l;
      d.size = a.size;
      d.centroid_x = static_cast<double>(a.sum_x) / static_cast<double>(a.size);
      d.centroid_y = static_cast<double>(a.sum_y) / static_cast<double>(a.size);
      d.mean_intensity = res.stats.mean(l);
      d.min_x = a.min_x;
      d.min_y = a.min_y;
      d.max_x = a.max_x;
      d.max_y = a.max_y;
      if (!is_top) {
        std::int32_t parent = -1;
        std::int64_t votes = -1;
        for (const auto& [cl, v] : a.parent_votes) {
          if (v > votes) {  // map order makes ties go to the lower label
            parent = cl;
            votes = v;
          }
        }
        d.parent_label = parent;
      }
      level.regions.push_back(std::move(d));
    }

    for (RegionDescriptor& d : level.regions) {
      auto& nbrs = adjacency[d.label];
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
      for (std::int32_t other : nbrs) {
        const Acc& oa = accs.at(other);
        const double ox = static_cast<double>(oa.sum_x) / static_cast<double>(oa.size);
        const double oy = static_cast<double>(oa.sum_y) / static_cast<double>(oa.size);
        d.adjacent.push_back(AdjacentRelation{
            other,
            detail::position_of(d.centroid_x, d.centroid_y, d.label, ox, oy, other)});
      }
    }
    stack.levels.push_back(std::move(level));
  }
  return stack;
}

/// Piecewise-constant image for one level: every pixel painted with its
/// region's mean intensity.
inline GrayImage reconstruct(const DescriptionStack& stack, int level,
                             const LabelMap& level_labels) {
  const LevelDescriptors* ld = stack.find_level(level);
  if (ld == nullptr) {
    throw data_error("description stack has no level " + std::to_string(level));
  }
  if (level_labels.width != ld->width || level_labels.height != ld->height) {
    throw data_error("label map dimensions do not match level " + std::to_string(level));
  }
  std::map<std::int32_t, double> mean_of;
  for (const auto& r : ld->regions) mean_of[r.label] = r.mean_intensity;

  GrayImage out(ld->width, ld->height);
  for (std::size_t i = 0; i < level_labels.labels.size(); ++i) {
    const auto it = mean_of.find(level_labels.labels[i]);
    if (it == mean_of.end()) {
      throw data_error("label " + std::to_string(level_labels.labels[i]) +
                       " has no descriptor at level " + std::to_string(level));
    }
    out.pixels[i] = it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stack file format: JSON with fixed key order, coarsest level first, regions
// by ascending label, adjacency by ascending label. Written byte-stable so
// golden-file comparisons are meaningful.
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json stack_to_json(const DescriptionStack& stack) {
  nlohmann::ordered_json j;
  j["format"] = "descry-stack/1";
  j["image"] = {{"width", stack.image_width}, {"height", stack.image_height}};
  j["config"] = {{"tol", stack.config.tol},
                 {"top_target", stack.top_target},
                 {"max_sweeps", stack.config.max_sweeps},
                 {"min_seed_size", stack.config.min_seed_size}};
  j["levels"] = nlohmann::ordered_json::array();
  for (const auto& level : stack.levels) {
    nlohmann::ordered_json jl;
    jl["level"] = level.level;
    jl["width"] = level.width;
    jl["height"] = level.height;
    jl["regions"] = nlohmann::ordered_json::array();
    for (const auto& r : level.regions) {
      nlohmann::ordered_json jr;
      jr["label"] = r.label;
      jr["size"] = r.size;
      jr["centroid"] = {r.centroid_x, r.centroid_y};
      jr["mean_intensity"] = r.mean_intensity;
      jr["bbox"] = {r.min_x, r.min_y, r.max_x, r.max_y};
      if (r.parent_label) {
        jr["parent"] = *r.parent_label;
      } else {
        jr["parent"] = nullptr;
      }
      jr["adjacent"] = nlohmann::ordered_json::array();
      for (const auto& a : r.adjacent) {
        jr["adjacent"].push_back({{"label", a.label}, {"position", to_string(a.position)}});
      }
      jl["regions"].push_back(std::move(jr));
    }
    j["levels"].push_back(std::move(jl));
  }
  return j;
}

inline std::string stack_to_text(const DescriptionStack& stack) {
  return stack_to_json(stack).dump(2) + "\n";
}

inline void save_stack(const DescriptionStack& stack, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw io_error("cannot open stack file for writing: " + path.string());
  }
  out << stack_to_text(stack);
  if (!out) {
    throw io_error("failed writing stack file: " + path.string());
  }
}

inline DescriptionStack stack_from_json(const nlohmann::json& j) {
  DescriptionStack stack;
  try {
    if (j.at("format").get<std::string>() != "descry-stack/1") {
      throw data_error("unsupported stack format tag");
    }
    stack.image_width = j.at("image").at("width").get<int>();
    stack.image_height = j.at("image").at("height").get<int>();
    stack.config.tol = j.at("config").at("tol").get<double>();
    stack.top_target = j.at("config").at("top_target").get<std::int64_t>();
    stack.config.max_sweeps = j.at("config").at("max_sweeps").get<int>();
    stack.config.min_seed_size = j.at("config").at("min_seed_size").get<std::int64_t>();
    for (const auto& jl : j.at("levels")) {
      LevelDescriptors level;
      level.level = jl.at("level").get<int>();
      level.width = jl.at("width").get<int>();
      level.height = jl.at("height").get<int>();
      for (const auto& jr : jl.at("regions")) {
        RegionDescriptor r;
        r.level = level.level;
        r.label = jr.at("label").get<std::int32_t>();
        r.size = jr.at("size").get<std::int64_t>();
        r.centroid_x = jr.at("centroid").at(0).get<double>();
        r.centroid_y = jr.at("centroid").at(1).get<double>();
        r.mean_intensity = jr.at("mean_intensity").get<double>();
        r.min_x = jr.at("bbox").at(0).get<int>();
        r.min_y = jr.at("bbox").at(1).get<int>();
        r.max_x = jr.at("bbox").at(2).get<int>();
        r.max_y = jr.at("bbox").at(3).get<int>();
        if (!jr.at("parent").is_null()) {
          r.parent_label = jr.at("parent").get<std::int32_t>();
        }
        for (const auto& ja : jr.at("adjacent")) {
          r.adjacent.push_back(AdjacentRelation{
              ja.at("label").get<std::int32_t>(),
              rel_position_from_string(ja.at("position").get<std::string>())});
        }
        level.regions.push_back(std::move(r));
      }
      stack.levels.push_back(std::move(level));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("invalid stack file: ") + e.what());
  }
  return stack;
}

inline DescriptionStack load_stack(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw io_error("cannot open stack file: " + path.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error("stack file " + path.string() + ": " + e.what());
  }
  return stack_from_json(j);
}

}  // namespace descry
