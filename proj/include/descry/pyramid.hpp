#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "descry/errors.hpp"
#include "descry/image.hpp"

namespace descry {

/// Shrinking image stack: level 0 is the input, each next level halves both
/// dimensions (ceil), and shrinking stops at the first level whose pixel
/// count is at or below the top target.
///
/// A coarse pixel is the mean of the level-0 pixels in its footprint, the
/// block [x*2^L, min((x+1)*2^L, W)) x [y*2^L, min((y+1)*2^L, H)). Interior
/// blocks are the plain 4-to-1 average of the level below; edge blocks of
/// odd-sized levels weight their 1, 2, or 4 source pixels by footprint so no
/// mass is invented. The builder keeps the exact running footprint sums and
/// derives the mean images from them, which is what makes the area-weighted
/// total identical across levels instead of merely close.
struct Pyramid {
  std::vector<GrayImage> levels;            // [0] = original input
  std::vector<std::vector<double>> sums;    // per level, exact footprint sums
  std::int64_t top_target = 100;

  int num_levels() const { return static_cast<int>(levels.size()); }

  const GrayImage& top() const { return levels.back(); }

  int base_width() const { return levels.front().width; }
  int base_height() const { return levels.front().height; }

  /// Count of level-0 pixels a coarse pixel covers.
  std::int64_t footprint_area(int level, int x, int y) const {
    const std::int64_t span = std::int64_t{1} << level;
    const std::int64_t fw = std::min((x + 1) * span, static_cast<std::int64_t>(base_width())) -
                            x * span;
    const std::int64_t fh = std::min((y + 1) * span, static_cast<std::int64_t>(base_height())) -
                            y * span;
    return fw * fh;
  }

  /// Unrounded sum of level-0 intensities under a coarse pixel.
  double footprint_sum(int level, int x, int y) const {
    return sums[static_cast<std::size_t>(level)]
               [static_cast<std::size_t>(y) * levels[static_cast<std::size_t>(level)].width + x];
  }

  /// Sum over pixels of value x footprint area, taken from the exact sums.
  /// Equal across all levels (bit-exact for integer or dyadic inputs).
  double weighted_total(int level) const {
    double total = 0.0;
    for (double s : sums[static_cast<std::size_t>(level)]) total += s;
    return total;
  }
};

inline Pyramid build_pyramid(const GrayImage& img, std::int64_t top_target = 100) {
  if (top_target < 1) {
    throw config_error("pyramid top target must be at least 1, got " +
                       std::to_string(top_target));
  }
  Pyramid p;
  p.top_target = top_target;
  p.levels.push_back(img);
  p.sums.push_back(img.pixels);

  while (p.levels.back().pixel_count() > top_target) {
    const GrayImage& prev = p.levels.back();
    const std::vector<double>& prev_sums = p.sums.back();
    const int cw = (prev.width + 1) / 2;
    const int ch = (prev.height + 1) / 2;
    const int level = p.num_levels();

    std::vector<double> next_sums(static_cast<std::size_t>(cw) * ch, 0.0);
    GrayImage next(cw, ch);
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        double s = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
          const int sy = 2 * y + dy;
          if (sy >= prev.height) break;
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = 2 * x + dx;
            if (sx >= prev.width) break;
            s += prev_sums[static_cast<std::size_t>(sy) * prev.width + sx];
          }
        }
        next_sums[static_cast<std::size_t>(y) * cw + x] = s;
      }
    }
    p.sums.push_back(std::move(next_sums));
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        next.at(x, y) = p.sums.back()[static_cast<std::size_t>(y) * cw + x] /
                        static_cast<double>(p.footprint_area(level, x, y));
      }
    }
    p.levels.push_back(std::move(next));
  }
  return p;
}

}  // namespace descry
