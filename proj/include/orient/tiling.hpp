#pragma once

#include <cmath>
#include <cstdlib>
#include <vector>

#include "orient/error.hpp"
#include "orient/image.hpp"

namespace orient {

inline constexpr int kFullTilePx = 336;
inline constexpr int kMaxTiles = 16;

// Dynamic-cropping decision for one image: a cols x rows grid of tile_px
// tiles over a uniformly scaled, white-padded canvas, plus a global view.
struct TilingPlan {
  int cols = 1;
  int rows = 1;
  int tile_px = kFullTilePx;
  int scaled_w = 0;
  int scaled_h = 0;
  bool include_global = true;

  int tiles() const noexcept { return cols * rows; }
  int canvas_w() const noexcept { return cols * tile_px; }
  int canvas_h() const noexcept { return rows * tile_px; }
  int crop_count() const noexcept { return tiles() + (include_global ? 1 : 0); }

  friend bool operator==(const TilingPlan&, const TilingPlan&) = default;
};

// Picks the grid whose aspect ratio c/r is closest to in_w/in_h among all
// grids with c*r <= max_tiles. Ties go to fewer tiles, then to the squarer
// grid.
inline TilingPlan plan_tiling(int in_w, int in_h, int tile_px = kFullTilePx, int max_tiles = kMaxTiles) {
  if (in_w < 1 || in_h < 1) throw InputError("plan_tiling: image dimensions must be positive");
  if (tile_px < 1 || max_tiles < 1) throw InputError("plan_tiling: tile size and tile cap must be positive");

  const double aspect = static_cast<double>(in_w) / in_h;
  int best_c = 1;
  int best_r = 1;
  double best_diff = std::abs(1.0 - aspect);
  for (int r = 1; r <= max_tiles; ++r) {
    for (int c = 1; c * r <= max_tiles; ++c) {
      const double diff = std::abs(static_cast<double>(c) / r - aspect);
      const int k = c * r;
      const int best_k = best_c * best_r;
      bool better = diff < best_diff;
      if (!better && diff == best_diff) {
        better = k < best_k || (k == best_k && std::abs(c - r) < std::abs(best_c - best_r));
      }
      if (better) {
        best_diff = diff;
        best_c = c;
        best_r = r;
      }
    }
  }

  TilingPlan plan;
  plan.cols = best_c;
  plan.rows = best_r;
  plan.tile_px = tile_px;
  const double s = std::min(static_cast<double>(best_c) * tile_px / in_w, static_cast<double>(best_r) * tile_px / in_h);
  plan.scaled_w = std::clamp(static_cast<int>(std::lround(s * in_w)), 1, plan.canvas_w());
  plan.scaled_h = std::clamp(static_cast<int>(std::lround(s * in_h)), 1, plan.canvas_h());
  plan.include_global = true;
  return plan;
}

struct TileRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

// Canvas rectangles of the local tiles, row-major.
inline std::vector<TileRect> tile_rects(const TilingPlan& plan) {
  std::vector<TileRect> out;
  out.reserve(static_cast<std::size_t>(plan.tiles()));
  for (int r = 0; r < plan.rows; ++r) {
    for (int c = 0; c < plan.cols; ++c) out.push_back({c * plan.tile_px, r * plan.tile_px, plan.tile_px, plan.tile_px});
  }
  return out;
}

// Row-major local tiles followed by the global view when the plan asks for it.
inline std::vector<ImageBuffer> extract_crops(const ImageBuffer& img, const TilingPlan& plan) {
  const ImageBuffer canvas =
      pad_to(resize_bilinear(img, plan.scaled_w, plan.scaled_h), plan.canvas_w(), plan.canvas_h(), kWhite);
  std::vector<ImageBuffer> crops;
  crops.reserve(static_cast<std::size_t>(plan.crop_count()));
  for (const auto& t : tile_rects(plan)) crops.push_back(crop(canvas, t.x, t.y, t.w, t.h));
  if (plan.include_global) crops.push_back(resize_bilinear(img, plan.tile_px, plan.tile_px));
  return crops;
}

enum class CroppingMode { dynamic, global_only };

// Crops fed to the encoder for one image under the given cropping mode.
inline std::vector<ImageBuffer> crops_for(const ImageBuffer& img, CroppingMode mode, int tile_px, int max_tiles) {
  if (mode == CroppingMode::global_only) return {resize_bilinear(img, tile_px, tile_px)};
  return extract_crops(img, plan_tiling(img.width(), img.height(), tile_px, max_tiles));
}

}  // namespace orient
