#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fav/imaging.hpp"
#include "fav/kernels.hpp"

namespace fav {

enum class SlicDistance {
  /// sqrt((d_c / max_c)^2 + (d_s / (alpha S))^2), max_c from the previous sweep.
  normalized,
  /// sqrt(d_c^2 + (d_s / S)^2 m^2).
  compactness,
};

enum class Backend { serial, openmp };

struct SlicConfig {
  std::size_t superpixels = 16;  // K
  SlicDistance distance = SlicDistance::normalized;
  double alpha = 0.1;
  double compactness = 10.0;     // m
  std::size_t max_iter = 10;
  std::uint64_t seed = 0;        // reserved; grid initialization is deterministic
  bool merge_orphans = false;    // reassign disconnected fragments to a neighbour
  Backend backend = Backend::openmp;

  void validate(std::size_t pixel_count) const;
};

struct SuperpixelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;           // row-major, values in [0, regions)
  std::size_t regions = 0;                    // R
  std::vector<kernels::LabCenter> centers;    // per region mean (L*, a*, b*, x, y)
  std::vector<std::size_t> sizes;             // per region pixel count
  std::vector<std::size_t> changed_per_iteration;
  std::size_t iterations = 0;
  double spacing = 0.0;                       // S = sqrt(H W / K)
};

/// Grid interval S = sqrt(pixels / K).
double slic_spacing(std::size_t height, std::size_t width, std::size_t superpixels);

/// Initial centers on a grid of cells; at most K of them, one per cell.
std::vector<kernels::LabCenter> slic_grid_centers(const ImageLab& img, std::size_t superpixels);

SuperpixelMap slic_segment(const ImageLab& img, const SlicConfig& cfg);

/// Builds a map (compacted labels, centers, sizes) from a raw label field.
/// Label ids are renumbered densely in increasing order; center colors are
/// zero when `img` is null.
SuperpixelMap make_superpixel_map(std::size_t height, std::size_t width, std::vector<std::int32_t> labels,
                                  const ImageLab* img = nullptr);

struct RegionStats {
  std::size_t size = 0;
  std::size_t min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

std::vector<RegionStats> region_stats(const SuperpixelMap& map);

}  // namespace fav
