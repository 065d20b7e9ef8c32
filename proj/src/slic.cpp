#include "fav/slic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "fav/error.hpp"
#include "fav/union_find.hpp"

namespace fav {

void SlicConfig::validate(std::size_t pixel_count) const {
  if (superpixels < 1) throw ConfigError("SLIC: K must be at least 1");
  if (superpixels > pixel_count) {
    throw ConfigError("SLIC: K=" + std::to_string(superpixels) + " exceeds the pixel count " +
                      std::to_string(pixel_count));
  }
  if (max_iter < 1) throw ConfigError("SLIC: max_iter must be at least 1");
  if (distance == SlicDistance::normalized && !(alpha > 0.0)) throw ConfigError("SLIC: alpha must be positive");
  if (distance == SlicDistance::compactness && !(compactness > 0.0)) {
    throw ConfigError("SLIC: compactness m must be positive");
  }
}

double slic_spacing(std::size_t height, std::size_t width, std::size_t superpixels) {
  return std::sqrt(double(height * width) / double(superpixels));
}

namespace {

struct GridShape {
  std::size_t nx = 1, ny = 1;
  double cell_w = 1.0, cell_h = 1.0;
};

GridShape grid_shape(std::size_t height, std::size_t width, std::size_t k) {
  GridShape g;
  g.nx = std::size_t(std::ceil(std::sqrt(double(k) * double(width) / double(height))));
  g.nx = std::clamp<std::size_t>(g.nx, 1, std::min(width, k));
  g.ny = std::clamp<std::size_t>(k / g.nx, 1, height);
  g.cell_w = double(width) / double(g.nx);
  g.cell_h = double(height) / double(g.ny);
  return g;
}

kernels::LabCenter sample_center(const ImageLab& img, double x, double y) {
  const auto px = std::min(img.width - 1, std::size_t(std::lround(std::max(0.0, x))));
  const auto py = std::min(img.height - 1, std::size_t(std::lround(std::max(0.0, y))));
  return {img.at(py, px, 0), img.at(py, px, 1), img.at(py, px, 2), x, y};
}

std::vector<std::int32_t> merge_orphans(std::size_t h, std::size_t w, const std::vector<std::int32_t>& labels) {
  UnionFind uf(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      if (x + 1 < w && labels[p] == labels[p + 1]) uf.unite(p, p + 1);
      if (y + 1 < h && labels[p] == labels[p + w]) uf.unite(p, p + w);
    }
  }
  // Largest component per label survives.
  std::map<std::int32_t, std::size_t> keeper;
  for (std::size_t p = 0; p < h * w; ++p) {
    const std::size_t r = uf.find(p);
    auto [it, inserted] = keeper.emplace(labels[p], r);
    if (!inserted && uf.component_size(r) > uf.component_size(it->second)) it->second = r;
  }
  std::map<std::size_t, std::map<std::int32_t, std::size_t>> votes;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      const std::size_t r = uf.find(p);
      if (keeper[labels[p]] == r) continue;
      auto vote = [&](std::size_t q) {
        if (uf.find(q) != r) ++votes[r][labels[q]];
      };
      if (x > 0) vote(p - 1);
      if (x + 1 < w) vote(p + 1);
      if (y > 0) vote(p - w);
      if (y + 1 < h) vote(p + w);
    }
  }
  std::vector<std::int32_t> out = labels;
  for (std::size_t p = 0; p < h * w; ++p) {
    auto it = votes.find(uf.find(p));
    if (it == votes.end() || it->second.empty()) continue;
    auto best = std::max_element(it->second.begin(), it->second.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    out[p] = best->first;
  }
  return out;
}

}  // namespace

std::vector<kernels::LabCenter> slic_grid_centers(const ImageLab& img, std::size_t superpixels) {
  const GridShape g = grid_shape(img.height, img.width, superpixels);
  std::vector<kernels::LabCenter> centers;
  centers.reserve(g.nx * g.ny);
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      centers.push_back(sample_center(img, (double(i) + 0.5) * g.cell_w - 0.5, (double(j) + 0.5) * g.cell_h - 0.5));
    }
  }
  return centers;
}

SuperpixelMap make_superpixel_map(std::size_t height, std::size_t width, std::vector<std::int32_t> labels,
                                  const ImageLab* img) {
  if (labels.size() != height * width) throw DimensionError("label field size does not match extents");
  std::map<std::int32_t, std::int32_t> remap;
  for (auto l : labels) {
    if (l < 0) throw DataError("label field contains an unassigned pixel");
    remap.emplace(l, 0);
  }
  std::int32_t next = 0;
  for (auto& [from, to] : remap) to = next++;

  SuperpixelMap map;
  map.height = height;
  map.width = width;
  map.regions = remap.size();
  map.sizes.assign(map.regions, 0);
  std::vector<std::array<double, 5>> sums(map.regions, {0, 0, 0, 0, 0});
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto r = remap[labels[p]];
    labels[p] = r;
    ++map.sizes[std::size_t(r)];
    auto& s = sums[std::size_t(r)];
    if (img) {
      s[0] += img->values[3 * p];
      s[1] += img->values[3 * p + 1];
      s[2] += img->values[3 * p + 2];
    }
    s[3] += double(p % width);
    s[4] += double(p / width);
  }
  map.centers.resize(map.regions);
  for (std::size_t r = 0; r < map.regions; ++r) {
    const double n = double(map.sizes[r]);
    map.centers[r] = {sums[r][0] / n, sums[r][1] / n, sums[r][2] / n, sums[r][3] / n, sums[r][4] / n};
  }
  map.labels = std::move(labels);
  return map;
}

SuperpixelMap slic_segment(const ImageLab& img, const SlicConfig& cfg) {
  const std::size_t h = img.height, w = img.width;
  if (h < 2 || w < 2) throw GeometryError("SLIC needs an image of at least 2x2 pixels");
  cfg.validate(h * w);

  const GridShape g = grid_shape(h, w, cfg.superpixels);
  std::vector<kernels::LabCenter> centers = slic_grid_centers(img, cfg.superpixels);

  kernels::SlicAssignParams params;
  params.height = h;
  params.width = w;
  params.spacing = slic_spacing(h, w, cfg.superpixels);
  // 2S x 2S window; widened only when a grid cell is larger than it so that
  // every pixel is reachable from its own cell's center.
  params.window = std::max({params.spacing, 0.5 * g.cell_w, 0.5 * g.cell_h});
  params.normalized = cfg.distance == SlicDistance::normalized;
  params.alpha = cfg.alpha;
  params.compactness = cfg.compactness;
  params.max_color = 1.0;

  std::vector<std::int32_t> labels(h * w, -1);
  std::vector<std::int32_t> previous;
  std::vector<std::size_t> changes;
  std::size_t iterations = 0;
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    previous = labels;
    const kernels::SlicAssignResult res = cfg.backend == Backend::serial
                                              ? kernels::serial::slic_assign(img.values, centers, params, labels)
                                              : kernels::omp::slic_assign(img.values, centers, params, labels);
    if (it == 0 && res.uncovered != 0) {
      throw Error("SLIC: " + std::to_string(res.uncovered) + " pixels outside every initial search window");
    }
    params.max_color = res.max_color_distance > 0.0 ? res.max_color_distance : 1.0;

    std::size_t changed = 0;
    for (std::size_t p = 0; p < labels.size(); ++p) changed += labels[p] != previous[p] ? 1 : 0;
    changes.push_back(changed);
    ++iterations;

    std::vector<std::array<double, 6>> sums(centers.size(), {0, 0, 0, 0, 0, 0});
    for (std::size_t p = 0; p < labels.size(); ++p) {
      auto& s = sums[std::size_t(labels[p])];
      s[0] += img.values[3 * p];
      s[1] += img.values[3 * p + 1];
      s[2] += img.values[3 * p + 2];
      s[3] += double(p % w);
      s[4] += double(p / w);
      s[5] += 1.0;
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& s = sums[k];
      if (s[5] > 0.0) centers[k] = {s[0] / s[5], s[1] / s[5], s[2] / s[5], s[3] / s[5], s[4] / s[5]};
    }
    if (changed == 0) break;
  }

  if (cfg.merge_orphans) labels = merge_orphans(h, w, labels);

  SuperpixelMap map = make_superpixel_map(h, w, std::move(labels), &img);
  map.changed_per_iteration = std::move(changes);
  map.iterations = iterations;
  map.spacing = params.spacing;
  return map;
}

std::vector<RegionStats> region_stats(const SuperpixelMap& map) {
  std::vector<RegionStats> stats(map.regions);
  std::vector<bool> seen(map.regions, false);
  for (std::size_t p = 0; p < map.labels.size(); ++p) {
    const auto r = std::size_t(map.labels[p]);
    const std::size_t x = p % map.width, y = p / map.width;
    RegionStats& s = stats[r];
    if (!seen[r]) {
      s.min_x = s.max_x = x;
      s.min_y = s.max_y = y;
      seen[r] = true;
    }
    ++s.size;
    s.min_x = std::min(s.min_x, x);
    s.max_x = std::max(s.max_x, x);
    s.min_y = std::min(s.min_y, y);
    s.max_y = std::max(s.max_y, y);
  }
  return stats;
}

}  // namespace fav
