#include "fav/sppp.hpp"

#include <algorithm>

#include "fav/error.hpp"
#include "fav/union_find.hpp"

namespace fav {

Tensor OverlapMatrix::fractions() const {
  Tensor t({regions, patches});
  for (std::size_t i = 0; i < counts.size(); ++i) t[i] = double(counts[i]) / double(patch_area);
  return t;
}

OverlapMatrix compute_overlap(const SuperpixelMap& map, const PatchGrid& grid, Backend backend) {
  if (map.height != grid.image_height || map.width != grid.image_width) {
    throw GeometryError("overlap: superpixel map " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                        " vs patch grid " + std::to_string(grid.image_height) + "x" +
                        std::to_string(grid.image_width));
  }
  OverlapMatrix o;
  o.regions = map.regions;
  o.patches = grid.count();
  o.patch_area = grid.patch * grid.patch;
  o.counts.assign(o.regions * o.patches, 0);
  if (backend == Backend::serial) {
    kernels::serial::overlap_counts(map.labels, map.height, map.width, grid.patch, o.regions, o.counts);
  } else {
    kernels::omp::overlap_counts(map.labels, map.height, map.width, grid.patch, o.regions, o.counts);
  }
  return o;
}

std::vector<std::size_t> PatchAssignment::members(std::size_t g) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < group_of_patch.size(); ++j) {
    if (group_of_patch[j] == g) out.push_back(j);
  }
  return out;
}

namespace {

std::vector<std::size_t> dominant_superpixels(const OverlapMatrix& o, const PatchAssignment& a) {
  std::vector<std::uint64_t> totals(a.groups * o.regions, 0);
  for (std::size_t j = 0; j < o.patches; ++j) {
    const std::size_t g = a.group_of_patch[j];
    for (std::size_t i = 0; i < o.regions; ++i) totals[g * o.regions + i] += o.count(i, j);
  }
  std::vector<std::size_t> out(a.groups, 0);
  for (std::size_t g = 0; g < a.groups; ++g) {
    for (std::size_t i = 1; i < o.regions; ++i) {
      if (totals[g * o.regions + i] > totals[g * o.regions + out[g]]) out[g] = i;
    }
  }
  return out;
}

}  // namespace

PatchAssignment assign_patches_majority(const OverlapMatrix& overlap) {
  PatchAssignment a;
  a.mode = AssignmentMode::majority;
  std::vector<std::size_t> winner(overlap.patches, 0);
  for (std::size_t j = 0; j < overlap.patches; ++j) {
    for (std::size_t i = 1; i < overlap.regions; ++i) {
      if (overlap.count(i, j) > overlap.count(winner[j], j)) winner[j] = i;
    }
  }
  std::vector<bool> wins(overlap.regions, false);
  for (std::size_t w : winner) wins[w] = true;
  std::vector<std::size_t> group_of_superpixel(overlap.regions, overlap.regions);
  for (std::size_t i = 0; i < overlap.regions; ++i) {
    if (wins[i]) {
      group_of_superpixel[i] = a.groups++;
      a.group_superpixel.push_back(i);
    }
  }
  a.group_of_patch.resize(overlap.patches);
  for (std::size_t j = 0; j < overlap.patches; ++j) a.group_of_patch[j] = group_of_superpixel[winner[j]];
  return a;
}

PatchAssignment assign_patches_threshold(const OverlapMatrix& overlap, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("threshold tau must lie in (0, 1], got " + std::to_string(tau));
  UnionFind uf(overlap.patches);
  for (std::size_t i = 0; i < overlap.regions; ++i) {
    std::size_t first = overlap.patches;
    for (std::size_t j = 0; j < overlap.patches; ++j) {
      if (overlap.fraction(i, j) > tau) {
        if (first == overlap.patches) {
          first = j;
        } else {
          uf.unite(first, j);
        }
      }
    }
  }
  PatchAssignment a;
  a.mode = AssignmentMode::threshold;
  a.tau = tau;
  a.group_of_patch = uf.dense_labels(&a.groups);
  a.group_superpixel = dominant_superpixels(overlap, a);
  return a;
}

Tensor pooling_weights(const PatchAssignment& assignment, const OverlapMatrix& overlap, PoolingMode mode) {
  if (assignment.group_of_patch.size() != overlap.patches) {
    throw DimensionError("pooling: assignment covers " + std::to_string(assignment.group_of_patch.size()) +
                         " patches, overlap has " + std::to_string(overlap.patches));
  }
  Tensor w({assignment.groups, overlap.patches});
  for (std::size_t j = 0; j < overlap.patches; ++j) {
    const std::size_t g = assignment.group_of_patch[j];
    w(g, j) = mode == PoolingMode::mean ? 1.0 : overlap.fraction(assignment.group_superpixel[g], j);
  }
  for (std::size_t g = 0; g < assignment.groups; ++g) {
    auto row = w.row(g);
    double s = 0.0;
    for (double v : row) s += v;
    if (!(s > 0.0)) throw NumericError("pooling: group " + std::to_string(g) + " has zero total weight");
    for (double& v : row) v /= s;
  }
  return w;
}

TokenSequence pool_tokens(Tape& tape, Var embeddings, const PatchAssignment& assignment, const OverlapMatrix& overlap,
                          PoolingMode mode) {
  if (embeddings.rows() != overlap.patches) {
    throw DimensionError("pool_tokens: " + std::to_string(embeddings.rows()) + " embeddings for " +
                         std::to_string(overlap.patches) + " patches");
  }
  TokenSequence seq;
  seq.tokens = matmul(tape.constant(pooling_weights(assignment, overlap, mode)), embeddings);
  seq.provenance.resize(assignment.groups);
  for (std::size_t g = 0; g < assignment.groups; ++g) seq.provenance[g] = g;
  return seq;
}

Centroid centroid_of(std::span<const std::size_t> pixels, std::size_t width, std::size_t height) {
  if (pixels.empty()) throw DimensionError("centroid of an empty region");
  double sx = 0.0, sy = 0.0;
  for (std::size_t p : pixels) {
    sx += double(p % width);
    sy += double(p / width);
  }
  Centroid c;
  c.x = sx / double(pixels.size());
  c.y = sy / double(pixels.size());
  c.nx = c.x / double(width);
  c.ny = c.y / double(height);
  return c;
}

std::vector<Centroid> group_centroids(const SuperpixelMap& map, const PatchGrid& grid,
                                      const PatchAssignment& assignment) {
  std::vector<std::vector<std::size_t>> pixels(assignment.groups);
  if (assignment.mode == AssignmentMode::majority) {
    std::vector<std::size_t> group_of_region(map.regions, assignment.groups);
    for (std::size_t g = 0; g < assignment.groups; ++g) group_of_region[assignment.group_superpixel[g]] = g;
    for (std::size_t p = 0; p < map.labels.size(); ++p) {
      const std::size_t g = group_of_region[std::size_t(map.labels[p])];
      if (g < assignment.groups) pixels[g].push_back(p);
    }
  } else {
    for (std::size_t p = 0; p < map.labels.size(); ++p) {
      pixels[assignment.group_of_patch[grid.patch_of(p / map.width, p % map.width)]].push_back(p);
    }
  }
  std::vector<Centroid> out;
  out.reserve(assignment.groups);
  for (const auto& px : pixels) out.push_back(centroid_of(px, map.width, map.height));
  return out;
}

Var centroid_pe(Tape& tape, std::span<const Centroid> centroids, std::span<const LinearLayer> mlp) {
  Tensor coords({centroids.size(), 2});
  for (std::size_t g = 0; g < centroids.size(); ++g) {
    coords(g, 0) = centroids[g].nx;
    coords(g, 1) = centroids[g].ny;
  }
  return mlp_forward(tape, tape.constant(std::move(coords)), mlp, Activation::gelu);
}

void SpppOptions::validate() const {
  if (assignment == AssignmentMode::threshold && !(tau > 0.0 && tau <= 1.0)) {
    throw ConfigError("threshold tau must lie in (0, 1]");
  }
  if (slic.max_iter < 1 || slic.superpixels < 1) throw ConfigError("invalid SLIC settings");
}

SpppPlan plan_sppp(const ImageRGB& img, std::size_t patch, const SpppOptions& options) {
  options.validate();
  SpppPlan plan;
  plan.grid = patchify(img, patch);
  plan.patches = patch_matrix(plan.grid, img);
  plan.segmentation = slic_segment(rgb_to_lab(img), options.slic);
  plan.overlap = compute_overlap(plan.segmentation, plan.grid, options.slic.backend);
  plan.assignment = options.assignment == AssignmentMode::majority
                        ? assign_patches_majority(plan.overlap)
                        : assign_patches_threshold(plan.overlap, options.tau);
  plan.pooling = pooling_weights(plan.assignment, plan.overlap, options.pooling);
  plan.centroids = group_centroids(plan.segmentation, plan.grid, plan.assignment);
  return plan;
}

TokenSequence sppp_tokens(Tape& tape, const SpppPlan& plan, Parameter& embedding, std::span<const LinearLayer> pe_mlp) {
  Var z = patch_embed(tape, tape.constant(plan.patches), embedding);
  Var pooled = matmul(tape.constant(plan.pooling), z);
  Var pe = centroid_pe(tape, plan.centroids, pe_mlp);
  if (pe.cols() != pooled.cols()) {
    throw DimensionError("positional encoding width " + std::to_string(pe.cols()) + " vs token width " +
                         std::to_string(pooled.cols()));
  }
  TokenSequence seq;
  seq.tokens = add(pooled, pe);
  seq.provenance.resize(plan.assignment.groups);
  for (std::size_t g = 0; g < plan.assignment.groups; ++g) seq.provenance[g] = g;
  return seq;
}

TokenSequence sppp_forward(Tape& tape, const ImageRGB& img, std::size_t patch, const SpppOptions& options,
                           Parameter& embedding, std::span<const LinearLayer> pe_mlp) {
  return sppp_tokens(tape, plan_sppp(img, patch, options), embedding, pe_mlp);
}

}  // namespace fav
