#pragma once

// Superpixel-based patch pooling: patch embeddings are grouped by the
// superpixels they overlap and each group is pooled into one token, which then
// receives a positional encoding computed from the group's pixel centroid.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fav/autodiff.hpp"
#include "fav/imaging.hpp"
#include "fav/nn.hpp"
#include "fav/slic.hpp"

namespace fav {

/// Pixel counts of every (superpixel, patch) pair; fractions are count / P^2.
struct OverlapMatrix {
  std::size_t regions = 0;     // R
  std::size_t patches = 0;     // N
  std::size_t patch_area = 0;  // P^2
  std::vector<std::uint32_t> counts;  // R x N, row-major

  std::uint32_t count(std::size_t i, std::size_t j) const noexcept { return counts[i * patches + j]; }
  double fraction(std::size_t i, std::size_t j) const noexcept { return double(count(i, j)) / double(patch_area); }
  Tensor fractions() const;
};

OverlapMatrix compute_overlap(const SuperpixelMap& map, const PatchGrid& grid, Backend backend = Backend::openmp);

enum class AssignmentMode { majority, threshold };

struct PatchAssignment {
  std::vector<std::size_t> group_of_patch;  // size N
  std::size_t groups = 0;                   // G
  AssignmentMode mode = AssignmentMode::majority;
  double tau = 0.0;
  /// Superpixel with the largest total overlap over each group's patches.
  std::vector<std::size_t> group_superpixel;

  std::vector<std::size_t> members(std::size_t g) const;
};

/// Each patch joins the superpixel holding most of its pixels (ties: lower
/// superpixel index); groups are numbered in increasing superpixel order.
PatchAssignment assign_patches_majority(const OverlapMatrix& overlap);

/// Patches j, k are linked when some superpixel covers more than tau of both;
/// groups are the connected components, numbered by their lowest patch.
PatchAssignment assign_patches_threshold(const OverlapMatrix& overlap, double tau);

enum class PoolingMode { mean, overlap_weighted };

/// Row-stochastic G x N matrix W with tokens = W * embeddings.
Tensor pooling_weights(const PatchAssignment& assignment, const OverlapMatrix& overlap, PoolingMode mode);

struct TokenSequence {
  Var tokens;                           // S x D
  std::vector<std::size_t> provenance;  // group id per token
  std::size_t size() const noexcept { return provenance.size(); }
};

TokenSequence pool_tokens(Tape& tape, Var embeddings, const PatchAssignment& assignment, const OverlapMatrix& overlap,
                          PoolingMode mode);

struct Centroid {
  double x = 0.0, y = 0.0;    // pixels
  double nx = 0.0, ny = 0.0;  // normalized by (W, H)
};

/// Majority mode: centroid of the group's superpixel region. Threshold mode:
/// centroid of the union of the group's patch pixels.
std::vector<Centroid> group_centroids(const SuperpixelMap& map, const PatchGrid& grid,
                                      const PatchAssignment& assignment);

/// Mean pixel coordinate of `pixels` (row-major indices) normalized by (W, H).
Centroid centroid_of(std::span<const std::size_t> pixels, std::size_t width, std::size_t height);

/// PE_g = MLP(c_x / W, c_y / H) for every group: G x D.
Var centroid_pe(Tape& tape, std::span<const Centroid> centroids, std::span<const LinearLayer> mlp);

struct SpppOptions {
  SlicConfig slic;
  AssignmentMode assignment = AssignmentMode::majority;
  double tau = 0.5;
  PoolingMode pooling = PoolingMode::mean;

  void validate() const;
};

/// Non-differentiable part of the pipeline, computed once per image.
struct SpppPlan {
  PatchGrid grid;
  Tensor patches;  // N x P^2*3
  SuperpixelMap segmentation;
  OverlapMatrix overlap;
  PatchAssignment assignment;
  Tensor pooling;  // G x N
  std::vector<Centroid> centroids;

  std::size_t tokens() const noexcept { return assignment.groups; }
};

SpppPlan plan_sppp(const ImageRGB& img, std::size_t patch, const SpppOptions& options);

/// Embed patches, pool them per group and add the centroid encodings.
TokenSequence sppp_tokens(Tape& tape, const SpppPlan& plan, Parameter& embedding, std::span<const LinearLayer> pe_mlp);

TokenSequence sppp_forward(Tape& tape, const ImageRGB& img, std::size_t patch, const SpppOptions& options,
                           Parameter& embedding, std::span<const LinearLayer> pe_mlp);

}  // namespace fav
