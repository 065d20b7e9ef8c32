#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fav/autodiff.hpp"

namespace fav {

/// sRGB image with values in [0,1], channels interleaved per pixel.
struct ImageRGB {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;  // height * width * 3

  ImageRGB() = default;
  ImageRGB(std::size_t h, std::size_t w, double fill = 0.0);

  static ImageRGB from_rgb8(std::span<const std::uint8_t> bytes, std::size_t h, std::size_t w);

  double& at(std::size_t y, std::size_t x, std::size_t c) { return values[(y * width + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return values[(y * width + x) * 3 + c]; }
  std::size_t pixels() const noexcept { return height * width; }

  /// Throws GeometryError / DataError on bad extents or out-of-range values.
  void validate() const;
};

/// CIELAB image (D65 white), same layout as ImageRGB.
struct ImageLab {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x, std::size_t c) const { return values[(y * width + x) * 3 + c]; }
};

/// Regular P x P tiling; patch j sits at grid row j / cols, column j % cols.
struct PatchGrid {
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::size_t patch = 0;
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;

  std::size_t count() const noexcept { return grid_rows * grid_cols; }
  std::size_t patch_of(std::size_t y, std::size_t x) const noexcept { return (y / patch) * grid_cols + x / patch; }
  std::size_t top(std::size_t j) const noexcept { return (j / grid_cols) * patch; }
  std::size_t left(std::size_t j) const noexcept { return (j % grid_cols) * patch; }
  std::size_t flat_size(std::size_t channels = 3) const noexcept { return patch * patch * channels; }
};

PatchGrid patchify(std::size_t height, std::size_t width, std::size_t patch);
PatchGrid patchify(const ImageRGB& img, std::size_t patch);

/// Pixels row-major within the patch, channels innermost.
std::vector<double> flatten_patch(const PatchGrid& grid, const ImageRGB& img, std::size_t j);
/// All flattened patches stacked: N x (P*P*3).
Tensor patch_matrix(const PatchGrid& grid, const ImageRGB& img);
/// Inverse of patch_matrix.
ImageRGB reassemble(const PatchGrid& grid, const Tensor& patches);

/// z = x E for every row of `patches`.
Var patch_embed(Tape& tape, Var patches, Parameter& embedding);
std::vector<double> patch_embed(std::span<const double> x, const Tensor& embedding);

ImageLab rgb_to_lab(const ImageRGB& img);

ImageRGB resize_nearest(const ImageRGB& img, std::size_t height, std::size_t width);
/// Nearest-neighbour resize preserving aspect ratio so the image fits, then
/// centered on a black canvas of the requested extents.
ImageRGB fit_to_canvas(const ImageRGB& img, std::size_t height, std::size_t width);

}  // namespace fav
