#include "fav/imaging.hpp"

#include <algorithm>
#include <cmath>

#include "fav/error.hpp"

namespace fav {

ImageRGB::ImageRGB(std::size_t h, std::size_t w, double fill) : height(h), width(w), values(h * w * 3, fill) {}

ImageRGB ImageRGB::from_rgb8(std::span<const std::uint8_t> bytes, std::size_t h, std::size_t w) {
  if (bytes.size() != h * w * 3) {
    throw DataError("rgb8 buffer holds " + std::to_string(bytes.size()) + " bytes, expected " +
                    std::to_string(h * w * 3) + " for " + std::to_string(h) + "x" + std::to_string(w));
  }
  ImageRGB img(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.values[i] = double(bytes[i]) / 255.0;
  return img;
}

void ImageRGB::validate() const {
  if (height == 0 || width == 0) throw GeometryError("image has zero extent");
  if (values.size() != height * width * 3) throw DataError("image buffer size does not match extents");
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("image value outside [0,1]");
  }
}

PatchGrid patchify(std::size_t height, std::size_t width, std::size_t patch) {
  if (patch == 0 || height < patch || width < patch || height % patch != 0 || width % patch != 0) {
    throw GeometryError("cannot tile H=" + std::to_string(height) + " W=" + std::to_string(width) +
                        " with P=" + std::to_string(patch) + " (P must divide both extents)");
  }
  return {height, width, patch, height / patch, width / patch};
}

PatchGrid patchify(const ImageRGB& img, std::size_t patch) { return patchify(img.height, img.width, patch); }

std::vector<double> flatten_patch(const PatchGrid& grid, const ImageRGB& img, std::size_t j) {
  if (j >= grid.count()) {
    throw DimensionError("patch index " + std::to_string(j) + " out of range (N=" + std::to_string(grid.count()) + ")");
  }
  if (img.height != grid.image_height || img.width != grid.image_width) {
    throw GeometryError("image extents differ from the patch grid");
  }
  std::vector<double> out;
  out.reserve(grid.flat_size());
  const std::size_t y0 = grid.top(j), x0 = grid.left(j);
  for (std::size_t y = y0; y < y0 + grid.patch; ++y) {
    const double* row = img.values.data() + (y * img.width + x0) * 3;
    out.insert(out.end(), row, row + grid.patch * 3);
  }
  return out;
}

Tensor patch_matrix(const PatchGrid& grid, const ImageRGB& img) {
  Tensor m({grid.count(), grid.flat_size()});
  for (std::size_t j = 0; j < grid.count(); ++j) {
    auto flat = flatten_patch(grid, img, j);
    std::copy(flat.begin(), flat.end(), m.row(j).begin());
  }
  return m;
}

ImageRGB reassemble(const PatchGrid& grid, const Tensor& patches) {
  if (patches.rows() != grid.count() || patches.cols() != grid.flat_size()) {
    throw DimensionError("reassemble: patch matrix " + patches.shape_string() + " does not fit the grid");
  }
  ImageRGB img(grid.image_height, grid.image_width);
  for (std::size_t j = 0; j < grid.count(); ++j) {
    auto row = patches.row(j);
    const std::size_t y0 = grid.top(j), x0 = grid.left(j);
    for (std::size_t dy = 0; dy < grid.patch; ++dy) {
      std::copy_n(row.begin() + long(dy * grid.patch * 3), grid.patch * 3,
                  img.values.begin() + long(((y0 + dy) * img.width + x0) * 3));
    }
  }
  return img;
}

Var patch_embed(Tape& tape, Var patches, Parameter& embedding) {
  if (patches.cols() != embedding.value().rows()) {
    throw DimensionError("patch_embed: patch width " + std::to_string(patches.cols()) + " vs embedding " +
                         embedding.value().shape_string());
  }
  return matmul(patches, tape.param(embedding));
}

std::vector<double> patch_embed(std::span<const double> x, const Tensor& embedding) {
  if (x.size() != embedding.rows()) {
    throw DimensionError("patch_embed: patch width " + std::to_string(x.size()) + " vs embedding " +
                         embedding.shape_string());
  }
  Tensor row({1, x.size()}, x);
  Tensor z = matmul(row, embedding);
  return {z.data().begin(), z.data().end()};
}

namespace {

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

ImageLab rgb_to_lab(const ImageRGB& img) {
  // sRGB primaries, D65 reference white.
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  ImageLab lab{img.height, img.width, std::vector<double>(img.values.size())};
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const double r = srgb_to_linear(img.values[3 * p]);
    const double g = srgb_to_linear(img.values[3 * p + 1]);
    const double b = srgb_to_linear(img.values[3 * p + 2]);
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = lab_f(x / xn), fy = lab_f(y / yn), fz = lab_f(z / zn);
    lab.values[3 * p] = 116.0 * fy - 16.0;
    lab.values[3 * p + 1] = 500.0 * (fx - fy);
    lab.values[3 * p + 2] = 200.0 * (fy - fz);
  }
  return lab;
}

ImageRGB resize_nearest(const ImageRGB& img, std::size_t height, std::size_t width) {
  ImageRGB out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(img.height - 1, (y * img.height) / height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(img.width - 1, (x * img.width) / width);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

ImageRGB fit_to_canvas(const ImageRGB& img, std::size_t height, std::size_t width) {
  if (img.height == height && img.width == width) return img;
  const double s = std::min(double(height) / double(img.height), double(width) / double(img.width));
  const auto h = std::max<std::size_t>(1, std::min(height, std::size_t(std::floor(double(img.height) * s))));
  const auto w = std::max<std::size_t>(1, std::min(width, std::size_t(std::floor(double(img.width) * s))));
  ImageRGB scaled = resize_nearest(img, h, w);
  ImageRGB out(height, width);
  const std::size_t oy = (height - h) / 2, ox = (width - w) / 2;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(oy + y, ox + x, c) = scaled.at(y, x, c);
    }
  }
  return out;
}

}  // namespace fav
