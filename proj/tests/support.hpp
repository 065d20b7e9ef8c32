#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fav/imaging.hpp"
#include "fav/slic.hpp"
#include "fav/sppp.hpp"
#include "fav/tensor.hpp"

namespace fav::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline ImageRGB random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRGB img(h, w);
  for (auto& v : img.values) v = u(rng);
  return img;
}

/// Image made of nx x ny flat rectangles with distinct colors.
inline ImageRGB block_image(std::size_t h, std::size_t w, std::size_t nx, std::size_t ny) {
  ImageRGB img(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t bx = x * nx / w, by = y * ny / h;
      const std::size_t k = by * nx + bx;
      img.at(y, x, 0) = double((k * 37) % 97) / 96.0;
      img.at(y, x, 1) = double((k * 53 + 11) % 89) / 88.0;
      img.at(y, x, 2) = double((k * 71 + 29) % 83) / 82.0;
    }
  }
  return img;
}

/// c[i][j] = sum_p a[i][p] b[p][j], written as the plain triple loop.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  }
  return c;
}

/// Label field of `regions` axis-aligned blobs plus random speckle, so
/// patches straddle several labels.
inline SuperpixelMap random_label_map(std::size_t h, std::size_t w, std::size_t regions, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::int32_t> labels(h * w);
  std::vector<std::pair<double, double>> seeds(regions);
  for (auto& [y, x] : seeds) y = double(rng() % h), x = double(rng() % w);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const double y = double(p / w), x = double(p % w);
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t r = 0; r < regions; ++r) {
      const double d = (y - seeds[r].first) * (y - seeds[r].first) + (x - seeds[r].second) * (x - seeds[r].second);
      if (d < bd) bd = d, best = r;
    }
    labels[p] = std::int32_t(rng() % 8 == 0 ? rng() % regions : best);
  }
  return make_superpixel_map(h, w, std::move(labels));
}

/// counts[i][j] by visiting every pixel and asking which patch holds it.
inline std::vector<std::uint32_t> brute_force_overlap(const SuperpixelMap& map, std::size_t patch) {
  const std::size_t cols = map.width / patch;
  const std::size_t n = (map.height / patch) * cols;
  std::vector<std::uint32_t> counts(map.regions * n, 0);
  for (std::size_t y = 0; y < map.height; ++y) {
    for (std::size_t x = 0; x < map.width; ++x) {
      const std::size_t j = (y / patch) * cols + x / patch;
      ++counts[std::size_t(map.labels[y * map.width + x]) * n + j];
    }
  }
  return counts;
}

/// Pools m noisy copies s + n_j (n_j ~ N(0, sigma^2)) into one token per
/// trial and returns Var(Q - s) / (sigma^2 / m) over all trials and coordinates.
inline double pooled_noise_ratio(std::size_t m, std::size_t trials, double sigma, std::uint64_t seed) {
  const std::size_t dim = 4;
  OverlapMatrix overlap;
  overlap.regions = 1;
  overlap.patches = m;
  overlap.patch_area = 1;
  overlap.counts.assign(m, 1);
  const PatchAssignment group = assign_patches_majority(overlap);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const std::vector<double> signal{0.3, -1.2, 2.0, 0.0};
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Tensor e({m, dim});
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t d = 0; d < dim; ++d) e(j, d) = signal[d] + noise(rng);
    Tape tape(false);
    const TokenSequence q = pool_tokens(tape, tape.constant(std::move(e)), group, overlap, PoolingMode::mean);
    for (std::size_t d = 0; d < dim; ++d) {
      const double r = q.tokens.value()(0, d) - signal[d];
      sum += r;
      sum_sq += r * r;
    }
  }
  const double n = double(trials * dim);
  const double var = (sum_sq - sum * sum / n) / (n - 1.0);
  return var / (sigma * sigma / double(m));
}

}  // namespace fav::testing
