#include "fav/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <limits>
#include <vector>

namespace fav::kernels {

namespace {
// Below this many multiply-accumulates the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1u << 15;
}  // namespace

namespace serial {

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void matmul_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void matmul_at(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += a[r * m + i] * b[r * n + j];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

SlicAssignResult slic_assign(std::span<const double> lab, std::span<const LabCenter> centers,
                             const SlicAssignParams& params, std::span<std::int32_t> labels) {
  const std::size_t h = params.height;
  const std::size_t w = params.width;
  std::vector<double> best(h * w, std::numeric_limits<double>::infinity());
  double max_dc2 = 0.0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const LabCenter& c = centers[k];
    const auto y0 = static_cast<long>(std::max(0.0, std::ceil(c.y - params.window)));
    const auto y1 = static_cast<long>(std::min(double(h - 1), std::floor(c.y + params.window)));
    const auto x0 = static_cast<long>(std::max(0.0, std::ceil(c.x - params.window)));
    const auto x1 = static_cast<long>(std::min(double(w - 1), std::floor(c.x + params.window)));
    for (long y = y0; y <= y1; ++y) {
      for (long x = x0; x <= x1; ++x) {
        if (!in_window(double(x), double(y), c, params.window)) continue;
        const std::size_t p = std::size_t(y) * w + std::size_t(x);
        const double dl = lab[3 * p] - c.l;
        const double da = lab[3 * p + 1] - c.a;
        const double db = lab[3 * p + 2] - c.b;
        const double dc2 = dl * dl + da * da + db * db;
        const double dx = double(x) - c.x;
        const double dy = double(y) - c.y;
        const double d = slic_distance_sq(dc2, dx * dx + dy * dy, params);
        if (dc2 > max_dc2) max_dc2 = dc2;
        if (d < best[p]) {
          best[p] = d;
          labels[p] = static_cast<std::int32_t>(k);
        }
      }
    }
  }
  SlicAssignResult result;
  result.max_color_distance = std::sqrt(max_dc2);
  for (double d : best) result.uncovered += std::isinf(d) ? 1 : 0;
  return result;
}

void overlap_counts(std::span<const std::int32_t> labels, std::size_t height, std::size_t width,
                    std::size_t patch, std::size_t regions, std::span<std::uint32_t> counts) {
  const std::size_t cols = width / patch;
  const std::size_t patches = (height / patch) * cols;
  std::fill(counts.begin(), counts.end(), 0u);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t j = (y / patch) * cols + x / patch;
      const auto i = static_cast<std::size_t>(labels[y * width + x]);
      if (i < regions) ++counts[i * patches + j];
    }
  }
}

}  // namespace serial

namespace omp {

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> c, bool accumulate) {
  const bool par = m * k * n >= kParallelWork && m > 1;
#pragma omp parallel if (par)
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < std::ptrdiff_t(m); ++ii) {
      const auto i = std::size_t(ii);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = a[i * k + p];
        const double* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
      }
      double* crow = c.data() + i * n;
      if (accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
      }
    }
  }
}

void matmul_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate) {
  const bool par = m * k * n >= kParallelWork && m > 1;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t ii = 0; ii < std::ptrdiff_t(m); ++ii) {
    const auto i = std::size_t(ii);
    const double* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      c[i * n + j] = accumulate ? c[i * n + j] + s : s;
    }
  }
}

void matmul_at(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate) {
  const bool par = m * k * n >= kParallelWork && m > 1;
#pragma omp parallel if (par)
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < std::ptrdiff_t(m); ++ii) {
      const auto i = std::size_t(ii);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t r = 0; r < k; ++r) {
        const double ari = a[r * m + i];
        const double* brow = b.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += ari * brow[j];
      }
      double* crow = c.data() + i * n;
      if (accumulate) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
      }
    }
  }
}

SlicAssignResult slic_assign(std::span<const double> lab, std::span<const LabCenter> centers,
                             const SlicAssignParams& params, std::span<std::int32_t> labels) {
  const std::size_t h = params.height;
  const std::size_t w = params.width;
  double max_dc2 = 0.0;
  std::size_t uncovered = 0;
#pragma omp parallel for schedule(static) reduction(max : max_dc2) reduction(+ : uncovered)
  for (std::ptrdiff_t yy = 0; yy < std::ptrdiff_t(h); ++yy) {
    const auto y = std::size_t(yy);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      double best = std::numeric_limits<double>::infinity();
      std::int32_t best_k = -1;
      for (std::size_t k = 0; k < centers.size(); ++k) {
        const LabCenter& c = centers[k];
        if (!in_window(double(x), double(y), c, params.window)) continue;
        const double dl = lab[3 * p] - c.l;
        const double da = lab[3 * p + 1] - c.a;
        const double db = lab[3 * p + 2] - c.b;
        const double dc2 = dl * dl + da * da + db * db;
        const double dx = double(x) - c.x;
        const double dy = double(y) - c.y;
        const double d = slic_distance_sq(dc2, dx * dx + dy * dy, params);
        if (dc2 > max_dc2) max_dc2 = dc2;
        if (d < best) {
          best = d;
          best_k = static_cast<std::int32_t>(k);
        }
      }
      if (best_k >= 0) {
        labels[p] = best_k;
      } else {
        ++uncovered;
      }
    }
  }
  return {std::sqrt(max_dc2), uncovered};
}

void overlap_counts(std::span<const std::int32_t> labels, std::size_t height, std::size_t width,
                    std::size_t patch, std::size_t regions, std::span<std::uint32_t> counts) {
  const std::size_t cols = width / patch;
  const std::size_t patches = (height / patch) * cols;
  std::fill(counts.begin(), counts.end(), 0u);
  // One patch per iteration owns column j of `counts`, so no two threads write
  // the same entry.
#pragma omp parallel for schedule(static) if (patches >= 64)
  for (std::ptrdiff_t jj = 0; jj < std::ptrdiff_t(patches); ++jj) {
    const auto j = std::size_t(jj);
    const std::size_t y0 = (j / cols) * patch;
    const std::size_t x0 = (j % cols) * patch;
    for (std::size_t y = y0; y < y0 + patch; ++y) {
      for (std::size_t x = x0; x < x0 + patch; ++x) {
        const auto i = static_cast<std::size_t>(labels[y * width + x]);
        if (i < regions) ++counts[i * patches + j];
      }
    }
  }
}

}  // namespace omp

int max_threads() { return omp_get_max_threads(); }
void set_threads(int n) { omp_set_num_threads(n < 1 ? 1 : n); }

}  // namespace fav::kernels
