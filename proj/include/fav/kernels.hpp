#pragma once

// Hot loops in two builds: `serial` is the straightforward reference kept for
// testing, `omp` is the OpenMP-parallel version used by the library. Both
// produce bit-identical results (every output element is reduced in the same
// order); tests/test_kernels.cpp checks this and tools/bench_kernels.cpp
// times them against each other.

#include <cstddef>
#include <cstdint>
#include <span>

namespace fav::kernels {

/// One SLIC cluster center in joint (L*, a*, b*, x, y) space.
struct LabCenter {
  double l = 0.0, a = 0.0, b = 0.0, x = 0.0, y = 0.0;
};

struct SlicAssignParams {
  std::size_t height = 0;
  std::size_t width = 0;
  double spacing = 1.0;        // grid interval S
  double window = 1.0;         // half extent of the square search window
  bool normalized = true;      // true: (d_c/max_c)^2 + (d_s/(alpha S))^2; false: d_c^2 + (d_s/S)^2 m^2
  double alpha = 0.1;
  double compactness = 10.0;   // m
  double max_color = 1.0;      // max_c
};

struct SlicAssignResult {
  double max_color_distance = 0.0;  // largest d_c among evaluated (pixel, center) pairs
  std::size_t uncovered = 0;        // pixels outside every window (label left unchanged)
};

/// Squared SLIC distance. Shared by both builds so comparisons are identical.
inline double slic_distance_sq(double dc2, double ds2, const SlicAssignParams& p) noexcept {
  if (p.normalized) {
    const double s = p.alpha * p.spacing;
    return dc2 / (p.max_color * p.max_color) + ds2 / (s * s);
  }
  return dc2 + ds2 / (p.spacing * p.spacing) * (p.compactness * p.compactness);
}

inline bool in_window(double px, double py, const LabCenter& c, double half) noexcept {
  const double dx = px - c.x;
  const double dy = py - c.y;
  return dx <= half && dx >= -half && dy <= half && dy >= -half;
}

namespace serial {

/// c (+)= a[m x k] * b[k x n]
void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> c, bool accumulate);
/// c (+)= a[m x k] * b[n x k]^T
void matmul_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate);
/// c (+)= a[k x m]^T * b[k x n]
void matmul_at(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate);

/// Center-major assignment sweep: each center scans its window and claims
/// pixels it is strictly closer to (ties keep the lower center index).
SlicAssignResult slic_assign(std::span<const double> lab, std::span<const LabCenter> centers,
                             const SlicAssignParams& params, std::span<std::int32_t> labels);

/// counts[label * patches + patch] = pixels of `patch` carrying `label`.
void overlap_counts(std::span<const std::int32_t> labels, std::size_t height, std::size_t width,
                    std::size_t patch, std::size_t regions, std::span<std::uint32_t> counts);

}  // namespace serial

namespace omp {

void matmul(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
            std::span<double> c, bool accumulate);
void matmul_bt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate);
void matmul_at(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a, std::span<const double> b,
               std::span<double> c, bool accumulate);

/// Pixel-major assignment: each pixel scans candidate centers in index order.
SlicAssignResult slic_assign(std::span<const double> lab, std::span<const LabCenter> centers,
                             const SlicAssignParams& params, std::span<std::int32_t> labels);

void overlap_counts(std::span<const std::int32_t> labels, std::size_t height, std::size_t width,
                    std::size_t patch, std::size_t regions, std::span<std::uint32_t> counts);

}  // namespace omp

/// Threads used by the omp kernels (1 when OpenMP runs single-threaded).
int max_threads();
void set_threads(int n);

}  // namespace fav::kernels
