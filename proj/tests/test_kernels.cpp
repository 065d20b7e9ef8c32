#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

#include "fav/imaging.hpp"
#include "fav/kernels.hpp"
#include "fav/slic.hpp"
#include "support.hpp"

using namespace fav;
namespace k = fav::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  const Tensor t = fav::testing::random_tensor({n}, seed);
  return {t.data().begin(), t.data().end()};
}

}  // namespace

TEST_CASE("serial and OpenMP matrix products are bit-identical") {
  for (const auto [m, kk, n] : {std::array<std::size_t, 3>{1, 1, 1}, {7, 13, 5}, {64, 48, 33}, {3, 200, 2}}) {
    const auto a = random_values(m * kk, m + kk), b = random_values(kk * n, n + 3);
    const auto bt = random_values(n * kk, n + 5), at = random_values(kk * m, m + 9);
    for (bool acc : {false, true}) {
      std::vector<double> c1 = random_values(m * n, 1), c2 = c1;
      k::serial::matmul(m, kk, n, a, b, c1, acc);
      k::omp::matmul(m, kk, n, a, b, c2, acc);
      CHECK(c1 == c2);
      k::serial::matmul_bt(m, kk, n, a, bt, c1, acc);
      k::omp::matmul_bt(m, kk, n, a, bt, c2, acc);
      CHECK(c1 == c2);
      k::serial::matmul_at(m, kk, n, at, b, c1, acc);
      k::omp::matmul_at(m, kk, n, at, b, c2, acc);
      CHECK(c1 == c2);
    }
  }
}

TEST_CASE("matmul kernel matches the triple loop") {
  const Tensor a = fav::testing::random_tensor({6, 4}, 21), b = fav::testing::random_tensor({4, 5}, 22);
  std::vector<double> c(30);
  k::omp::matmul(6, 4, 5, a.data(), b.data(), c, false);
  const Tensor ref = fav::testing::naive_matmul(a, b);
  for (std::size_t i = 0; i < 30; ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("serial and OpenMP SLIC sweeps produce identical segmentations") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ImageLab lab = rgb_to_lab(fav::testing::random_image(40, 48, seed));
    for (std::size_t kk : {2u, 9u, 30u}) {
      SlicConfig cfg;
      cfg.superpixels = kk;
      cfg.distance = seed % 2 ? SlicDistance::compactness : SlicDistance::normalized;
      cfg.backend = Backend::serial;
      const SuperpixelMap a = slic_segment(lab, cfg);
      cfg.backend = Backend::openmp;
      const SuperpixelMap b = slic_segment(lab, cfg);
      CHECK(a.labels == b.labels);
      CHECK(a.changed_per_iteration == b.changed_per_iteration);
    }
  }
}

TEST_CASE("serial and OpenMP overlap counts are identical") {
  std::mt19937_64 rng(5);
  std::vector<std::int32_t> labels(24 * 32);
  for (auto& l : labels) l = std::int32_t(rng() % 7);
  const std::size_t patches = (24 / 4) * (32 / 4);
  std::vector<std::uint32_t> a(7 * patches), b(7 * patches);
  k::serial::overlap_counts(labels, 24, 32, 4, 7, a);
  k::omp::overlap_counts(labels, 24, 32, 4, 7, b);
  CHECK(a == b);
}

TEST_CASE("thread count can be set") {
  const int before = k::max_threads();
  k::set_threads(1);
  CHECK(k::max_threads() == 1);
  k::set_threads(before);
  CHECK(k::max_threads() >= 1);
}
