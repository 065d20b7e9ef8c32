// Times the serial reference kernels against the OpenMP builds and checks
// that both produce identical output.
//
//   bench_kernels [--threads N] [--repeats R]

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fav/imaging.hpp"
#include "fav/kernels.hpp"
#include "fav/slic.hpp"
#include "fav/sppp.hpp"

namespace {

double median_seconds(std::size_t repeats, const std::function<void()>& fn) {
  fn();
  std::vector<double> t;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

void row(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s %12.3f %12.3f %8.2fx  %s\n", name, serial * 1e3, parallel * 1e3, serial / parallel,
              same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel timings"};
  int threads = fav::kernels::max_threads();
  std::size_t repeats = 5;
  app.add_option("--threads", threads, "OpenMP threads");
  app.add_option("--repeats", repeats, "timed repetitions (median reported)");
  CLI11_PARSE(app, argc, argv);
  fav::kernels::set_threads(threads);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  bool all_same = true;

  std::printf("threads=%d repeats=%zu\n", fav::kernels::max_threads(), repeats);
  std::printf("%-22s %12s %12s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  {
    const std::size_t m = 256, k = 256, n = 256;
    std::vector<double> a(m * k), b(k * n), c1(m * n), c2(m * n);
    for (auto& v : a) v = u(rng);
    for (auto& v : b) v = u(rng);
    const double ts = median_seconds(repeats, [&] { fav::kernels::serial::matmul(m, k, n, a, b, c1, false); });
    const double tp = median_seconds(repeats, [&] { fav::kernels::omp::matmul(m, k, n, a, b, c2, false); });
    const bool same = c1 == c2;
    all_same = all_same && same;
    row("matmul 256^3", ts, tp, same);

    const double ts2 = median_seconds(repeats, [&] { fav::kernels::serial::matmul_bt(m, k, n, a, b, c1, false); });
    const double tp2 = median_seconds(repeats, [&] { fav::kernels::omp::matmul_bt(m, k, n, a, b, c2, false); });
    const bool same2 = c1 == c2;
    all_same = all_same && same2;
    row("matmul_bt 256^3", ts2, tp2, same2);
  }

  {
    fav::ImageRGB img(224, 224);
    for (auto& v : img.values) v = 0.5 + 0.5 * u(rng);
    const fav::ImageLab lab = fav::rgb_to_lab(img);
    fav::SlicConfig cfg;
    cfg.superpixels = 64;
    cfg.backend = fav::Backend::serial;
    fav::SuperpixelMap s1, s2;
    const double ts = median_seconds(repeats, [&] { s1 = fav::slic_segment(lab, cfg); });
    cfg.backend = fav::Backend::openmp;
    const double tp = median_seconds(repeats, [&] { s2 = fav::slic_segment(lab, cfg); });
    const bool same = s1.labels == s2.labels;
    all_same = all_same && same;
    row("slic 224x224 K=64", ts, tp, same);

    const fav::PatchGrid grid = fav::patchify(img, 4);
    fav::OverlapMatrix o1, o2;
    const double to1 = median_seconds(repeats, [&] { o1 = fav::compute_overlap(s1, grid, fav::Backend::serial); });
    const double to2 = median_seconds(repeats, [&] { o2 = fav::compute_overlap(s1, grid, fav::Backend::openmp); });
    const bool same2 = o1.counts == o2.counts;
    all_same = all_same && same2;
    row("overlap 224x224 P=4", to1, to2, same2);
  }
  return all_same ? 0 : 1;
}
