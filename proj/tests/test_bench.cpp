#include <doctest.h>

#include <string>
#include <vector>

#include "fav/bench.hpp"
#include "fav/datasets.hpp"
#include "fav/error.hpp"
#include "support.hpp"

using namespace fav;

namespace {

ModelConfig single_layer(Variant v, std::size_t h, std::size_t w) {
  ModelConfig c = ModelConfig::desk();
  c.image_height = h;
  c.image_width = w;
  c.layers = 1;
  c.heads = 1;
  c.variant = v;
  return c;
}

BenchOptions counts_only() {
  BenchOptions o;
  o.timing = false;
  return o;
}

}  // namespace

TEST_CASE("baseline with 63 patches, one layer, one head: 64^2 entries") {
  const ModelConfig c = single_layer(Variant::baseline, 28, 36);
  REQUIRE(c.patches() == 63);
  CHECK(count_attention_entries(c) == 4096);
}

TEST_CASE("latent attention over 15 superpixel tokens: 8 x 16 entries") {
  ModelConfig c = single_layer(Variant::sppp_lla, 24, 40);
  c.sppp.slic.superpixels = 15;
  const ImageRGB img = fav::testing::block_image(24, 40, 5, 3);
  const std::vector<ImageRGB> images{img};
  const CostReport r = measure(c, images, counts_only());
  REQUIRE(r.tokens == 15);
  CHECK(r.sequence == 16);
  CHECK(r.score_entries == 128);
  CHECK(count_attention_entries(c, img) == 128);
  CHECK(r.largest_score_rows == 8);
  CHECK(r.largest_score_cols == 16);
}

TEST_CASE("multiply-accumulate closed form") {
  const ModelConfig c = ModelConfig::desk();
  const std::uint64_t P = c.patch, D = c.dim, F = c.ffn, C = c.classes, N = c.patches(), Hpe = c.pe_hidden;
  const std::uint64_t layers = c.layers, L = c.latents;

  ModelConfig base = c;
  base.variant = Variant::baseline;
  const std::uint64_t X = N + 1;
  const std::uint64_t base_layer = 3 * X * D * D + 2 * X * X * D + X * D * D + 2 * X * D * F;
  CHECK(analytic_macs(base, N) == N * 3 * P * P * D + layers * base_layer + D * C);

  ModelConfig fav = c;
  fav.variant = Variant::sppp_lla;
  for (std::uint64_t S : {1u, 7u, 16u}) {
    const std::uint64_t XS = S + 1;
    const std::uint64_t embed = N * 3 * P * P * D + S * N * D + S * 2 * Hpe + S * Hpe * D;
    const std::uint64_t compress = (L - 1) * XS * D;
    const std::uint64_t layer = L * D * D + 2 * XS * D * D + 2 * L * XS * D + L * D * D + 2 * L * D * F;
    CHECK(analytic_macs(fav, S) == embed + compress + layers * layer + D * C);
  }

  // Counted MACs on real forwards equal the closed form for every variant.
  const auto images = synthetic_halves(2, 32, 32, 0.2, 3).images;
  for (Variant v : {Variant::baseline, Variant::sppp, Variant::lla, Variant::sppp_lla}) {
    ModelConfig m = c;
    m.variant = v;
    const CostReport r = measure(m, images, counts_only());
    CHECK(r.macs == analytic_macs(m, r.tokens));
    CHECK(r.score_entries == analytic_score_entries(m, r.tokens));
  }
}

TEST_CASE("score entries grow with S and with L") {
  ModelConfig c = ModelConfig::desk();
  for (Variant v : {Variant::sppp, Variant::sppp_lla}) {
    c.variant = v;
    for (std::size_t s = 1; s < 40; ++s) CHECK(analytic_score_entries(c, s) < analytic_score_entries(c, s + 1));
  }
  c.variant = Variant::sppp_lla;
  for (std::size_t l = 2; l < 16; ++l) {
    ModelConfig a = c, b = c;
    a.latents = l;
    b.latents = l + 1;
    CHECK(analytic_score_entries(a, 16) < analytic_score_entries(b, 16));
  }
}

TEST_CASE("ratio identities") {
  ModelConfig base = ModelConfig::desk(), sppp = base, both = base;
  base.variant = Variant::baseline;
  sppp.variant = Variant::sppp;
  both.variant = Variant::sppp_lla;
  const std::uint64_t N = base.patches();
  for (std::uint64_t S : {3u, 15u, 31u}) {
    CHECK(analytic_score_entries(base, N) * (S + 1) * (S + 1) == analytic_score_entries(sppp, S) * (N + 1) * (N + 1));
    CHECK(analytic_score_entries(base, N) * both.latents * (S + 1) ==
          analytic_score_entries(both, S) * (N + 1) * (N + 1));
  }
  CHECK(reduced_fraction(38416 * 3, 3) == "38416/1");
  CHECK(reduced_fraction(4096, 128) == "32/1");
  CHECK(reduced_fraction(6, 4) == "3/2");
}

TEST_CASE("identical configurations give identical counts") {
  const ModelConfig c = ModelConfig::desk();
  const std::vector<BenchCase> cases{{"a", c}, {"b", c}};
  const auto images = synthetic_halves(2, 32, 32, 0.2, 4).images;
  BenchOptions o;
  o.repeats = 3;
  const auto rows = benchmark_run(cases, images, o);
  REQUIRE(rows.size() == 2);
  CostReport a = rows[0], b = rows[1];
  CHECK(a.seconds_per_image > 0.0);
  a.seconds_per_image = b.seconds_per_image = 0.0;
  a.label = b.label;
  CHECK(a == b);
}

TEST_CASE("records round-trip through text") {
  ModelConfig base = ModelConfig::desk(), fav = base;
  base.variant = Variant::baseline;
  const auto images = synthetic_halves(1, 32, 32, 0.2, 5).images;
  const std::vector<BenchCase> cases{{"baseline", base}, {"sppp+lla", fav}};
  const auto rows = benchmark_run(cases, images, BenchOptions{1, 1, true, 0});
  CHECK(parse_records(format_records(rows)) == rows);
  const std::string table = format_table(rows);
  CHECK(table.find(reduced_fraction(rows[0].score_entries, rows[1].score_entries)) != std::string::npos);
  CHECK_THROWS_AS(parse_record("label=x bogus=1"), DataError);
  CHECK_THROWS_AS(parse_record("label=x"), DataError);
}

TEST_CASE("latent attention never builds a score matrix larger than L x (S+1)") {
  ModelConfig c = ModelConfig::desk();
  c.variant = Variant::sppp_lla;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::vector<ImageRGB> images{fav::testing::random_image(32, 32, seed)};
    const CostReport r = measure(c, images, counts_only());
    CHECK(r.largest_score_rows == c.latents);
    CHECK(r.largest_score_cols == r.tokens + 1);
  }
}
