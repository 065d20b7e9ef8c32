#pragma once

// Cost accounting: closed-form score-entry and multiply-accumulate counts,
// cross-checked against the tape counters of a real forward pass, plus
// peak tracked tensor bytes and median wall-clock time per image.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fav/imaging.hpp"
#include "fav/model.hpp"

namespace fav {

struct CostReport {
  std::string label;
  Variant variant = Variant::baseline;
  std::size_t patches = 0;   // N
  std::size_t tokens = 0;    // S (N for grid variants)
  std::size_t latents = 0;   // L, 0 without latent attention
  std::size_t sequence = 0;  // X
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::uint64_t score_entries_per_layer = 0;  // all heads
  std::uint64_t score_entries = 0;            // all layers
  std::size_t largest_score_rows = 0;
  std::size_t largest_score_cols = 0;
  std::uint64_t macs = 0;
  std::uint64_t element_ops = 0;
  std::uint64_t peak_bytes = 0;
  double seconds_per_image = 0.0;

  bool operator==(const CostReport&) const = default;
};

/// Sequence length seen by attention for `tokens` input tokens.
std::size_t attention_sequence(const ModelConfig& cfg, std::size_t tokens);
/// Score entries of one layer summed over heads: H X^2, or H L X with latents.
std::uint64_t analytic_score_entries_per_layer(const ModelConfig& cfg, std::size_t tokens);
std::uint64_t analytic_score_entries(const ModelConfig& cfg, std::size_t tokens);
/// Multiply-accumulates of one forward pass over every matrix product.
std::uint64_t analytic_macs(const ModelConfig& cfg, std::size_t tokens);

/// Uniform mid-gray image of the configured extents.
ImageRGB reference_image(const ModelConfig& cfg);

/// Runs one forward and returns the score-entry count after checking it
/// against the closed form; throws AccountingError on any disagreement.
std::uint64_t count_attention_entries(const ModelConfig& cfg, const ImageRGB& img, std::uint64_t seed = 0);
std::uint64_t count_attention_entries(const ModelConfig& cfg);

struct BenchOptions {
  std::size_t warmup = 1;
  std::size_t repeats = 5;
  bool timing = true;
  std::uint64_t seed = 0;
};

/// Counts come from the first image; every image is cross-checked.
CostReport measure(const ModelConfig& cfg, std::span<const ImageRGB> images, const BenchOptions& options = {},
                   std::string label = {});

struct BenchCase {
  std::string label;
  ModelConfig config;
};

std::vector<CostReport> benchmark_run(std::span<const BenchCase> cases, std::span<const ImageRGB> images,
                                      const BenchOptions& options = {});

/// Aligned table; the last column is each row's score entries relative to the first row as a reduced fraction.
std::string format_table(std::span<const CostReport> rows);
/// One `key=value ...` line per row, fixed key order.
std::string format_record(const CostReport& r);
std::string format_records(std::span<const CostReport> rows);
CostReport parse_record(std::string_view line);
std::vector<CostReport> parse_records(std::string_view text);

/// a/b reduced, e.g. "38416/1".
std::string reduced_fraction(std::uint64_t a, std::uint64_t b);

}  // namespace fav
