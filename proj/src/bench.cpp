#include "fav/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fav/error.hpp"
#include "fav/kernels.hpp"
#include "fav/text.hpp"

namespace fav {

std::size_t attention_sequence(const ModelConfig& cfg, std::size_t tokens) {
  return tokens + (cfg.class_token ? 1 : 0);
}

std::uint64_t analytic_score_entries_per_layer(const ModelConfig& cfg, std::size_t tokens) {
  const std::uint64_t x = attention_sequence(cfg, tokens);
  const std::uint64_t q = uses_lla(cfg.variant) ? cfg.latents : x;
  return cfg.heads * q * x;
}

std::uint64_t analytic_score_entries(const ModelConfig& cfg, std::size_t tokens) {
  return cfg.layers * analytic_score_entries_per_layer(cfg, tokens);
}

std::uint64_t analytic_macs(const ModelConfig& cfg, std::size_t tokens) {
  const std::uint64_t n = cfg.patches(), t = tokens, d = cfg.dim, f = cfg.ffn;
  const std::uint64_t x = attention_sequence(cfg, tokens);
  std::uint64_t macs = n * (3 * cfg.patch * cfg.patch) * d;
  if (uses_sppp(cfg.variant)) {
    macs += t * n * d;                                     // pooling
    macs += t * 2 * cfg.pe_hidden + t * cfg.pe_hidden * d;  // centroid MLP
  }
  if (uses_lla(cfg.variant)) {
    const std::uint64_t l = cfg.latents;
    const std::uint64_t rows = l - (cfg.class_token ? 1 : 0);
    if (cfg.latent_mode == LatentMode::token_mixing) macs += rows * x * d;
    macs += cfg.layers * (l * d * d + 2 * x * d * d + 2 * l * x * d + l * d * d + 2 * l * d * f);
  } else {
    macs += cfg.layers * (3 * x * d * d + 2 * x * x * d + x * d * d + 2 * x * d * f);
  }
  return macs + d * cfg.classes;
}

ImageRGB reference_image(const ModelConfig& cfg) { return ImageRGB(cfg.image_height, cfg.image_width, 0.5); }

namespace {

struct Observation {
  ForwardTrace trace;
  Counters counters;
  std::uint64_t peak_bytes = 0;
};

Observation observe(Model& model, const ImageRGB& img) {
  Observation o;
  const std::size_t live = MemoryTracker::live_bytes();
  MemoryTracker::reset_peak();
  {
    PreparedImage input = model.prepare(img);
    Tape tape(false);
    model.logits(tape, input, &o.trace);
    o.counters = tape.counters();
    o.peak_bytes = MemoryTracker::peak_bytes() - live;
  }
  return o;
}

void cross_check(const ModelConfig& cfg, const Observation& o) {
  const std::size_t t = o.trace.tokens;
  const std::uint64_t per_layer = analytic_score_entries_per_layer(cfg, t);
  for (std::size_t layer = 0; layer < o.trace.score_entries_per_layer.size(); ++layer) {
    if (o.trace.score_entries_per_layer[layer] != per_layer) {
      throw AccountingError("layer " + std::to_string(layer) + ": counted " +
                            std::to_string(o.trace.score_entries_per_layer[layer]) + " score entries, closed form " +
                            std::to_string(per_layer));
    }
  }
  if (o.counters.score_entries != analytic_score_entries(cfg, t)) {
    throw AccountingError("counted " + std::to_string(o.counters.score_entries) + " score entries, closed form " +
                          std::to_string(analytic_score_entries(cfg, t)));
  }
  if (o.counters.macs != analytic_macs(cfg, t)) {
    throw AccountingError("counted " + std::to_string(o.counters.macs) + " MACs, closed form " +
                          std::to_string(analytic_macs(cfg, t)) + " (" + std::string(to_string(cfg.variant)) +
                          ", tokens=" + std::to_string(t) + ")");
  }
}

}  // namespace

std::uint64_t count_attention_entries(const ModelConfig& cfg, const ImageRGB& img, std::uint64_t seed) {
  Model model(cfg, seed);
  const Observation o = observe(model, img);
  cross_check(cfg, o);
  return o.counters.score_entries;
}

std::uint64_t count_attention_entries(const ModelConfig& cfg) {
  return count_attention_entries(cfg, reference_image(cfg));
}

CostReport measure(const ModelConfig& cfg, std::span<const ImageRGB> images, const BenchOptions& options,
                   std::string label) {
  if (images.empty()) throw DataError("benchmark needs at least one image");
  Model model(cfg, options.seed);
  CostReport r;
  r.label = label.empty() ? std::string(to_string(cfg.variant)) : std::move(label);
  r.variant = cfg.variant;
  r.patches = cfg.patches();
  r.latents = uses_lla(cfg.variant) ? cfg.latents : 0;
  r.layers = cfg.layers;
  r.heads = cfg.heads;

  for (std::size_t i = 0; i < images.size(); ++i) {
    const Observation o = observe(model, images[i]);
    cross_check(cfg, o);
    r.peak_bytes = std::max<std::uint64_t>(r.peak_bytes, o.peak_bytes);
    if (i == 0) {
      r.tokens = o.trace.tokens;
      r.sequence = o.trace.sequence;
      r.score_entries_per_layer = analytic_score_entries_per_layer(cfg, r.tokens);
      r.score_entries = o.counters.score_entries;
      r.largest_score_rows = o.counters.largest_score_rows;
      r.largest_score_cols = o.counters.largest_score_cols;
      r.macs = o.counters.macs;
      r.element_ops = o.counters.element_ops;
    }
  }

  if (options.timing) {
    const int threads = kernels::max_threads();
    kernels::set_threads(1);
    auto run_all = [&] {
      for (const auto& img : images) {
        PreparedImage input = model.prepare(img);
        Tape tape(false);
        model.logits(tape, input);
      }
    };
    for (std::size_t w = 0; w < options.warmup; ++w) run_all();
    std::vector<double> samples;
    for (std::size_t k = 0; k < std::max<std::size_t>(options.repeats, 1); ++k) {
      const auto start = std::chrono::steady_clock::now();
      run_all();
      samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() /
                        double(images.size()));
    }
    kernels::set_threads(threads);
    std::sort(samples.begin(), samples.end());
    const std::size_t m = samples.size();
    r.seconds_per_image = m % 2 ? samples[m / 2] : 0.5 * (samples[m / 2 - 1] + samples[m / 2]);
  }
  return r;
}

std::vector<CostReport> benchmark_run(std::span<const BenchCase> cases, std::span<const ImageRGB> images,
                                      const BenchOptions& options) {
  std::vector<CostReport> out;
  for (const auto& c : cases) out.push_back(measure(c.config, images, options, c.label));
  return out;
}

std::string reduced_fraction(std::uint64_t a, std::uint64_t b) {
  if (b == 0) return "inf";
  const std::uint64_t g = std::gcd(a, b);
  return std::to_string(a / (g ? g : 1)) + "/" + std::to_string(b / (g ? g : 1));
}

std::string format_table(std::span<const CostReport> rows) {
  const std::vector<std::string> header{"label", "variant", "N",    "S",          "L",          "X",
                                        "layers", "heads",  "scores/layer", "scores", "macs", "peak_bytes",
                                        "ms/image", "score_ratio"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::ostringstream ms;
    ms << std::fixed << std::setprecision(3) << r.seconds_per_image * 1e3;
    cells.push_back({r.label, std::string(to_string(r.variant)), std::to_string(r.patches), std::to_string(r.tokens),
                     std::to_string(r.latents), std::to_string(r.sequence), std::to_string(r.layers),
                     std::to_string(r.heads), std::to_string(r.score_entries_per_layer),
                     std::to_string(r.score_entries), std::to_string(r.macs), std::to_string(r.peak_bytes), ms.str(),
                     reduced_fraction(rows.front().score_entries, r.score_entries)});
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      if (c < 2) {
        os << std::left << std::setw(int(width[c])) << row[c];
      } else {
        os << std::right << std::setw(int(width[c])) << row[c];
      }
    }
    os << '\n';
  };
  emit(header);
  for (const auto& row : cells) emit(row);
  return os.str();
}

std::string format_record(const CostReport& r) {
  std::ostringstream os;
  os << "label=" << r.label << " variant=" << to_string(r.variant) << " patches=" << r.patches
     << " tokens=" << r.tokens << " latents=" << r.latents << " sequence=" << r.sequence << " layers=" << r.layers
     << " heads=" << r.heads << " score_entries_per_layer=" << r.score_entries_per_layer
     << " score_entries=" << r.score_entries << " largest_score_rows=" << r.largest_score_rows
     << " largest_score_cols=" << r.largest_score_cols << " macs=" << r.macs << " element_ops=" << r.element_ops
     << " peak_bytes=" << r.peak_bytes << " seconds_per_image=" << format_double(r.seconds_per_image);
  return os.str();
}

std::string format_records(std::span<const CostReport> rows) {
  std::string out;
  for (const auto& r : rows) out += format_record(r) + '\n';
  return out;
}

CostReport parse_record(std::string_view line) {
  CostReport r;
  std::vector<std::string> seen;
  for (const auto& field : split(trim(line), ' ')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw DataError("report field without '=': " + field);
    const std::string key = field.substr(0, eq);
    const std::string_view value = std::string_view(field).substr(eq + 1);
    auto u = [&](auto& dst) { dst = static_cast<std::remove_reference_t<decltype(dst)>>(parse_u64(value, key)); };
    if (key == "label") r.label = std::string(value);
    else if (key == "variant") r.variant = parse_variant(value);
    else if (key == "patches") u(r.patches);
    else if (key == "tokens") u(r.tokens);
    else if (key == "latents") u(r.latents);
    else if (key == "sequence") u(r.sequence);
    else if (key == "layers") u(r.layers);
    else if (key == "heads") u(r.heads);
    else if (key == "score_entries_per_layer") u(r.score_entries_per_layer);
    else if (key == "score_entries") u(r.score_entries);
    else if (key == "largest_score_rows") u(r.largest_score_rows);
    else if (key == "largest_score_cols") u(r.largest_score_cols);
    else if (key == "macs") u(r.macs);
    else if (key == "element_ops") u(r.element_ops);
    else if (key == "peak_bytes") u(r.peak_bytes);
    else if (key == "seconds_per_image") r.seconds_per_image = parse_double(value, key);
    else throw DataError("unknown report key '" + key + "'");
    seen.push_back(key);
  }
  if (seen.size() != 16) throw DataError("report line has " + std::to_string(seen.size()) + " of 16 fields");
  return r;
}

std::vector<CostReport> parse_records(std::string_view text) {
  std::vector<CostReport> out;
  for (const auto& line : split(text, '\n')) {
    if (!trim(line).empty()) out.push_back(parse_record(line));
  }
  return out;
}

}  // namespace fav
