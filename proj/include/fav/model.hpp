#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fav/autodiff.hpp"
#include "fav/imaging.hpp"
#include "fav/lla.hpp"
#include "fav/nn.hpp"
#include "fav/sppp.hpp"

namespace fav {

enum class Variant { baseline, sppp, lla, sppp_lla };

std::string_view to_string(Variant v) noexcept;
/// Accepts baseline | sppp | lla | sppp+lla.
Variant parse_variant(std::string_view name);
bool uses_sppp(Variant v) noexcept;
bool uses_lla(Variant v) noexcept;

struct ModelConfig {
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t patch = 4;
  std::size_t dim = 768;
  std::size_t layers = 12;
  std::size_t heads = 12;
  std::size_t ffn = 768;
  std::size_t classes = 10;
  std::size_t latents = 8;  // L
  std::size_t pe_hidden = 64;
  Variant variant = Variant::sppp_lla;
  SpppOptions sppp;         // sppp.slic.superpixels is K
  LatentMode latent_mode = LatentMode::token_mixing;
  bool class_token = true;
  double ln_eps = 1e-5;

  /// Architecture of the reference configuration (P=4, D=768, 12 layers, 12 heads, FFN 768).
  static ModelConfig paper();
  /// Reduced configuration for tests and smoke training (D=64, 2 layers, 4 heads).
  static ModelConfig desk();

  std::size_t patches() const noexcept;           // N
  /// Longest token sequence a forward can see: N (+1 with a class token).
  std::size_t max_sequence() const noexcept;
  void validate() const;

  /// Canonical key=value text; equal configs serialize identically.
  std::string serialize() const;
  std::uint64_t digest() const;

  /// Sets one serialized key; false when the key is not a model key.
  bool apply(std::string_view key, std::string_view value);
  /// Parses text produced by serialize(); unknown keys throw ConfigError.
  static ModelConfig parse(std::string_view text);
};

/// Per-image inputs that do not depend on parameters.
struct PreparedImage {
  Tensor patches;                // N x P^2*3
  std::optional<SpppPlan> plan;  // SPPP variants only
};

/// Optional per-forward instrumentation.
struct ForwardTrace {
  std::size_t tokens = 0;    // N (grid variants) or S (SPPP variants)
  std::size_t sequence = 0;  // X, with the class token when enabled
  std::vector<std::uint64_t> score_entries_per_layer;
  std::vector<std::vector<Var>> attention_weights;  // [layer][head]
  std::vector<std::vector<Var>> value_heads;        // [layer][head]
  std::vector<std::vector<Var>> head_outputs;       // [layer][head]
};

struct EncoderBlock {
  LayerNormParams norm1;         // query-side pre-norm
  LayerNormParams norm2;         // FFN pre-norm
  LayerNormParams context_norm;  // latent blocks: normalization of the input tokens
  AttentionProjections attention;
  LinearLayer ffn_in, ffn_out;
  bool latent = false;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  PreparedImage prepare(const ImageRGB& img) const;

  /// Input token sequence X x D fed to the first encoder block.
  Var embed(Tape& tape, const PreparedImage& input, ForwardTrace* trace = nullptr);
  /// 1 x classes.
  Var logits(Tape& tape, const PreparedImage& input, ForwardTrace* trace = nullptr);

  /// Batch inference without gradients: B x classes.
  Tensor forward(std::span<const PreparedImage> batch);
  Tensor forward(std::span<const ImageRGB> images);

  LinearLayer& head() noexcept { return head_; }

 private:
  Var self_attention_stack(Tape& tape, Var x, ForwardTrace* trace);
  Var latent_stack(Tape& tape, Var h, ForwardTrace* trace);
  Var readout(Tape& tape, Var x);

  ModelConfig cfg_;
  ParameterStore params_;
  Parameter* patch_embedding_ = nullptr;
  Parameter* cls_token_ = nullptr;
  Parameter* pos_embedding_ = nullptr;
  Parameter* class_latent_ = nullptr;
  std::vector<LinearLayer> pe_mlp_;
  LatentCompressor compressor_;
  std::vector<EncoderBlock> blocks_;
  LayerNormParams final_norm_;
  LinearLayer head_;
};

/// Closed-form parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& cfg);

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// Decoupled weight decay Adam. Updated parameters are rounded to 32-bit
/// precision, matching the checkpoint storage format.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}
  void step(ParameterStore& params);
  std::uint64_t steps() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  /// First/second moment of parameter `index` (empty before the first step).
  const Tensor& first_moment(std::size_t index) const { return m_.at(index); }
  const Tensor& second_moment(std::size_t index) const { return v_.at(index); }

 private:
  AdamWConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

struct TrainState {
  std::unique_ptr<Model> model;
  AdamW optimizer;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
};

TrainState build_model(const ModelConfig& cfg, std::uint64_t seed, AdamWConfig optimizer = {});

/// Cross-entropy step with an AdamW update; gradients are zeroed afterwards.
/// Throws NumericError (with the offending parameter) on a non-finite loss or gradient.
double train_step(TrainState& state, std::span<const PreparedImage> batch, std::span<const int> labels,
                  std::vector<int>* predictions = nullptr);

std::vector<int> predict(Model& model, std::span<const PreparedImage> images);
double evaluate(Model& model, std::span<const PreparedImage> images, std::span<const int> labels);

struct PreparedSplit {
  std::vector<PreparedImage> images;
  std::vector<int> labels;
};

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  std::size_t max_steps = 0;  // 0: no cap
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double seconds = 0.0;
};

/// Shuffled mini-batch training; the shuffle is driven by state.seed.
std::vector<EpochMetrics> train(TrainState& state, const PreparedSplit& train_split, const PreparedSplit& test_split,
                                const TrainOptions& options,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

void save_checkpoint(const Model& model, const std::filesystem::path& path);
/// Loads parameters saved from a model with the same configuration digest.
void load_checkpoint(Model& model, const std::filesystem::path& path);

}  // namespace fav
