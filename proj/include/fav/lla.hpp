#pragma once

// Light latent attention: L latent queries cross-attend to the X input tokens,
// so each head materializes an L x X score matrix instead of X x X.

#include <cstddef>
#include <string>
#include <vector>

#include "fav/autodiff.hpp"
#include "fav/nn.hpp"

namespace fav {

struct LlaConfig {
  std::size_t model_dim = 768;     // D
  std::size_t heads = 12;          // H
  std::size_t latents = 8;         // L
  std::size_t max_sequence = 17;   // largest X the compressor accepts

  std::size_t head_dim() const noexcept { return model_dim / heads; }
  /// H divides D; 1 <= L < max_sequence.
  void validate() const;
};

enum class LatentMode {
  /// c = normalize_rows(M[:, :X]) * h with a learned L x X_max mixing matrix.
  token_mixing,
  /// c = learned L x D latent tokens, independent of the input.
  free_latents,
};

struct LatentCompressor {
  LatentMode mode = LatentMode::token_mixing;
  Parameter* mixing = nullptr;   // rows x max_sequence
  Parameter* latents = nullptr;  // rows x D
  std::size_t rows = 0;
  std::size_t max_sequence = 0;
};

LatentCompressor make_compressor(Initializer& init, ParameterStore& store, const std::string& name, std::size_t rows,
                                 std::size_t max_sequence, std::size_t dim, LatentMode mode);

/// Latent representation c_t^Q (rows x D) from the normalized tokens h (X x D).
Var compress_queries(Tape& tape, Var h, const LatentCompressor& compressor);

struct AttentionProjections {
  LinearLayer query, key, value, output;
  std::size_t heads = 1;
};

AttentionProjections make_attention(Initializer& init, ParameterStore& store, const std::string& name,
                                    std::size_t dim, std::size_t heads);

struct AttentionResult {
  Var output;                 // Lq x D, after the output projection
  Var concatenated;           // Lq x D, heads side by side
  std::vector<Var> q_heads;   // Lq x d each
  std::vector<Var> k_heads;   // Lk x d each
  std::vector<Var> v_heads;   // Lk x d each
  std::vector<Var> weights;   // Lq x Lk each, rows sum to 1
  std::vector<Var> head_outputs;  // Lq x d each
};

/// softmax(Q K^T / sqrt(d)) V per head with Q from `queries`, K and V from
/// `context`, heads concatenated and projected.
AttentionResult multi_head_attention(Tape& tape, Var queries, Var context, const AttentionProjections& proj);

struct LlaOutput {
  Var normalized;   // layer-normalized input tokens
  Var latent;       // c_t^Q
  AttentionResult attention;
};

/// Normalize the tokens, compress them into latent queries and cross-attend.
LlaOutput lla_forward(Tape& tape, Var h, const LlaConfig& cfg, const LayerNormParams& norm,
                      const LatentCompressor& compressor, const AttentionProjections& proj);

}  // namespace fav
