#include "fav/lla.hpp"

#include <cmath>

#include "fav/error.hpp"

namespace fav {

void LlaConfig::validate() const {
  if (heads == 0 || model_dim == 0 || model_dim % heads != 0) {
    throw ConfigError("LLA: head count " + std::to_string(heads) + " must divide model dim " +
                      std::to_string(model_dim));
  }
  if (latents < 1 || latents >= max_sequence) {
    throw ConfigError("LLA: need 1 <= L < X, got L=" + std::to_string(latents) +
                      " X=" + std::to_string(max_sequence));
  }
}

LatentCompressor make_compressor(Initializer& init, ParameterStore& store, const std::string& name, std::size_t rows,
                                 std::size_t max_sequence, std::size_t dim, LatentMode mode) {
  LatentCompressor c;
  c.mode = mode;
  c.rows = rows;
  c.max_sequence = max_sequence;
  if (mode == LatentMode::token_mixing) {
    // Positive weights keep every row sum away from zero.
    c.mixing = &store.add(name + ".mixing", init.uniform({rows, max_sequence}, 0.5, 1.5));
  } else {
    c.latents = &store.add(name + ".latents", init.uniform({rows, dim}, -0.02, 0.02));
  }
  return c;
}

Var compress_queries(Tape& tape, Var h, const LatentCompressor& compressor) {
  if (compressor.mode == LatentMode::free_latents) {
    if (compressor.latents->value().cols() != h.cols()) {
      throw DimensionError("compress_queries: latent width " + std::to_string(compressor.latents->value().cols()) +
                           " vs token width " + std::to_string(h.cols()));
    }
    return tape.param(*compressor.latents);
  }
  const std::size_t x = h.rows();
  if (x > compressor.max_sequence) {
    throw DimensionError("compress_queries: sequence length " + std::to_string(x) + " exceeds the configured maximum " +
                         std::to_string(compressor.max_sequence));
  }
  Var m = slice_cols(tape.param(*compressor.mixing), 0, x);
  return matmul(row_normalize(m), h);
}

AttentionProjections make_attention(Initializer& init, ParameterStore& store, const std::string& name,
                                    std::size_t dim, std::size_t heads) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention: " + std::to_string(heads) + " heads do not divide dim " + std::to_string(dim));
  }
  AttentionProjections p;
  p.query = init.linear(store, name + ".q", dim, dim);
  p.key = init.linear(store, name + ".k", dim, dim, false);
  p.value = init.linear(store, name + ".v", dim, dim);
  p.output = init.linear(store, name + ".o", dim, dim);
  p.heads = heads;
  return p;
}

AttentionResult multi_head_attention(Tape& tape, Var queries, Var context, const AttentionProjections& proj) {
  const std::size_t dim = proj.query.out_features();
  if (queries.cols() != proj.query.in_features() || context.cols() != proj.key.in_features()) {
    throw DimensionError("attention: inputs " + queries.value().shape_string() + " / " +
                         context.value().shape_string() + " vs projection width " + std::to_string(dim));
  }
  const std::size_t d = dim / proj.heads;
  const double scale_factor = 1.0 / std::sqrt(double(d));

  AttentionResult r;
  Var q = linear(tape, queries, proj.query);
  Var k = linear(tape, context, proj.key);
  Var v = linear(tape, context, proj.value);
  for (std::size_t h = 0; h < proj.heads; ++h) {
    Var qh = slice_cols(q, h * d, (h + 1) * d);
    Var kh = slice_cols(k, h * d, (h + 1) * d);
    Var vh = slice_cols(v, h * d, (h + 1) * d);
    Var a = softmax_rows(scaled_scores(qh, kh, scale_factor));
    r.q_heads.push_back(qh);
    r.k_heads.push_back(kh);
    r.v_heads.push_back(vh);
    r.weights.push_back(a);
    r.head_outputs.push_back(matmul(a, vh));
  }
  r.concatenated = proj.heads == 1 ? r.head_outputs.front() : concat_cols(r.head_outputs);
  r.output = linear(tape, r.concatenated, proj.output);
  return r;
}

LlaOutput lla_forward(Tape& tape, Var h, const LlaConfig& cfg, const LayerNormParams& norm,
                      const LatentCompressor& compressor, const AttentionProjections& proj) {
  if (h.cols() != cfg.model_dim) {
    throw DimensionError("lla_forward: token width " + std::to_string(h.cols()) + " vs D=" +
                         std::to_string(cfg.model_dim));
  }
  if (proj.heads != cfg.heads) throw ConfigError("lla_forward: projection head count differs from the config");
  LlaOutput out;
  out.normalized = layer_norm(tape, h, norm);
  out.latent = compress_queries(tape, out.normalized, compressor);
  out.attention = multi_head_attention(tape, out.latent, out.normalized, proj);
  return out;
}

}  // namespace fav
