#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fav/autodiff.hpp"

namespace fav {

/// Affine map y = x W + b. `bias` may be null.
struct LinearLayer {
  Parameter* weight = nullptr;  // in x out
  Parameter* bias = nullptr;    // out

  std::size_t in_features() const { return weight->value().rows(); }
  std::size_t out_features() const { return weight->value().cols(); }
};

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
  double eps = 1e-5;
};

/// Deterministic initializer: scaled-uniform weights, zero biases. Values are
/// rounded to 32-bit precision so checkpoints reproduce them exactly.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  /// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  Tensor xavier(std::size_t fan_in, std::size_t fan_out);
  Tensor uniform(Shape shape, double lo, double hi);

  LinearLayer linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                     bool with_bias = true);
  LayerNormParams layer_norm(ParameterStore& store, const std::string& name, std::size_t dim);

  std::mt19937_64& rng() noexcept { return rng_; }

 private:
  std::mt19937_64 rng_;
};

Var linear(Tape& tape, Var x, const LinearLayer& layer);
Var layer_norm(Tape& tape, Var x, const LayerNormParams& ln);

/// Alternating affine + activation; the final layer is affine only.
Var mlp_forward(Tape& tape, Var x, std::span<const LinearLayer> layers, Activation act);

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates sampled per parameter (all when the parameter is smaller).
  std::size_t coords_per_param = 16;
  std::uint64_t seed = 7;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Builds the scalar loss on a fresh tape.
using LossFn = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central differences at sampled
/// coordinates; error per coordinate is |a - c| / max(|a|, |c|, 1e-8).
GradCheckResult gradient_check(const LossFn& loss, std::span<Parameter* const> params,
                               const GradCheckOptions& options = {});

}  // namespace fav
