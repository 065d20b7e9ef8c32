#include "fav/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fav/error.hpp"

namespace fav {

Tensor Initializer::xavier(std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  return uniform({fan_in, fan_out}, -a, a);
}

Tensor Initializer::uniform(Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data()) v = dist(rng_);
  round_to_float(t);
  return t;
}

LinearLayer Initializer::linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                                bool with_bias) {
  LinearLayer l;
  l.weight = &store.add(name + ".weight", xavier(in, out));
  if (with_bias) l.bias = &store.add(name + ".bias", Tensor({out}));
  return l;
}

LayerNormParams Initializer::layer_norm(ParameterStore& store, const std::string& name, std::size_t dim) {
  LayerNormParams ln;
  ln.gain = &store.add(name + ".gain", Tensor({dim}, 1.0));
  ln.bias = &store.add(name + ".bias", Tensor({dim}));
  return ln;
}

Var linear(Tape& tape, Var x, const LinearLayer& layer) {
  Var y = matmul(x, tape.param(*layer.weight));
  if (layer.bias) y = add_bias(y, tape.param(*layer.bias));
  return y;
}

Var layer_norm(Tape& tape, Var x, const LayerNormParams& ln) {
  return layer_norm(x, tape.param(*ln.gain), tape.param(*ln.bias), ln.eps);
}

Var mlp_forward(Tape& tape, Var x, std::span<const LinearLayer> layers, Activation act) {
  if (layers.empty()) throw DimensionError("mlp_forward: no layers");
  std::size_t width = x.cols();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_features() != width) {
      throw DimensionError("mlp_forward: layer " + std::to_string(i) + " expects width " +
                           std::to_string(layers[i].in_features()) + ", got " + std::to_string(width));
    }
    width = layers[i].out_features();
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = linear(tape, x, layers[i]);
    if (i + 1 < layers.size()) x = activate(x, act);
  }
  return x;
}

GradCheckResult gradient_check(const LossFn& loss, std::span<Parameter* const> params,
                               const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    Var l = loss(tape);
    check_finite(l.value(), "gradient_check loss");
    tape.backward(l);
  }

  auto evaluate = [&]() {
    Tape tape(false);
    const double v = loss(tape).value()[0];
    if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite loss during perturbation");
    return v;
  };

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  const double h = options.step;
  for (Parameter* p : params) {
    const std::size_t n = p->value().size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_param);
    }
    for (std::size_t i : coords) {
      double& w = p->value()[i];
      const double saved = w;
      w = saved + h;
      const double up = evaluate();
      w = saved - h;
      const double down = evaluate();
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates;
      if (rel > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        result.worst_parameter = p->name();
        result.worst_index = i;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace fav
