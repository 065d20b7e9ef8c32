#pragma once

// Reverse-mode differentiation over an operation tape. Every op appends one
// node holding its forward value and a closure that scatters the node's
// adjoint into its inputs; Tape::backward replays the closures in exact
// reverse order of recording.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fav/tensor.hpp"

namespace fav {

/// A learnable tensor and its accumulated gradient.
class Parameter {
 public:
  Parameter(std::string name, Tensor value);

  const std::string& name() const noexcept { return name_; }
  Tensor& value() noexcept { return value_; }
  const Tensor& value() const noexcept { return value_; }
  Tensor& grad() noexcept { return grad_; }
  const Tensor& grad() const noexcept { return grad_; }
  void zero_grad() noexcept { grad_.fill(0.0); }

 private:
  std::string name_;
  Tensor value_;
  Tensor grad_;
};

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter* find(std::string_view name) noexcept;
  const Parameter* find(std::string_view name) const noexcept;
  Parameter& at(std::string_view name);

  std::size_t size() const noexcept { return params_.size(); }
  /// Total scalar count over all parameters.
  std::size_t scalar_count() const noexcept;
  void zero_grad() noexcept;

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Instrumentation accumulated while recording ops.
struct Counters {
  std::uint64_t macs = 0;           // multiply-accumulates in matrix products
  std::uint64_t element_ops = 0;    // outputs of elementwise / normalization ops
  std::uint64_t score_entries = 0;  // attention score entries materialized
  std::uint64_t score_matrices = 0;
  std::size_t largest_score_rows = 0;
  std::size_t largest_score_cols = 0;
};

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const noexcept { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives (out_grad, self id) and accumulates into the inputs' grads.
  using BackwardFn = std::function<void(Tape&, const Tensor&, std::size_t)>;
  using Observer = std::function<void(std::size_t, std::string_view)>;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to `p`; repeated calls return the same node.
  Var param(Parameter& p);

  Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  /// Seeds d(root)=1 and replays the tape; parameter gradients accumulate.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Adjoint of node `id`, zero-initialized on first access.
  Tensor& grad(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return record_; }

  Counters& counters() noexcept { return counters_; }
  const Counters& counters() const noexcept { return counters_; }

  void set_backward_observer(Observer obs) { observer_ = std::move(obs); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
    std::string_view op;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  Counters counters_;
  Observer observer_;
  bool record_ = true;
};

enum class Activation { identity, relu, gelu, tanh };

// Eager kernels on plain tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
double activate(double x, Activation act) noexcept;
double activate_derivative(double x, Activation act) noexcept;

// Differentiable ops. All operate on the row/column view of the operands.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// x[m x n] + bias broadcast over rows (bias has n entries).
Var add_bias(Var x, Var bias);
Var scale(Var x, double s);
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var activate(Var x, Activation act);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
/// 1 x n column means.
Var mean_rows(Var x);
/// Each row divided by its sum.
Var row_normalize(Var x);
/// (q k^T) * s; one attention score matrix, recorded in the score counters.
Var scaled_scores(Var q, Var k, double s);
/// Mean softmax cross-entropy of logits[m x C] against `labels`.
Var cross_entropy(Var logits, std::span<const int> labels);
Var sum(Var x);

/// Rounds every entry to the nearest 32-bit float (checkpoint storage precision).
void round_to_float(Tensor& t) noexcept;

}  // namespace fav
