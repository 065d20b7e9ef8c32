#include "fav/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fav/error.hpp"
#include "fav/kernels.hpp"

namespace fav {

// ---------------------------------------------------------------------------
// Parameter / ParameterStore

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape()) {}

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  return params_.emplace_back(std::move(name), std::move(value));
}

Parameter* ParameterStore::find(std::string_view name) noexcept {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterStore::find(std::string_view name) const noexcept {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter& ParameterStore::at(std::string_view name) {
  if (auto* p = find(name)) return *p;
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value().size();
  return n;
}

void ParameterStore::zero_grad() noexcept {
  for (auto& p : params_) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.value = p.value();
  n.param = &p;
  n.needs_grad = record_;
  n.op = "param";
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  check_finite(value, op);
  Node n;
  n.value = std::move(value);
  n.op = op;
  if (record_) {
    n.needs_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].needs_grad; });
    if (n.needs_grad) {
      n.inputs = std::move(inputs);
      n.backward = std::move(backward);
    }
  }
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(Var root) {
  if (!record_) throw Error("backward on a tape recorded without gradients");
  if (root.value().size() != 1) {
    throw DimensionError("backward needs a scalar root, got " + root.value().shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad(root.id()).fill(1.0);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (observer_) observer_(i, n.op);
    if (n.backward) n.backward(*this, n.grad, i);
    if (n.param) {
      auto dst = n.param->grad().data();
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Eager kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows() || b.rank() != 2) {
    throw DimensionError("matmul: inner extents differ, " + a.shape_string() + " * " + b.shape_string());
  }
  Tensor c({a.rows(), b.cols()});
  kernels::omp::matmul(a.rows(), a.cols(), b.cols(), a.data(), b.data(), c.data(), false);
  return c;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(in[j] - mx);
      s += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= s;
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm: feature width " + std::to_string(d) + " vs gain " + gain.shape_string() +
                         " / bias " + bias.shape_string());
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= double(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= double(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) out[j] = gain[j] * (in[j] - mean) * inv + bias[j];
  }
  return y;
}

double activate(double x, Activation act) noexcept {
  switch (act) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::gelu:
      return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    case Activation::tanh:
      return std::tanh(x);
  }
  return x;
}

double activate_derivative(double x, Activation act) noexcept {
  switch (act) {
    case Activation::identity:
      return 1.0;
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + x * pdf;
    }
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void round_to_float(Tensor& t) noexcept {
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

// ---------------------------------------------------------------------------
// Differentiable ops

namespace {

void require_same_tape(Var a, Var b, std::string_view op) {
  if (&a.tape() != &b.tape()) throw Error(std::string(op) + ": operands live on different tapes");
}

void accumulate(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tape& t = a.tape();
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor c = fav::matmul(av, bv);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  t.counters().macs += std::uint64_t(m) * k * n;
  return t.record("matmul", std::move(c), {a.id(), b.id()},
                  [ia = a.id(), ib = b.id(), m, k, n](Tape& tp, const Tensor& g, std::size_t) {
                    if (tp.needs_grad(ia)) {
                      kernels::omp::matmul_bt(m, n, k, g.data(), tp.value(ib).data(), tp.grad(ia).data(), true);
                    }
                    if (tp.needs_grad(ib)) {
                      kernels::omp::matmul_at(k, m, n, tp.value(ia).data(), g.data(), tp.grad(ib).data(), true);
                    }
                  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + a.value().shape_string() + " vs " + b.value().shape_string());
  }
  Tensor c = a.value();
  accumulate(c, b.value());
  a.tape().counters().element_ops += c.size();
  return a.tape().record("add", std::move(c), {a.id(), b.id()},
                         [ia = a.id(), ib = b.id()](Tape& tp, const Tensor& g, std::size_t) {
                           if (tp.needs_grad(ia)) accumulate(tp.grad(ia), g);
                           if (tp.needs_grad(ib)) accumulate(tp.grad(ib), g);
                         });
}

Var add_bias(Var x, Var bias) {
  require_same_tape(x, bias, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.size() != xv.cols()) {
    throw DimensionError("add_bias: " + xv.shape_string() + " + bias " + bv.shape_string());
  }
  Tensor y = xv;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bv[j];
  }
  x.tape().counters().element_ops += y.size();
  return x.tape().record("add_bias", std::move(y), {x.id(), bias.id()},
                         [ix = x.id(), ib = bias.id()](Tape& tp, const Tensor& g, std::size_t) {
                           if (tp.needs_grad(ix)) accumulate(tp.grad(ix), g);
                           if (tp.needs_grad(ib)) {
                             Tensor& gb = tp.grad(ib);
                             for (std::size_t r = 0; r < g.rows(); ++r) {
                               auto row = g.row(r);
                               for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
                             }
                           }
                         });
}

Var scale(Var x, double s) {
  Tensor y = x.value();
  for (double& v : y.data()) v *= s;
  x.tape().counters().element_ops += y.size();
  return x.tape().record("scale", std::move(y), {x.id()}, [ix = x.id(), s](Tape& tp, const Tensor& g, std::size_t) {
    auto d = tp.grad(ix).data();
    auto gs = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * gs[i];
  });
}

Var softmax_rows(Var x) {
  Tensor y = softmax_rows(x.value());
  x.tape().counters().element_ops += y.size();
  return x.tape().record("softmax_rows", std::move(y), {x.id()},
                         [ix = x.id()](Tape& tp, const Tensor& g, std::size_t self) {
                           const Tensor& y = tp.value(self);
                           Tensor& gx = tp.grad(ix);
                           for (std::size_t r = 0; r < y.rows(); ++r) {
                             auto yr = y.row(r);
                             auto gr = g.row(r);
                             auto dr = gx.row(r);
                             double dot = 0.0;
                             for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * gr[j];
                             for (std::size_t j = 0; j < yr.size(); ++j) dr[j] += yr[j] * (gr[j] - dot);
                           }
                         });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, bias, "layer_norm");
  Tensor y = layer_norm(x.value(), gain.value(), bias.value(), eps);
  x.tape().counters().element_ops += y.size();
  return x.tape().record(
      "layer_norm", std::move(y), {x.id(), gain.id(), bias.id()},
      [ix = x.id(), ig = gain.id(), ib = bias.id(), eps](Tape& tp, const Tensor& g, std::size_t) {
        const Tensor& xv = tp.value(ix);
        const Tensor& gv = tp.value(ig);
        const std::size_t d = xv.cols();
        std::vector<double> xhat(d), dxhat(d);
        for (std::size_t r = 0; r < xv.rows(); ++r) {
          auto in = xv.row(r);
          auto gr = g.row(r);
          double mean = 0.0;
          for (double v : in) mean += v;
          mean /= double(d);
          double var = 0.0;
          for (double v : in) var += (v - mean) * (v - mean);
          var /= double(d);
          const double inv = 1.0 / std::sqrt(var + eps);
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (in[j] - mean) * inv;
            dxhat[j] = gr[j] * gv[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[j];
          }
          mean_dxhat /= double(d);
          mean_dxhat_xhat /= double(d);
          if (tp.needs_grad(ix)) {
            auto dx = tp.grad(ix).row(r);
            for (std::size_t j = 0; j < d; ++j) dx[j] += inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
          }
          if (tp.needs_grad(ig)) {
            Tensor& dg = tp.grad(ig);
            for (std::size_t j = 0; j < d; ++j) dg[j] += gr[j] * xhat[j];
          }
          if (tp.needs_grad(ib)) {
            Tensor& db = tp.grad(ib);
            for (std::size_t j = 0; j < d; ++j) db[j] += gr[j];
          }
        }
      });
}

Var activate(Var x, Activation act) {
  Tensor y = x.value();
  for (double& v : y.data()) v = activate(v, act);
  x.tape().counters().element_ops += y.size();
  return x.tape().record("activate", std::move(y), {x.id()}, [ix = x.id(), act](Tape& tp, const Tensor& g, std::size_t) {
    const Tensor& xv = tp.value(ix);
    auto d = tp.grad(ix).data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * activate_derivative(xv[i], act);
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (begin >= end || end > xv.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         xv.shape_string());
  }
  const std::size_t w = end - begin;
  Tensor y({xv.rows(), w});
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto src = xv.row(r);
    std::copy(src.begin() + long(begin), src.begin() + long(end), y.row(r).begin());
  }
  return x.tape().record("slice_cols", std::move(y), {x.id()},
                         [ix = x.id(), begin, w](Tape& tp, const Tensor& g, std::size_t) {
                           Tensor& gx = tp.grad(ix);
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                             auto dst = gx.row(r);
                             auto src = g.row(r);
                             for (std::size_t j = 0; j < w; ++j) dst[begin + j] += src[j];
                           }
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, widths;
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw Error("concat_cols: operands live on different tapes");
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + p.value().shape_string() + " vs " + std::to_string(rows));
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Tensor y({rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      auto src = p.value().row(r);
      std::copy(src.begin(), src.end(), y.row(r).begin() + long(off));
    }
    off += p.cols();
  }
  return t.record("concat_cols", std::move(y), ids, [ids, widths](Tape& tp, const Tensor& g, std::size_t) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(ids[k])) {
        Tensor& gk = tp.grad(ids[k]);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          auto src = g.row(r);
          auto dst = gk.row(r);
          for (std::size_t j = 0; j < widths[k]; ++j) dst[j] += src[off + j];
        }
      }
      off += widths[k];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const Tensor& xv = x.value();
  if (begin >= end || end > xv.rows()) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         xv.shape_string());
  }
  const std::size_t n = xv.cols();
  Tensor y({end - begin, n}, xv.data().subspan(begin * n, (end - begin) * n));
  return x.tape().record("slice_rows", std::move(y), {x.id()},
                         [ix = x.id(), begin, n](Tape& tp, const Tensor& g, std::size_t) {
                           auto dst = tp.grad(ix).data().subspan(begin * n, g.size());
                           for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no operands");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> ids, sizes;
  for (const Var& p : parts) {
    if (&p.tape() != &t) throw Error("concat_rows: operands live on different tapes");
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + p.value().shape_string() + " vs " +
                           std::to_string(cols));
    }
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
    rows += p.rows();
  }
  Tensor y({rows, cols});
  std::size_t off = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), y.data().begin() + long(off));
    off += p.value().size();
  }
  return t.record("concat_rows", std::move(y), ids, [ids, sizes](Tape& tp, const Tensor& g, std::size_t) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs_grad(ids[k])) {
        auto dst = tp.grad(ids[k]).data();
        for (std::size_t i = 0; i < sizes[k]; ++i) dst[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

Var mean_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor y({1, n});
  for (std::size_t r = 0; r < m; ++r) {
    auto row = xv.row(r);
    for (std::size_t j = 0; j < n; ++j) y[j] += row[j];
  }
  for (double& v : y.data()) v /= double(m);
  x.tape().counters().element_ops += xv.size();
  return x.tape().record("mean_rows", std::move(y), {x.id()}, [ix = x.id(), m, n](Tape& tp, const Tensor& g, std::size_t) {
    Tensor& gx = tp.grad(ix);
    for (std::size_t r = 0; r < m; ++r) {
      auto dst = gx.row(r);
      for (std::size_t j = 0; j < n; ++j) dst[j] += g[j] / double(m);
    }
  });
}

Var row_normalize(Var x) {
  const Tensor& xv = x.value();
  Tensor y = xv;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    double s = 0.0;
    for (double v : row) s += v;
    if (std::abs(s) < 1e-12) throw NumericError("row_normalize: row " + std::to_string(r) + " sums to ~0");
    for (double& v : row) v /= s;
  }
  x.tape().counters().element_ops += y.size();
  return x.tape().record("row_normalize", std::move(y), {x.id()}, [ix = x.id()](Tape& tp, const Tensor& g, std::size_t self) {
    const Tensor& xv = tp.value(ix);
    const Tensor& yv = tp.value(self);
    Tensor& gx = tp.grad(ix);
    for (std::size_t r = 0; r < xv.rows(); ++r) {
      auto xr = xv.row(r);
      auto yr = yv.row(r);
      auto gr = g.row(r);
      double s = 0.0, dot = 0.0;
      for (std::size_t j = 0; j < xr.size(); ++j) {
        s += xr[j];
        dot += gr[j] * yr[j];
      }
      auto dr = gx.row(r);
      for (std::size_t j = 0; j < xr.size(); ++j) dr[j] += (gr[j] - dot) / s;
    }
  });
}

Var scaled_scores(Var q, Var k, double s) {
  require_same_tape(q, k, "scaled_scores");
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  if (qv.cols() != kv.cols()) {
    throw DimensionError("scaled_scores: head widths differ, " + qv.shape_string() + " vs " + kv.shape_string());
  }
  const std::size_t m = qv.rows(), d = qv.cols(), n = kv.rows();
  Tensor y({m, n});
  kernels::omp::matmul_bt(m, d, n, qv.data(), kv.data(), y.data(), false);
  for (double& v : y.data()) v *= s;
  Counters& c = q.tape().counters();
  c.macs += std::uint64_t(m) * d * n;
  c.element_ops += y.size();
  c.score_entries += std::uint64_t(m) * n;
  c.score_matrices += 1;
  c.largest_score_rows = std::max(c.largest_score_rows, m);
  c.largest_score_cols = std::max(c.largest_score_cols, n);
  return q.tape().record("scaled_scores", std::move(y), {q.id(), k.id()},
                         [iq = q.id(), ik = k.id(), m, d, n, s](Tape& tp, const Tensor& g, std::size_t) {
                           Tensor gs = g;
                           for (double& v : gs.data()) v *= s;
                           if (tp.needs_grad(iq)) {
                             kernels::omp::matmul(m, n, d, gs.data(), tp.value(ik).data(), tp.grad(iq).data(), true);
                           }
                           if (tp.needs_grad(ik)) {
                             kernels::omp::matmul_at(n, m, d, gs.data(), tp.value(iq).data(), tp.grad(ik).data(), true);
                           }
                         });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  const std::size_t m = z.rows(), c = z.cols();
  if (labels.size() != m) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + z.shape_string());
  }
  std::vector<int> lab(labels.begin(), labels.end());
  for (int l : lab) {
    if (l < 0 || std::size_t(l) >= c) throw DimensionError("cross_entropy: label " + std::to_string(l) + " out of range");
  }
  Tensor p = softmax_rows(z);
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    auto row = z.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - mx);
    loss += mx + std::log(s) - row[std::size_t(lab[r])];
  }
  loss /= double(m);
  logits.tape().counters().element_ops += z.size();
  return logits.tape().record("cross_entropy", Tensor({1, 1}, {loss}), {logits.id()},
                              [iz = logits.id(), lab, p = std::move(p), m](Tape& tp, const Tensor& g, std::size_t) {
                                Tensor& gz = tp.grad(iz);
                                const double w = g[0] / double(m);
                                for (std::size_t r = 0; r < m; ++r) {
                                  auto pr = p.row(r);
                                  auto dr = gz.row(r);
                                  for (std::size_t j = 0; j < pr.size(); ++j) {
                                    dr[j] += w * (pr[j] - (j == std::size_t(lab[r]) ? 1.0 : 0.0));
                                  }
                                }
                              });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  x.tape().counters().element_ops += x.value().size();
  return x.tape().record("sum", Tensor({1, 1}, {s}), {x.id()}, [ix = x.id()](Tape& tp, const Tensor& g, std::size_t) {
    for (double& v : tp.grad(ix).data()) v += g[0];
  });
}

}  // namespace fav
