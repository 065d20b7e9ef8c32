#include "fav/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fav/error.hpp"

namespace fav {

namespace {
thread_local std::size_t g_live_bytes = 0;
thread_local std::size_t g_peak_bytes = 0;
}  // namespace

void MemoryTracker::allocate(std::size_t bytes) noexcept {
  g_live_bytes += bytes;
  g_peak_bytes = std::max(g_peak_bytes, g_live_bytes);
}

void MemoryTracker::release(std::size_t bytes) noexcept {
  // Storage may be released on a different thread than it was allocated on.
  g_live_bytes = bytes > g_live_bytes ? 0 : g_live_bytes - bytes;
}

std::size_t MemoryTracker::live_bytes() noexcept { return g_live_bytes; }
std::size_t MemoryTracker::peak_bytes() noexcept { return g_peak_bytes; }
void MemoryTracker::reset_peak() noexcept { g_peak_bytes = g_live_bytes; }

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto e : shape_) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + fav::shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::span<const double> values) : Tensor(std::move(shape)) {
  if (values.size() != data_.size()) {
    throw DimensionError("tensor " + shape_string() + " needs " + std::to_string(data_.size()) +
                         " values, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), data_.begin());
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : Tensor(std::move(shape), std::span<const double>(values.begin(), values.size())) {}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, values);
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.empty()) return 0;
  return shape_.size() == 1 ? 1 : data_.size() / shape_.back();
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::operator==(const Tensor& other) const noexcept {
  return shape_ == other.shape_ && data_ == other.data_;
}

void check_finite(const Tensor& t, std::string_view stage) {
  if (!t.all_finite()) {
    throw NumericError("non-finite values produced by " + std::string(stage) + " (shape " +
                       t.shape_string() + ")");
  }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace fav
