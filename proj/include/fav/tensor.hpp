#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <new>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fav {

/// Live/peak byte accounting for tensor storage on the calling thread.
/// Every Tensor allocation goes through TrackingAllocator, so the numbers
/// are deterministic and independent of the process allocator.
class MemoryTracker {
 public:
  static void allocate(std::size_t bytes) noexcept;
  static void release(std::size_t bytes) noexcept;
  static std::size_t live_bytes() noexcept;
  static std::size_t peak_bytes() noexcept;
  /// Sets the peak to the current live size.
  static void reset_peak() noexcept;
};

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
    T* p = static_cast<T*>(::operator new(n * sizeof(T)));
    MemoryTracker::allocate(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryTracker::release(n * sizeof(T));
    ::operator delete(p);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

using Shape = std::vector<std::size_t>;
using Storage = std::vector<double, TrackingAllocator<double>>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::span<const double> values);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Extent of the leading axes collapsed into rows; last axis is columns.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const double> data() const noexcept { return {data_.data(), data_.size()}; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) noexcept { return data().subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const noexcept { return data().subspan(r * cols(), cols()); }

  std::string shape_string() const { return fav::shape_string(shape_); }
  void fill(double v) noexcept;
  bool all_finite() const noexcept;

  bool operator==(const Tensor& other) const noexcept;

 private:
  Shape shape_;
  Storage data_;
};

/// Throws NumericError naming `stage` if any entry is NaN or infinite.
void check_finite(const Tensor& t, std::string_view stage);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace fav
