#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace defrag {

using Shape = std::vector<std::int64_t>;

std::string shape_to_string(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

/// Allocator pinning every buffer to a 64-byte boundary. Vectorized kernels
/// peel loops based on a pointer's residue modulo the SIMD width, which
/// changes summation order; a fixed alignment keeps results independent of
/// where the heap happened to place a buffer, so identical runs stay
/// bit-identical.
template <typename T>
struct AlignedAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAlloc() = default;
  template <typename U>
  AlignedAlloc(const AlignedAlloc<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlignment));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    ::operator delete(p, n * sizeof(T), kAlignment);
  }
  template <typename U>
  bool operator==(const AlignedAlloc<U>&) const noexcept {
    return true;
  }
};

using AlignedVec = std::vector<double, AlignedAlloc<double>>;

/// Dense n-dimensional array of doubles in row-major order, with an optional
/// gradient buffer of the same length. Copying a Tensor shares storage, so a
/// tensor captured by an autodiff closure sees gradient accumulation through
/// any other handle to the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;

  /// Value of a one-element tensor.
  double value() const;

  double at(std::initializer_list<std::int64_t> index) const;
  double& at(std::initializer_list<std::int64_t> index);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool requires_grad);

  /// True once a gradient buffer has been allocated (by ensure_grad or a
  /// backward pass).
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Allocates a zeroed gradient buffer if absent. Const because the buffer
  /// lives in the shared storage, not the handle; autodiff closures hold
  /// const copies of their inputs and still accumulate into them.
  std::span<double> ensure_grad() const;
  /// Zeroes the gradient buffer if allocated.
  void zero_grad() const;
  /// Releases the gradient buffer so has_grad() is false again.
  void drop_grad() const;

  /// Deep copy of the data (gradient buffer not copied).
  Tensor clone() const;
  bool shares_storage_with(const Tensor& other) const {
    return impl_ != nullptr && impl_ == other.impl_;
  }

 private:
  struct Impl {
    Shape shape;
    AlignedVec data;
    AlignedVec grad;  // empty until requested
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  Impl& checked() const;
  std::shared_ptr<Impl> impl_;
};

/// Throws ValidationError if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

bool all_finite(std::span<const double> values);

}  // namespace defrag
