#include "defrag/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "defrag/errors.hpp"

namespace defrag {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  for (std::int64_t d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor shape " + shape_to_string(shape) +
                           " has a non-positive extent");
    }
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  validate_shape(shape);
  auto impl = std::make_shared<Impl>();
  impl->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& x : t.data()) x = value;
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> data,
                    bool requires_grad) {
  validate_shape(shape);
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw DimensionError("tensor data of length " +
                         std::to_string(data.size()) +
                         " does not fill shape " + shape_to_string(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data.assign(data.begin(), data.end());
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor::Impl& Tensor::checked() const {
  if (!impl_) throw UsageError("operation on an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return checked().shape; }

int Tensor::rank() const { return static_cast<int>(checked().shape.size()); }

std::int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(checked().data.size());
}

std::span<double> Tensor::data() { return checked().data; }

std::span<const double> Tensor::data() const { return checked().data; }

double Tensor::value() const {
  if (numel() != 1) {
    throw UsageError("value() requires a one-element tensor, got shape " +
                     shape_to_string(shape()));
  }
  return checked().data[0];
}

namespace {

std::int64_t flat_index(const Shape& shape,
                        std::initializer_list<std::int64_t> index) {
  if (index.size() != shape.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) +
                         " does not match shape " + shape_to_string(shape));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (std::int64_t i : index) {
    if (i < 0 || i >= shape[axis]) {
      throw DimensionError("index out of bounds for shape " +
                           shape_to_string(shape));
    }
    flat = flat * shape[axis] + i;
    ++axis;
  }
  return flat;
}

}  // namespace

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  return checked().data[static_cast<std::size_t>(
      flat_index(shape(), index))];
}

double& Tensor::at(std::initializer_list<std::int64_t> index) {
  return checked().data[static_cast<std::size_t>(
      flat_index(shape(), index))];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

Tensor& Tensor::set_requires_grad(bool requires_grad) {
  checked().requires_grad = requires_grad;
  return *this;
}

bool Tensor::has_grad() const { return !checked().grad.empty(); }

std::span<double> Tensor::grad() {
  if (!has_grad()) {
    throw UsageError("tensor has no gradient; run backward() first");
  }
  return checked().grad;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) {
    throw UsageError("tensor has no gradient; run backward() first");
  }
  return checked().grad;
}

std::span<double> Tensor::ensure_grad() const {
  Impl& impl = checked();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

void Tensor::zero_grad() const {
  Impl& impl = checked();
  std::fill(impl.grad.begin(), impl.grad.end(), 0.0);
}

void Tensor::drop_grad() const {
  Impl& impl = checked();
  impl.grad.clear();
  impl.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  const Impl& impl = checked();
  auto copy = std::make_shared<Impl>();
  copy->shape = impl.shape;
  copy->data = impl.data;
  copy->requires_grad = impl.requires_grad;
  return Tensor(std::move(copy));
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void check_finite(const Tensor& t, const std::string& what) {
  if (!all_finite(t.data())) {
    throw ValidationError(what + " contains a non-finite entry");
  }
}

}  // namespace defrag
