#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecgbench::diff {

using Shape = std::vector<std::size_t>;

/// Raised whenever operand extents are incompatible with a primitive.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

/// Dense row-major array. Storage is shared between copies and cloned on the
/// first mutable access, so passing arrays by value is cheap and a recorded
/// value can never be modified behind the tape's back.
template <class T>
class Array {
 public:
  using value_type = T;

  Array() : data_(std::make_shared<std::vector<T>>()) {}

  explicit Array(Shape shape, T fill = T(0))
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(element_count(shape_), fill)) {
    check_extents();
  }

  Array(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(std::move(values))) {
    check_extents();
    if (data_->size() != element_count(shape_)) {
      throw ShapeError("array of shape " + to_string(shape_) + " needs " +
                       std::to_string(element_count(shape_)) +
                       " elements, got " + std::to_string(data_->size()));
    }
  }

  static Array scalar(T v) { return Array(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_->size(); }

  const T* data() const { return data_->data(); }
  std::span<const T> values() const { return {data_->data(), data_->size()}; }

  T* mutable_data() {
    detach();
    return data_->data();
  }
  std::span<T> mutable_values() {
    detach();
    return {data_->data(), data_->size()};
  }

  T operator[](std::size_t i) const { return (*data_)[i]; }
  T item() const {
    if (size() != 1) {
      throw ShapeError("item() on array of shape " + to_string(shape_));
    }
    return (*data_)[0];
  }

  /// Same storage viewed under a different shape with equal element count.
  Array reshaped(Shape shape) const {
    if (element_count(shape) != size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " +
                       to_string(shape));
    }
    Array out = *this;
    out.shape_ = std::move(shape);
    return out;
  }

  template <class U>
  Array<U> cast() const {
    std::vector<U> v(size());
    std::transform(data_->begin(), data_->end(), v.begin(),
                   [](T x) { return static_cast<U>(x); });
    return Array<U>(shape_, std::move(v));
  }

  bool all_finite() const {
    return std::all_of(data_->begin(), data_->end(),
                       [](T x) { return std::isfinite(x); });
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape_));
    }
  }
  void detach() {
    if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
  }

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
};

}  // namespace ecgbench::diff
