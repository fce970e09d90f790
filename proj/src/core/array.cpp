#include "clade/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "clade/error.hpp"

namespace clade {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Array<T>::Array(Shape shape, T fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("array shape " + shape_str(shape_) + " has a zero extent");
}

template <typename T>
Array<T>::Array(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("array shape " + shape_str(shape_) + " has a zero extent");
  if (numel(shape_) != data_.size()) {
    throw ShapeError("array shape " + shape_str(shape_) + " needs " + std::to_string(numel(shape_)) +
                     " values, got " + std::to_string(data_.size()));
  }
}

template <typename T>
void Array<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
bool Array<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class Array<float>;
template class Array<double>;

}  // namespace clade
