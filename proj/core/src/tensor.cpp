#include "ganscope/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ganscope {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

float Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape_));
  }
  return data_[0];
}

void Tensor::ensure_grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0f);
}

void Tensor::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), 0.0f);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  if (element_count(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor batch_slice(const Tensor& t, int begin, int end) {
  if (t.rank() < 1 || begin < 0 || end < begin || end > t.dim(0)) {
    throw ShapeError("batch slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + to_string(t.shape()));
  }
  Shape shape = t.shape();
  const std::size_t row = t.size() / static_cast<std::size_t>(std::max(1, shape[0]));
  shape[0] = end - begin;
  auto first = t.data().begin() + static_cast<std::ptrdiff_t>(row * begin);
  return Tensor(std::move(shape), std::vector<float>(first, first + static_cast<std::ptrdiff_t>(row * (end - begin))));
}

Tensor batch_item(const Tensor& t, int i) {
  Tensor s = batch_slice(t, i, i + 1);
  return s.reshaped(Shape(t.shape().begin() + 1, t.shape().end()));
}

Tensor batch_concat(const std::vector<Tensor>& parts, bool add_axis) {
  if (parts.empty()) throw ShapeError("nothing to concatenate");
  Shape item = parts.front().shape();
  if (!add_axis) {
    if (item.empty()) throw ShapeError("cannot concatenate scalars along the batch axis");
    item.erase(item.begin());
  }
  std::vector<float> data;
  int n = 0;
  for (const Tensor& p : parts) {
    Shape ps = p.shape();
    int rows = 1;
    if (!add_axis) {
      if (ps.empty()) throw ShapeError("cannot concatenate scalars along the batch axis");
      rows = ps[0];
      ps.erase(ps.begin());
    }
    if (ps != item) throw ShapeError("concatenating " + to_string(p.shape()) + " with items of " + to_string(item));
    data.insert(data.end(), p.data().begin(), p.data().end());
    n += rows;
  }
  item.insert(item.begin(), n);
  return Tensor(std::move(item), std::move(data));
}

}  // namespace ganscope
