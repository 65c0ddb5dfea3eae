#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semcom {

// Dense row-major FP32 array. Copies are shallow (storage is shared);
// use clone() for an independent buffer. Shapes are immutable per object,
// reshaped() returns a view over the same storage.
class Tensor {
 public:
  Tensor() : store_(std::make_shared<std::vector<float>>()) {}

  explicit Tensor(std::vector<int64_t> shape)
      : shape_(std::move(shape)),
        store_(std::make_shared<std::vector<float>>(count(shape_), 0.0f)) {}

  Tensor(std::vector<int64_t> shape, std::vector<float> values)
      : shape_(std::move(shape)),
        store_(std::make_shared<std::vector<float>>(std::move(values))) {
    if (static_cast<int64_t>(store_->size()) != count(shape_))
      throw std::invalid_argument("tensor: data size does not match shape");
  }

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int64_t> shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data(), t.data() + t.numel(), value);
    return t;
  }

  static Tensor scalar(float value) { return Tensor({1}, {value}); }

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(size_t i) const { return shape_.at(i); }
  int64_t numel() const { return static_cast<int64_t>(store_->size()); }
  bool empty() const { return store_->empty(); }

  float* data() { return store_->data(); }
  const float* data() const { return store_->data(); }
  float& at(int64_t i) { return (*store_)[static_cast<size_t>(i)]; }
  float at(int64_t i) const { return (*store_)[static_cast<size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // View with a new shape over the same storage.
  Tensor reshaped(std::vector<int64_t> shape) const {
    if (count(shape) != numel())
      throw std::invalid_argument("tensor: reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.store_ = store_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.store_ = std::make_shared<std::vector<float>>(*store_);
    return t;
  }

  void fill(float value) { std::fill(store_->begin(), store_->end(), value); }

  bool all_finite() const {
    for (float v : *store_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool bitwise_equal(const Tensor& other) const {
    if (shape_ != other.shape_) return false;
    return std::memcmp(store_->data(), other.store_->data(),
                       store_->size() * sizeof(float)) == 0;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

  static int64_t count(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
      if (d < 0) throw std::invalid_argument("tensor: negative extent");
      n *= d;
    }
    return shape.empty() ? 0 : n;
  }

 private:
  std::vector<int64_t> shape_;
  std::shared_ptr<std::vector<float>> store_;
};

}  // namespace semcom
