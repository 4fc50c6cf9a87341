#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fdgan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Dimensions of a dense N x C x H x W tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  constexpr bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

/// Row-major float tensor with an optional gradient buffer of the same shape.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0}) : shape_(shape), data_(shape.size(), fill) {}
  BasicTensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[index(n, c, y, x)];
  }
  const T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[index(n, c, y, x)];
  }

  std::span<T> plane(std::size_t n, std::size_t c) {
    return std::span<T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  std::span<const T> plane(std::size_t n, std::size_t c) const {
    return std::span<const T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool has_grad() const { return !grad_.empty(); }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }
  void ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), T{0});
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T{0}); }
  void drop_grad() { grad_.clear(); }

  template <class U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(), [](T v) { return static_cast<U>(v); });
    if (has_grad()) {
      out.ensure_grad();
      std::transform(grad_.begin(), grad_.end(), out.grad().begin(),
                     [](T v) { return static_cast<U>(v); });
    }
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  bool operator==(const BasicTensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;

/// A named trainable (or persisted) tensor owned by some layer.
template <class T>
struct ParamRef {
  std::string name;
  BasicTensor<T>* tensor = nullptr;
};

template <class T>
using ParamList = std::vector<ParamRef<T>>;

template <class T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& p : params) {
    p.tensor->ensure_grad();
    p.tensor->zero_grad();
  }
}

/// Copies values between two parameter lists of the same architecture, converting precision.
template <class Dst, class Src>
void copy_values(const ParamList<Dst>& dst, const ParamList<Src>& src) {
  if (dst.size() != src.size()) throw Error("parameter list length mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    require_same_shape(dst[i].tensor->shape(), src[i].tensor->shape(), src[i].name.c_str());
    auto in = src[i].tensor->values();
    auto out = dst[i].tensor->values();
    for (std::size_t k = 0; k < in.size(); ++k) out[k] = static_cast<Dst>(in[k]);
  }
}

template <class T>
BasicTensor<T>& operator+=(BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

template <class T>
BasicTensor<T> scaled(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

/// out += s * a
template <class T>
void axpy(BasicTensor<T>& out, T s, const BasicTensor<T>& a) {
  require_same_shape(out.shape(), a.shape(), "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += s * a[i];
}

template <class T>
double sum(const BasicTensor<T>& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

template <class T>
double mean(const BasicTensor<T>& a) {
  return a.empty() ? 0.0 : sum(a) / static_cast<double>(a.size());
}

/// Sub-batch [first, first + count) along N.
template <class T>
BasicTensor<T> slice_batch(const BasicTensor<T>& a, std::size_t first, std::size_t count) {
  const Shape s = a.shape();
  if (first + count > s.n) throw ShapeError("slice_batch out of range for " + s.str());
  Shape out_shape{count, s.c, s.h, s.w};
  std::vector<T> data(a.data() + first * s.c * s.plane(), a.data() + (first + count) * s.c * s.plane());
  return BasicTensor<T>(out_shape, std::move(data));
}

template <class T>
BasicTensor<T> stack_batch(const std::vector<const BasicTensor<T>*>& items) {
  if (items.empty()) throw ShapeError("stack_batch of nothing");
  Shape s = items.front()->shape();
  std::size_t total = 0;
  for (const auto* t : items) {
    if (t->shape().c != s.c || t->shape().h != s.h || t->shape().w != s.w) {
      throw ShapeError("stack_batch: " + t->shape().str() + " vs " + s.str());
    }
    total += t->shape().n;
  }
  std::vector<T> data;
  data.reserve(total * s.c * s.plane());
  for (const auto* t : items) data.insert(data.end(), t->data(), t->data() + t->size());
  return BasicTensor<T>(Shape{total, s.c, s.h, s.w}, std::move(data));
}

}  // namespace fdgan
