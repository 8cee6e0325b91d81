#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "far/common.hpp"

namespace far {

// Extents of a dense 4-D array in (batch, channel, height, width) order.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  bool operator==(const Shape&) const = default;
  std::int64_t count() const {
    return std::int64_t(n) * c * h * w;
  }
  std::string str() const;
};

// Dense row-major double tensor. The single numeric carrier for feature maps,
// kernel stacks (in x out x kh x kw) and biases (1 x c x 1 x 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape_(s), data_(check_extents(s), fill) {}

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, double v) { return Tensor(s, v); }

  const Shape& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator()(int n, int c, int y, int x) {
    return data_[index(n, c, y, x)];
  }
  double operator()(int n, int c, int y, int x) const {
    return data_[index(n, c, y, x)];
  }

  double* plane(int n, int c) {
    return data_.data() + (std::int64_t(n) * shape_.c + c) * shape_.h * shape_.w;
  }
  const double* plane(int n, int c) const {
    return data_.data() + (std::int64_t(n) * shape_.c + c) * shape_.h * shape_.w;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;
  double max_abs() const;
  double squared_norm() const;

 private:
  std::int64_t index(int n, int c, int y, int x) const {
    return ((std::int64_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  static std::size_t check_extents(const Shape& s);

  Shape shape_;
  std::vector<double> data_;
};

// A single 2-D channel of real values; used by the spectral diagnostics and
// the luma-based metrics.
struct Plane {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(std::size_t(h_) * w_, fill) {}

  double& at(int y, int x) { return v[std::size_t(y) * w + x]; }
  double at(int y, int x) const { return v[std::size_t(y) * w + x]; }
};

// Throws ShapeError unless the two shapes match; `what` names the operands.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace far
