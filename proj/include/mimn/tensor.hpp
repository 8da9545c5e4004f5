#pragma once

#include <cmath>
#include <vector>

#include "mimn/common.hpp"

namespace mimn {

// Dense rank-1/rank-2 tensor of doubles. This is deliberately small: the
// model needs vectors and matrices only, and keeping the layout flat
// (row-major) makes the byte-exact file formats trivial.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    int n = 1;
    for (int d : shape_) {
      MIMN_CHECK(d > 0, "tensor dims must be positive, got " + shape_str(shape_));
      n *= d;
    }
    v_.assign(static_cast<size_t>(n), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor scalar(double x) {
    Tensor t({1});
    t.v_[0] = x;
    return t;
  }
  static Tensor vec(std::vector<double> values) {
    Tensor t;
    t.shape_ = {static_cast<int>(values.size())};
    t.v_ = std::move(values);
    MIMN_CHECK(!t.v_.empty(), "empty vector tensor");
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  int size() const { return static_cast<int>(v_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rows() const { return shape_[0]; }
  int cols() const {
    MIMN_CHECK(rank() == 2, "cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[1];
  }
  const std::vector<int>& shape() const { return shape_; }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double operator[](int i) const { return v_[static_cast<size_t>(i)]; }
  double& operator[](int i) { return v_[static_cast<size_t>(i)]; }
  double at(int r, int c) const { return v_[static_cast<size_t>(r) * shape_[1] + c]; }
  double& at(int r, int c) { return v_[static_cast<size_t>(r) * shape_[1] + c]; }

  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && v_ == o.v_; }

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

// Fill with iid U(-scale, scale) draws, in index order.
inline void fill_uniform(Tensor& t, Rng& rng, double scale) {
  for (int i = 0; i < t.size(); ++i) t[i] = uniform(rng, -scale, scale);
}

}  // namespace mimn
