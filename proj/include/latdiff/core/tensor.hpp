#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "latdiff/core/error.hpp"
#include "latdiff/core/rng.hpp"

namespace latdiff {

using Real = double;

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixR =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MapMatR = Eigen::Map<MatrixR<Scalar>>;
template <typename Scalar>
using ConstMapMatR = Eigen::Map<const MatrixR<Scalar>>;

// Dense row-major tensor. Rank is dynamic; images use (H, W, C) with the
// channel index fastest, matrices use (rows, cols), scalars use (1).
template <typename Scalar>
struct Tensor {
  std::vector<int> dims;
  ArrayX<Scalar> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> d) {
    Tensor t;
    t.dims = std::move(d);
    t.data = ArrayX<Scalar>::Zero(count(t.dims));
    return t;
  }

  static Tensor full(std::vector<int> d, Scalar value) {
    Tensor t;
    t.dims = std::move(d);
    t.data = ArrayX<Scalar>::Constant(count(t.dims), value);
    return t;
  }

  static Tensor scalar(Scalar value) { return full({1}, value); }

  static Tensor uniform(std::vector<int> d, Rng& rng, Scalar lo, Scalar hi) {
    Tensor t = zeros(std::move(d));
    for (Eigen::Index i = 0; i < t.data.size(); ++i)
      t.data[i] = static_cast<Scalar>(rng.uniform(static_cast<double>(lo),
                                                  static_cast<double>(hi)));
    return t;
  }

  static Eigen::Index count(const std::vector<int>& d) {
    Eigen::Index n = 1;
    for (int v : d) n *= v;
    return n;
  }

  Eigen::Index size() const { return data.size(); }
  int rank() const { return static_cast<int>(dims.size()); }
  int dim(int i) const { return dims[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& other) const { return dims == other.dims; }

  bool all_finite() const {
    for (Eigen::Index i = 0; i < data.size(); ++i)
      if (!std::isfinite(static_cast<double>(data[i]))) return false;
    return true;
  }

  // (H, W, C) access.
  Scalar& at(int y, int x, int c) {
    return data[(static_cast<Eigen::Index>(y) * dims[1] + x) * dims[2] + c];
  }
  Scalar at(int y, int x, int c) const {
    return data[(static_cast<Eigen::Index>(y) * dims[1] + x) * dims[2] + c];
  }

  // View the flat storage as a (rows x cols) row-major matrix.
  MapMatR<Scalar> as_matrix(Eigen::Index rows, Eigen::Index cols) {
    return MapMatR<Scalar>(data.data(), rows, cols);
  }
  ConstMapMatR<Scalar> as_matrix(Eigen::Index rows, Eigen::Index cols) const {
    return ConstMapMatR<Scalar>(data.data(), rows, cols);
  }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(dims[i]);
    }
    return s + ")";
  }
};

template <typename Scalar>
inline void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                               const char* where) {
  if (!a.same_shape(b))
    fail(ErrorKind::ShapeMismatch, std::string(where) + ": " + a.shape_str() +
                                       " vs " + b.shape_str());
}

}  // namespace latdiff
