#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "ssqp/error.hpp"

namespace ssqp {

// Orthonormal DCT-II basis: row k holds the k-th cosine.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dct_matrix(Eigen::Index n) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> c(n, n);
  const Scalar scale0 = std::sqrt(Scalar(1) / Scalar(n));
  const Scalar scale = std::sqrt(Scalar(2) / Scalar(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) {
      c(k, i) = (k == 0 ? scale0 : scale) *
                std::cos(std::numbers::pi_v<Scalar> * Scalar(2 * i + 1) * Scalar(k) / Scalar(2 * n));
    }
  }
  return c;
}

// Reusable transform for a fixed block size; holds the basis so block loops do
// not recompute cosines.
template <typename Scalar>
class Dct2 {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit Dct2(Eigen::Index n) : basis_(dct_matrix<Scalar>(n)) {}

  Eigen::Index size() const { return basis_.rows(); }

  template <typename Derived>
  Matrix forward(const Eigen::MatrixBase<Derived>& block) const {
    check(block);
    return basis_ * block * basis_.transpose();
  }

  template <typename Derived>
  Matrix inverse(const Eigen::MatrixBase<Derived>& coeffs) const {
    check(coeffs);
    return basis_.transpose() * coeffs * basis_;
  }

 private:
  template <typename Derived>
  void check(const Eigen::MatrixBase<Derived>& m) const {
    if (m.rows() != basis_.rows() || m.cols() != basis_.rows()) {
      throw ArgumentError("dct2: block must be square and match the transform size");
    }
  }

  Matrix basis_;
};

template <typename Derived>
auto dct2(const Eigen::MatrixBase<Derived>& block) {
  if (block.rows() != block.cols()) throw ArgumentError("dct2: block must be square");
  return Dct2<typename Derived::Scalar>(block.rows()).forward(block);
}

template <typename Derived>
auto idct2(const Eigen::MatrixBase<Derived>& coeffs) {
  if (coeffs.rows() != coeffs.cols()) throw ArgumentError("idct2: block must be square");
  return Dct2<typename Derived::Scalar>(coeffs.rows()).inverse(coeffs);
}

}  // namespace ssqp
