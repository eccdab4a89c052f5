#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ssqp/error.hpp"

namespace ssqp {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Luminance image with values in [0, 255]. Construction validates the
// invariant, so every GrayImage in flight is finite and in range.
template <typename Scalar>
class BasicGrayImage {
 public:
  using Matrix = RowMatrix<Scalar>;

  BasicGrayImage() = default;

  explicit BasicGrayImage(Matrix pixels) : pixels_(std::move(pixels)) { validate(); }

  template <typename Derived>
  static BasicGrayImage from_matrix(const Eigen::MatrixBase<Derived>& m) {
    return BasicGrayImage(Matrix(m.template cast<Scalar>()));
  }

  // Clamps into [0, 255] instead of rejecting; used by synthetic distortions.
  template <typename Derived>
  static BasicGrayImage clamped(const Eigen::MatrixBase<Derived>& m) {
    return BasicGrayImage(Matrix(m.template cast<Scalar>().cwiseMax(Scalar(0)).cwiseMin(Scalar(255))));
  }

  Eigen::Index height() const { return pixels_.rows(); }
  Eigen::Index width() const { return pixels_.cols(); }
  const Matrix& pixels() const { return pixels_; }
  Scalar operator()(Eigen::Index r, Eigen::Index c) const { return pixels_(r, c); }

  bool same_shape(const BasicGrayImage& other) const {
    return height() == other.height() && width() == other.width();
  }

  friend bool operator==(const BasicGrayImage& a, const BasicGrayImage& b) {
    return a.same_shape(b) && a.pixels_ == b.pixels_;
  }

 private:
  void validate() const {
    if (pixels_.rows() < 1 || pixels_.cols() < 1) {
      throw ArgumentError("GrayImage: dimensions must be at least 1x1");
    }
    for (Eigen::Index i = 0; i < pixels_.size(); ++i) {
      const Scalar v = pixels_.data()[i];
      if (!std::isfinite(static_cast<double>(v)) || v < Scalar(0) || v > Scalar(255)) {
        throw ArgumentError("GrayImage: pixel values must be finite and within [0, 255]");
      }
    }
  }

  Matrix pixels_;
};

using GrayImage = BasicGrayImage<double>;

struct BlockOrigin {
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

// Non-overlapping b x b tiles of the largest b-multiple region anchored at the
// top-left corner. Remainder rows/columns are dropped.
template <typename Scalar>
struct BasicBlockGrid {
  Eigen::Index block_size = 0;
  Eigen::Index rows = 0;  // blocks per column
  Eigen::Index cols = 0;  // blocks per row
  std::vector<RowMatrix<Scalar>> blocks;
  std::vector<BlockOrigin> origins;

  std::size_t size() const { return blocks.size(); }
};

using BlockGrid = BasicBlockGrid<double>;

inline void check_block_size(Eigen::Index height, Eigen::Index width, Eigen::Index b) {
  if (b < 2) {
    throw ArgumentError("partition_blocks: block size must be >= 2, got " + std::to_string(b));
  }
  if (b > std::min(height, width)) {
    throw ArgumentError("partition_blocks: block size " + std::to_string(b) + " exceeds image extent " +
                        std::to_string(height) + "x" + std::to_string(width));
  }
}

template <typename Derived>
BasicBlockGrid<typename Derived::Scalar> partition_blocks(const Eigen::MatrixBase<Derived>& m, Eigen::Index b) {
  check_block_size(m.rows(), m.cols(), b);
  BasicBlockGrid<typename Derived::Scalar> grid;
  grid.block_size = b;
  grid.rows = m.rows() / b;
  grid.cols = m.cols() / b;
  grid.blocks.reserve(static_cast<std::size_t>(grid.rows * grid.cols));
  grid.origins.reserve(grid.blocks.capacity());
  for (Eigen::Index br = 0; br < grid.rows; ++br) {
    for (Eigen::Index bc = 0; bc < grid.cols; ++bc) {
      grid.blocks.emplace_back(m.block(br * b, bc * b, b, b));
      grid.origins.push_back({br * b, bc * b});
    }
  }
  return grid;
}

template <typename Scalar>
BasicBlockGrid<Scalar> partition_blocks(const BasicGrayImage<Scalar>& img, Eigen::Index b) {
  return partition_blocks(img.pixels(), b);
}

// PGM (P2/P5, maxval <= 255) and 8-bit PNG. Color PNG is reduced to BT.601 luma.
GrayImage load_image(const std::filesystem::path& path);

// Binary PGM; values are rounded and clamped to 8 bits.
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

}  // namespace ssqp
