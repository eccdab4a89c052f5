#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "ssqp/error.hpp"
#include "ssqp/image.hpp"

namespace ssqp {

enum class Band { Low = 0, Mid = 1, High = 2 };

inline constexpr std::array<Band, 3> kAllBands{Band::Low, Band::Mid, Band::High};

constexpr std::string_view band_name(Band b) {
  switch (b) {
    case Band::Low: return "LB";
    case Band::Mid: return "MB";
    case Band::High: return "HB";
  }
  return "?";
}

constexpr std::size_t band_index(Band b) { return static_cast<std::size_t>(b); }

struct BandRange {
  Eigen::Index start = 0;
  Eigen::Index count = 0;
};

// Smallest extent for which every band is non-empty under the 1/6, 2/6, 3/6 split.
inline constexpr Eigen::Index kMinBandExtent = 6;
// Smallest extent accepted at all; below 6 the low and mid bands are held at one index.
inline constexpr Eigen::Index kMinRelaxedExtent = 3;

// LB = first floor(k/6) indices, MB = next floor(2k/6), HB = the remainder.
// Below k = 6 the two lower bands are kept at one index each.
inline std::array<BandRange, 3> band_ranges(Eigen::Index k) {
  if (k < kMinRelaxedExtent) throw ArgumentError("band_ranges: need at least 3 singular values");
  const Eigen::Index low = std::max<Eigen::Index>(1, k / 6);
  const Eigen::Index mid = std::max<Eigen::Index>(1, (2 * k) / 6);
  return {BandRange{0, low}, BandRange{low, mid}, BandRange{low + mid, k - low - mid}};
}

template <typename Scalar>
struct SvdFactors {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> u;  // H x k
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sigma;           // k, non-increasing
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> v;  // W x k
};

// Flips each (u_i, v_i) pair so the largest-magnitude entry of u_i is positive.
// The product u_i v_i^T is unchanged; ties go to the first such entry.
template <typename Scalar>
void canonicalize_signs(SvdFactors<Scalar>& f) {
  for (Eigen::Index i = 0; i < f.u.cols(); ++i) {
    Eigen::Index arg = 0;
    f.u.col(i).cwiseAbs().maxCoeff(&arg);
    if (f.u(arg, i) < Scalar(0)) {
      f.u.col(i) = -f.u.col(i);
      f.v.col(i) = -f.v.col(i);
    }
  }
}

// Thin SVD with canonical signs. No dimension constraint.
template <typename Derived>
SvdFactors<typename Derived::Scalar> canonical_svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense = m;
  Eigen::BDCSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(dense, Eigen::ComputeThinU |
                                                                                      Eigen::ComputeThinV);
  SvdFactors<Scalar> f{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  canonicalize_signs(f);
  return f;
}

// Singular triplets of an image split into the low/mid/high index bands.
template <typename Scalar>
class SvdBands {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  // Takes factors from any SVD routine; signs are canonicalized here.
  static SvdBands from_factors(SvdFactors<Scalar> f, Eigen::Index min_extent = kMinBandExtent) {
    const Eigen::Index k = f.sigma.size();
    if (f.u.cols() != k || f.v.cols() != k) throw ArgumentError("SvdBands: factor shapes disagree");
    if (k < std::max(min_extent, kMinRelaxedExtent)) {
      throw ArgumentError("svd_bands: image extent " + std::to_string(k) + " is below the minimum of " +
                          std::to_string(std::max(min_extent, kMinRelaxedExtent)));
    }
    canonicalize_signs(f);
    SvdBands out;
    out.f_ = std::move(f);
    out.ranges_ = band_ranges(k);
    return out;
  }

  Eigen::Index rows() const { return f_.u.rows(); }
  Eigen::Index cols() const { return f_.v.rows(); }
  Eigen::Index rank_extent() const { return f_.sigma.size(); }

  const Matrix& u() const { return f_.u; }
  const Matrix& v() const { return f_.v; }
  const Vector& sigma() const { return f_.sigma; }
  BandRange range(Band b) const { return ranges_[band_index(b)]; }

  auto u_band(Band b) const { return f_.u.middleCols(range(b).start, range(b).count); }
  auto v_band(Band b) const { return f_.v.middleCols(range(b).start, range(b).count); }
  auto sigma_band(Band b) const { return f_.sigma.segment(range(b).start, range(b).count); }

  bool same_shape(const SvdBands& other) const { return rows() == other.rows() && cols() == other.cols(); }

 private:
  SvdFactors<Scalar> f_;
  std::array<BandRange, 3> ranges_{};
};

template <typename Derived>
SvdBands<typename Derived::Scalar> svd_bands(const Eigen::MatrixBase<Derived>& m,
                                             Eigen::Index min_extent = kMinBandExtent) {
  if (std::min(m.rows(), m.cols()) < std::max(min_extent, kMinRelaxedExtent)) {
    throw ArgumentError("svd_bands: image must be at least " + std::to_string(min_extent) + " pixels on each side");
  }
  return SvdBands<typename Derived::Scalar>::from_factors(canonical_svd(m), min_extent);
}

template <typename Scalar>
SvdBands<Scalar> svd_bands(const BasicGrayImage<Scalar>& img) {
  return svd_bands(img.pixels());
}

// Unweighted: sum of u_i v_i^T over the band. Weighted: sum of sigma_i u_i v_i^T.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> ensemble_image(const SvdBands<Scalar>& bands, Band b,
                                                                    bool weighted) {
  if (weighted) return bands.u_band(b) * bands.sigma_band(b).asDiagonal() * bands.v_band(b).transpose();
  return bands.u_band(b) * bands.v_band(b).transpose();
}

namespace detail {
template <typename Scalar>
void require_same_shape(const SvdBands<Scalar>& ref, const SvdBands<Scalar>& test, const char* what) {
  if (!ref.same_shape(test)) {
    throw ArgumentError(std::string(what) + ": reference and test dimensions differ");
  }
}
}  // namespace detail

template <typename Scalar>
Scalar f1_svd(const SvdBands<Scalar>& ref, const SvdBands<Scalar>& test, Band b) {
  detail::require_same_shape(ref, test, "f1_svd");
  return (ensemble_image(ref, b, false) - ensemble_image(test, b, false)).cwiseAbs().sum();
}

template <typename Scalar>
Scalar f2_svd(const SvdBands<Scalar>& ref, const SvdBands<Scalar>& test, Band b) {
  detail::require_same_shape(ref, test, "f2_svd");
  return (ensemble_image(ref, b, true) - ensemble_image(test, b, true)).cwiseAbs().sum();
}

// Mean absolute alignment of same-index singular vectors within the band,
// over both the left and right vectors. 1 for identical images.
template <typename Scalar>
Scalar f3_svd(const SvdBands<Scalar>& ref, const SvdBands<Scalar>& test, Band b) {
  detail::require_same_shape(ref, test, "f3_svd");
  const Eigen::Index n = ref.range(b).count;
  const Scalar left = (ref.u_band(b).cwiseProduct(test.u_band(b))).colwise().sum().cwiseAbs().sum();
  const Scalar right = (ref.v_band(b).cwiseProduct(test.v_band(b))).colwise().sum().cwiseAbs().sum();
  return (left + right) / Scalar(2 * n);
}

template <typename Scalar>
Scalar f4_svd(const SvdBands<Scalar>& ref, const SvdBands<Scalar>& test, Band b) {
  detail::require_same_shape(ref, test, "f4_svd");
  return (ref.sigma_band(b) - test.sigma_band(b)).cwiseAbs().sum();
}

template <typename Scalar>
struct SvdFeatureSet {
  std::array<Scalar, 3> f1{};
  std::array<Scalar, 3> f2{};
  std::array<Scalar, 3> f3{};
  std::array<Scalar, 3> f4{};
};

template <typename Scalar>
SvdFeatureSet<Scalar> svd_features(const SvdBands<Scalar>& ref, const SvdBands<Scalar>& test) {
  SvdFeatureSet<Scalar> out;
  for (Band b : kAllBands) {
    const auto i = band_index(b);
    out.f1[i] = f1_svd(ref, test, b);
    out.f2[i] = f2_svd(ref, test, b);
    out.f3[i] = f3_svd(ref, test, b);
    out.f4[i] = f4_svd(ref, test, b);
  }
  return out;
}

}  // namespace ssqp
