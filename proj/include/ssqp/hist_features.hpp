#pragma once

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

#include "ssqp/image.hpp"
#include "ssqp/svd_features.hpp"

namespace ssqp {

enum class CovDomain { Spatial, Frequency };

inline constexpr double kCovMeanFloor = 1e-8;
inline constexpr double kHistSmoothing = 1e-6;

using ImageRef = Eigen::Ref<const RowMatrix<double>>;

// Coefficient of variation: population standard deviation over |mean|, with
// |mean| floored at kCovMeanFloor.
double cov(std::span<const double> values);

// One CoV per b x b block in scan order; Frequency takes the CoV of all b*b
// orthonormal DCT coefficients of the block.
std::vector<double> cov_samples(const ImageRef& m, CovDomain domain, Eigen::Index b);

struct CovHistogram {
  std::vector<double> bin_edges;  // n_bins + 1, ascending
  std::vector<double> mass;       // sums to 1, every bin > 0
  CovDomain domain = CovDomain::Spatial;
  double smoothing_eps = kHistSmoothing;

  std::size_t n_bins() const { return mass.size(); }
};

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

// Samples are clamped into [lo, hi]; the top edge belongs to the last bin.
// Each bin receives eps extra mass before renormalization.
CovHistogram make_histogram(std::span<const double> samples, int n_bins, ValueRange range, CovDomain domain,
                            double eps = kHistSmoothing);

CovHistogram cov_histogram(const GrayImage& img, CovDomain domain, Eigen::Index b, int n_bins, ValueRange range);

// [0, max] over both sample sets, used for CoV values (which are >= 0).
ValueRange shared_cov_range(std::span<const double> a, std::span<const double> b);
// [min, max] over both sample sets, used for signed ensemble pixel values.
ValueRange shared_value_range(std::span<const double> a, std::span<const double> b);

// Sum of p ln(p / q) over bins. Requires identical binning.
double kl_distance(const CovHistogram& p, const CovHistogram& q);

struct HistGlobalPair {
  double f1 = 0.0;  // spatial CoV histograms
  double f2 = 0.0;  // DCT CoV histograms
};

struct HistBandPair {
  double f3 = 0.0;  // ensemble pixel-value histograms
  double f4 = 0.0;  // DCT CoV histograms of the ensemble images
};

HistGlobalPair f1_f2_hist(const ImageRef& ref, const ImageRef& test, Eigen::Index b, int n_bins);
HistGlobalPair f1_f2_hist(const GrayImage& ref, const GrayImage& test, Eigen::Index b, int n_bins);

HistBandPair f3_f4_hist(const SvdBands<double>& ref, const SvdBands<double>& test, Band band, Eigen::Index b,
                        int n_bins);
HistBandPair f3_f4_hist(const GrayImage& ref, const GrayImage& test, Band band, Eigen::Index b, int n_bins);

struct HistFeatureSet {
  double f1 = 0.0;
  double f2 = 0.0;
  std::array<double, 3> f3{};
  std::array<double, 3> f4{};
};

}  // namespace ssqp
