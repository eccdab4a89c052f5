#include "ssqp/hist_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ssqp/dct.hpp"

namespace ssqp {

double cov(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("cov: empty sample");
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  return sd / std::max(std::abs(mean), kCovMeanFloor);
}

std::vector<double> cov_samples(const ImageRef& m, CovDomain domain, Eigen::Index b) {
  check_block_size(m.rows(), m.cols(), b);
  const Eigen::Index block_rows = m.rows() / b;
  const Eigen::Index block_cols = m.cols() / b;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(block_rows * block_cols));
  const Dct2<double> dct(b);
  Eigen::MatrixXd block(b, b);
  for (Eigen::Index br = 0; br < block_rows; ++br) {
    for (Eigen::Index bc = 0; bc < block_cols; ++bc) {
      block = m.block(br * b, bc * b, b, b);
      if (domain == CovDomain::Frequency) block = dct.forward(block);
      out.push_back(cov(std::span<const double>(block.data(), static_cast<std::size_t>(block.size()))));
    }
  }
  return out;
}

CovHistogram make_histogram(std::span<const double> samples, int n_bins, ValueRange range, CovDomain domain,
                            double eps) {
  if (n_bins < 2) throw ArgumentError("histogram: need at least 2 bins");
  if (!(range.lo < range.hi)) throw ArgumentError("histogram: range must satisfy lo < hi");
  if (samples.empty()) throw ArgumentError("histogram: no samples");
  if (!(eps > 0.0)) throw ArgumentError("histogram: smoothing must be positive");

  CovHistogram h;
  h.domain = domain;
  h.smoothing_eps = eps;
  h.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  const double width = (range.hi - range.lo) / n_bins;
  for (int i = 0; i <= n_bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = range.lo + width * i;
  h.bin_edges.back() = range.hi;

  std::vector<double> counts(static_cast<std::size_t>(n_bins), 0.0);
  for (double v : samples) {
    const double clamped = std::clamp(v, range.lo, range.hi);
    auto idx = static_cast<long>(std::floor((clamped - range.lo) / (range.hi - range.lo) * n_bins));
    idx = std::clamp<long>(idx, 0, n_bins - 1);
    counts[static_cast<std::size_t>(idx)] += 1.0;
  }
  const double total = static_cast<double>(samples.size());
  const double norm = 1.0 + n_bins * eps;
  h.mass.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) h.mass[i] = (counts[i] / total + eps) / norm;
  return h;
}

CovHistogram cov_histogram(const GrayImage& img, CovDomain domain, Eigen::Index b, int n_bins, ValueRange range) {
  const auto samples = cov_samples(img.pixels(), domain, b);
  return make_histogram(samples, n_bins, range, domain);
}

namespace {

ValueRange finish_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ArgumentError("histogram range: non-finite samples");
  if (!(hi > lo)) hi = lo + 1.0;
  return {lo, hi};
}

}  // namespace

ValueRange shared_cov_range(std::span<const double> a, std::span<const double> b) {
  double hi = 0.0;
  for (double v : a) hi = std::max(hi, v);
  for (double v : b) hi = std::max(hi, v);
  return finish_range(0.0, hi);
}

ValueRange shared_value_range(std::span<const double> a, std::span<const double> b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  return finish_range(lo, hi);
}

double kl_distance(const CovHistogram& p, const CovHistogram& q) {
  if (p.n_bins() != q.n_bins() || p.bin_edges != q.bin_edges) {
    throw ArgumentError("kl_distance: histograms use different binning");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.mass.size(); ++i) kl += p.mass[i] * std::log(p.mass[i] / q.mass[i]);
  return kl;
}

namespace {

double kl_of_samples(std::span<const double> ref, std::span<const double> test, int n_bins, ValueRange range,
                     CovDomain domain) {
  return kl_distance(make_histogram(ref, n_bins, range, domain), make_histogram(test, n_bins, range, domain));
}

void require_same_dims(const ImageRef& ref, const ImageRef& test, const char* what) {
  if (ref.rows() != test.rows() || ref.cols() != test.cols()) {
    throw ArgumentError(std::string(what) + ": reference and test dimensions differ");
  }
}

}  // namespace

HistGlobalPair f1_f2_hist(const ImageRef& ref, const ImageRef& test, Eigen::Index b, int n_bins) {
  require_same_dims(ref, test, "f1_f2_hist");
  HistGlobalPair out;
  for (CovDomain domain : {CovDomain::Spatial, CovDomain::Frequency}) {
    const auto r = cov_samples(ref, domain, b);
    const auto t = cov_samples(test, domain, b);
    const double kl = kl_of_samples(r, t, n_bins, shared_cov_range(r, t), domain);
    (domain == CovDomain::Spatial ? out.f1 : out.f2) = kl;
  }
  return out;
}

HistGlobalPair f1_f2_hist(const GrayImage& ref, const GrayImage& test, Eigen::Index b, int n_bins) {
  return f1_f2_hist(ImageRef(ref.pixels()), ImageRef(test.pixels()), b, n_bins);
}

HistBandPair f3_f4_hist(const SvdBands<double>& ref, const SvdBands<double>& test, Band band, Eigen::Index b,
                        int n_bins) {
  if (!ref.same_shape(test)) throw ArgumentError("f3_f4_hist: reference and test dimensions differ");
  const RowMatrix<double> er = ensemble_image(ref, band, false);
  const RowMatrix<double> et = ensemble_image(test, band, false);

  HistBandPair out;
  const std::span<const double> rv(er.data(), static_cast<std::size_t>(er.size()));
  const std::span<const double> tv(et.data(), static_cast<std::size_t>(et.size()));
  out.f3 = kl_of_samples(rv, tv, n_bins, shared_value_range(rv, tv), CovDomain::Spatial);

  const auto rc = cov_samples(er, CovDomain::Frequency, b);
  const auto tc = cov_samples(et, CovDomain::Frequency, b);
  out.f4 = kl_of_samples(rc, tc, n_bins, shared_cov_range(rc, tc), CovDomain::Frequency);
  return out;
}

HistBandPair f3_f4_hist(const GrayImage& ref, const GrayImage& test, Band band, Eigen::Index b, int n_bins) {
  if (!ref.same_shape(test)) throw ArgumentError("f3_f4_hist: reference and test dimensions differ");
  return f3_f4_hist(svd_bands(ref), svd_bands(test), band, b, n_bins);
}

}  // namespace ssqp
