#include "ssqp/baselines.hpp"

#include <cmath>
#include <limits>

#include "ssqp/error.hpp"

namespace ssqp {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

Eigen::VectorXd gaussian_taps() {
  Eigen::VectorXd g(kWindow);
  const double c = (kWindow - 1) / 2.0;
  for (int i = 0; i < kWindow; ++i) g(i) = std::exp(-(i - c) * (i - c) / (2.0 * kSigma * kSigma));
  return g / g.sum();
}

// Separable 'valid' correlation with the Gaussian window.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& m, const Eigen::VectorXd& g) {
  const Eigen::Index h = m.rows() - kWindow + 1;
  const Eigen::Index w = m.cols() - kWindow + 1;
  Eigen::MatrixXd rows_pass = Eigen::MatrixXd::Zero(h, m.cols());
  for (int k = 0; k < kWindow; ++k) rows_pass += g(k) * m.middleRows(k, h);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h, w);
  for (int k = 0; k < kWindow; ++k) out += g(k) * rows_pass.middleCols(k, w);
  return out;
}

}  // namespace

double psnr(const GrayImage& ref, const GrayImage& test) {
  if (!ref.same_shape(test)) throw ArgumentError("psnr: image dimensions differ");
  const double mse = (ref.pixels() - test.pixels()).squaredNorm() / static_cast<double>(ref.pixels().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const GrayImage& ref, const GrayImage& test) {
  if (!ref.same_shape(test)) throw ArgumentError("ssim: image dimensions differ");
  if (std::min(ref.height(), ref.width()) < kWindow) throw ArgumentError("ssim: images must be at least 11x11");
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  const Eigen::VectorXd g = gaussian_taps();
  const Eigen::MatrixXd x = ref.pixels();
  const Eigen::MatrixXd y = test.pixels();
  const Eigen::ArrayXXd mx = filter_valid(x, g).array();
  const Eigen::ArrayXXd my = filter_valid(y, g).array();
  const Eigen::ArrayXXd sxx = filter_valid(x.cwiseProduct(x), g).array() - mx.square();
  const Eigen::ArrayXXd syy = filter_valid(y.cwiseProduct(y), g).array() - my.square();
  const Eigen::ArrayXXd sxy = filter_valid(x.cwiseProduct(y), g).array() - mx * my;
  const Eigen::ArrayXXd map =
      ((2.0 * mx * my + c1) * (2.0 * sxy + c2)) / ((mx.square() + my.square() + c1) * (sxx + syy + c2));
  return map.mean();
}

BaselineScore psnr_score(const GrayImage& ref, const GrayImage& test) {
  return {"PSNR", capped_psnr(psnr(ref, test)), true};
}

BaselineScore ssim_score(const GrayImage& ref, const GrayImage& test) { return {"SSIM", ssim(ref, test), true}; }

}  // namespace ssqp
