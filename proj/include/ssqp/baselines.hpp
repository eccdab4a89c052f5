#pragma once

#include <string>

#include "ssqp/image.hpp"

namespace ssqp {

// Value reported in place of +inf for identical images.
inline constexpr double kPsnrCap = 100.0;

struct BaselineScore {
  std::string metric_name;
  double value = 0.0;
  bool higher_is_better = true;
};

// 10 log10(255^2 / MSE); +inf when the images are identical.
double psnr(const GrayImage& ref, const GrayImage& test);
inline double capped_psnr(double db) { return db > kPsnrCap ? kPsnrCap : db; }

// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, L = 255, mean of the map over all valid window positions.
double ssim(const GrayImage& ref, const GrayImage& test);

BaselineScore psnr_score(const GrayImage& ref, const GrayImage& test);
BaselineScore ssim_score(const GrayImage& ref, const GrayImage& test);

}  // namespace ssqp
