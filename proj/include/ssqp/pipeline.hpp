#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "ssqp/image.hpp"

namespace ssqp {

enum class ExtractionMode { FullFrame, BlockAverage };

std::string_view mode_name(ExtractionMode mode);
ExtractionMode parse_mode(std::string_view name);

enum class FeatureGroup { F1svd, F2svd, F3svd, F4svd, F1hist, F2hist, F3hist, F4hist };

inline constexpr std::array<FeatureGroup, 8> kAllGroups{
    FeatureGroup::F1svd,  FeatureGroup::F2svd,  FeatureGroup::F3svd,  FeatureGroup::F4svd,
    FeatureGroup::F1hist, FeatureGroup::F2hist, FeatureGroup::F3hist, FeatureGroup::F4hist};

inline constexpr Eigen::Index kFeatureCount = 20;

std::string_view group_name(FeatureGroup g);
Eigen::Index group_dim(FeatureGroup g);
Eigen::Index group_offset(FeatureGroup g);
bool is_svd_group(FeatureGroup g);

struct ExtractionConfig {
  Eigen::Index svd_block = 10;
  Eigen::Index hist_block = 5;
  Eigen::Index hist_kl_region = 10;
  int n_bins_full = 64;
  int n_bins_block = 8;
  ExtractionMode mode = ExtractionMode::BlockAverage;

  void validate() const;
  friend bool operator==(const ExtractionConfig&, const ExtractionConfig&) = default;
};

// The 20 features in fixed order: F1svd..F4svd (LB, MB, HB each), F1hist,
// F2hist, F3hist (LB, MB, HB), F4hist (LB, MB, HB).
class FeatureGroupSet {
 public:
  using Values = Eigen::Matrix<double, kFeatureCount, 1>;

  FeatureGroupSet() { values_.setZero(); }
  FeatureGroupSet(const Values& values, ExtractionMode mode) : values_(values), mode_(mode) {}

  Eigen::VectorXd group(FeatureGroup g) const { return values_.segment(group_offset(g), group_dim(g)); }
  double& at(FeatureGroup g, Eigen::Index component) { return values_(group_offset(g) + component); }
  double at(FeatureGroup g, Eigen::Index component) const { return values_(group_offset(g) + component); }

  const Values& values() const { return values_; }
  ExtractionMode mode() const { return mode_; }

  static const std::vector<std::string>& column_names();

  friend bool operator==(const FeatureGroupSet& a, const FeatureGroupSet& b) {
    return a.mode_ == b.mode_ && a.values_ == b.values_;
  }

 private:
  Values values_;
  ExtractionMode mode_ = ExtractionMode::FullFrame;
};

FeatureGroupSet extract_full_frame(const GrayImage& ref, const GrayImage& test, const ExtractionConfig& cfg);
FeatureGroupSet extract_block_average(const GrayImage& ref, const GrayImage& test, const ExtractionConfig& cfg);
// Dispatches on cfg.mode.
FeatureGroupSet extract_features(const GrayImage& ref, const GrayImage& test, const ExtractionConfig& cfg);

}  // namespace ssqp
