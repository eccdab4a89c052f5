#include "ssqp/pipeline.hpp"

#include <string>

#include "ssqp/hist_features.hpp"
#include "ssqp/svd_features.hpp"

namespace ssqp {

std::string_view mode_name(ExtractionMode mode) {
  return mode == ExtractionMode::FullFrame ? "full" : "block";
}

ExtractionMode parse_mode(std::string_view name) {
  if (name == "full") return ExtractionMode::FullFrame;
  if (name == "block") return ExtractionMode::BlockAverage;
  throw ArgumentError("unknown extraction mode '" + std::string(name) + "' (expected full or block)");
}

std::string_view group_name(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::F1svd: return "F1svd";
    case FeatureGroup::F2svd: return "F2svd";
    case FeatureGroup::F3svd: return "F3svd";
    case FeatureGroup::F4svd: return "F4svd";
    case FeatureGroup::F1hist: return "F1hist";
    case FeatureGroup::F2hist: return "F2hist";
    case FeatureGroup::F3hist: return "F3hist";
    case FeatureGroup::F4hist: return "F4hist";
  }
  return "?";
}

Eigen::Index group_dim(FeatureGroup g) {
  return (g == FeatureGroup::F1hist || g == FeatureGroup::F2hist) ? 1 : 3;
}

Eigen::Index group_offset(FeatureGroup g) {
  static constexpr std::array<Eigen::Index, 8> kOffsets{0, 3, 6, 9, 12, 13, 14, 17};
  return kOffsets[static_cast<std::size_t>(g)];
}

bool is_svd_group(FeatureGroup g) { return static_cast<int>(g) < 4; }

void ExtractionConfig::validate() const {
  if (svd_block < kMinRelaxedExtent) throw ArgumentError("config: svd_block must be >= 3");
  if (hist_block < 2) throw ArgumentError("config: hist_block must be >= 2");
  if (hist_kl_region < hist_block || hist_kl_region % hist_block != 0) {
    throw ArgumentError("config: hist_kl_region must be a multiple of hist_block");
  }
  if (hist_block > svd_block) throw ArgumentError("config: hist_block must not exceed svd_block");
  if (n_bins_full < 2 || n_bins_block < 2) throw ArgumentError("config: histograms need at least 2 bins");
}

const std::vector<std::string>& FeatureGroupSet::column_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (FeatureGroup g : kAllGroups) {
      if (group_dim(g) == 1) {
        out.push_back(std::string(group_name(g)) + ".value");
        continue;
      }
      for (Band b : kAllBands) out.push_back(std::string(group_name(g)) + "." + std::string(band_name(b)));
    }
    return out;
  }();
  return names;
}

namespace {

using Values = FeatureGroupSet::Values;

void require_same_dims(const GrayImage& ref, const GrayImage& test) {
  if (!ref.same_shape(test)) throw ArgumentError("extract: reference and test dimensions differ");
}

// Structural features plus the ensemble-histogram features, which share the SVD.
void accumulate_svd_part(const SvdBands<double>& ref, const SvdBands<double>& test, Eigen::Index hist_block,
                         int n_bins, Values& acc) {
  const auto s = svd_features(ref, test);
  for (Band b : kAllBands) {
    const auto i = band_index(b);
    const auto bi = static_cast<Eigen::Index>(i);
    acc(group_offset(FeatureGroup::F1svd) + bi) += s.f1[i];
    acc(group_offset(FeatureGroup::F2svd) + bi) += s.f2[i];
    acc(group_offset(FeatureGroup::F3svd) + bi) += s.f3[i];
    acc(group_offset(FeatureGroup::F4svd) + bi) += s.f4[i];
    const auto h = f3_f4_hist(ref, test, b, hist_block, n_bins);
    acc(group_offset(FeatureGroup::F3hist) + bi) += h.f3;
    acc(group_offset(FeatureGroup::F4hist) + bi) += h.f4;
  }
}

}  // namespace

FeatureGroupSet extract_full_frame(const GrayImage& ref, const GrayImage& test, const ExtractionConfig& cfg) {
  cfg.validate();
  require_same_dims(ref, test);
  if (std::min(ref.height(), ref.width()) < kMinBandExtent) {
    throw ArgumentError("extract_full_frame: images must be at least 6 pixels on each side");
  }
  Values v = Values::Zero();
  accumulate_svd_part(svd_bands(ref.pixels()), svd_bands(test.pixels()), cfg.hist_block, cfg.n_bins_full, v);
  const auto h = f1_f2_hist(ref, test, cfg.hist_block, cfg.n_bins_full);
  v(group_offset(FeatureGroup::F1hist)) = h.f1;
  v(group_offset(FeatureGroup::F2hist)) = h.f2;
  return FeatureGroupSet(v, ExtractionMode::FullFrame);
}

FeatureGroupSet extract_block_average(const GrayImage& ref, const GrayImage& test, const ExtractionConfig& cfg) {
  cfg.validate();
  require_same_dims(ref, test);
  const Eigen::Index extent = std::min(ref.height(), ref.width());
  if (extent < cfg.svd_block || extent < cfg.hist_kl_region) {
    throw ArgumentError("extract_block_average: image smaller than the configured block size");
  }

  Values svd_acc = Values::Zero();
  const Eigen::Index sb = cfg.svd_block;
  const Eigen::Index svd_rows = ref.height() / sb;
  const Eigen::Index svd_cols = ref.width() / sb;
  for (Eigen::Index br = 0; br < svd_rows; ++br) {
    for (Eigen::Index bc = 0; bc < svd_cols; ++bc) {
      const auto rb = svd_bands(ref.pixels().block(br * sb, bc * sb, sb, sb), kMinRelaxedExtent);
      const auto tb = svd_bands(test.pixels().block(br * sb, bc * sb, sb, sb), kMinRelaxedExtent);
      accumulate_svd_part(rb, tb, cfg.hist_block, cfg.n_bins_block, svd_acc);
    }
  }
  svd_acc /= static_cast<double>(svd_rows * svd_cols);

  const Eigen::Index rs = cfg.hist_kl_region;
  const Eigen::Index region_rows = ref.height() / rs;
  const Eigen::Index region_cols = ref.width() / rs;
  double f1 = 0.0;
  double f2 = 0.0;
  for (Eigen::Index br = 0; br < region_rows; ++br) {
    for (Eigen::Index bc = 0; bc < region_cols; ++bc) {
      const auto h = f1_f2_hist(ImageRef(ref.pixels().block(br * rs, bc * rs, rs, rs)),
                                ImageRef(test.pixels().block(br * rs, bc * rs, rs, rs)), cfg.hist_block,
                                cfg.n_bins_block);
      f1 += h.f1;
      f2 += h.f2;
    }
  }
  const auto regions = static_cast<double>(region_rows * region_cols);
  svd_acc(group_offset(FeatureGroup::F1hist)) = f1 / regions;
  svd_acc(group_offset(FeatureGroup::F2hist)) = f2 / regions;
  return FeatureGroupSet(svd_acc, ExtractionMode::BlockAverage);
}

FeatureGroupSet extract_features(const GrayImage& ref, const GrayImage& test, const ExtractionConfig& cfg) {
  return cfg.mode == ExtractionMode::FullFrame ? extract_full_frame(ref, test, cfg)
                                               : extract_block_average(ref, test, cfg);
}

}  // namespace ssqp
