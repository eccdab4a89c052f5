#include <doctest.h>

#include "ssqp/hist_features.hpp"
#include "ssqp/pipeline.hpp"
#include "synthetic.hpp"

using namespace ssqp;

namespace {

void check_identity_pattern(const FeatureGroupSet& f) {
  for (FeatureGroup g : kAllGroups) {
    const auto v = f.group(g);
    const double expected = g == FeatureGroup::F3svd ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) CHECK(std::abs(v(i) - expected) < 1e-9);
  }
}

ExtractionConfig full_cfg() {
  ExtractionConfig c;
  c.mode = ExtractionMode::FullFrame;
  return c;
}

GrayImage crop(const GrayImage& img, Eigen::Index r, Eigen::Index c, Eigen::Index n) {
  return GrayImage(RowMatrix<double>(img.pixels().block(r, c, n, n)));
}

}  // namespace

TEST_CASE("feature schema") {
  const auto& names = FeatureGroupSet::column_names();
  REQUIRE(names.size() == 20);
  CHECK(names.front() == "F1svd.LB");
  CHECK(names[12] == "F1hist.value");
  CHECK(names[13] == "F2hist.value");
  CHECK(names[14] == "F3hist.LB");
  CHECK(names.back() == "F4hist.HB");
  Eigen::Index total = 0;
  for (FeatureGroup g : kAllGroups) {
    CHECK(group_offset(g) == total);
    total += group_dim(g);
  }
  CHECK(total == kFeatureCount);
  CHECK(parse_mode("full") == ExtractionMode::FullFrame);
  CHECK(parse_mode(mode_name(ExtractionMode::BlockAverage)) == ExtractionMode::BlockAverage);
  CHECK_THROWS_AS(parse_mode("tiles"), ArgumentError);
}

TEST_CASE("config validation") {
  ExtractionConfig c;
  CHECK_NOTHROW(c.validate());
  c.hist_kl_region = 12;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = ExtractionConfig{};
  c.hist_block = 1;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
  c = ExtractionConfig{};
  c.n_bins_block = 1;
  CHECK_THROWS_AS(c.validate(), ArgumentError);
}

TEST_CASE("identity pattern in both modes") {
  for (std::uint64_t s = 0; s < 3; ++s) {
    const GrayImage img = testing::procedural_texture(40, 60, s);
    check_identity_pattern(extract_full_frame(img, img, full_cfg()));
    check_identity_pattern(extract_block_average(img, img, ExtractionConfig{}));
  }
}

TEST_CASE("extraction is deterministic and finite") {
  const GrayImage ref = testing::random_image(48, 32, 1);
  const GrayImage test = testing::random_image(48, 32, 2);
  for (ExtractionMode mode : {ExtractionMode::FullFrame, ExtractionMode::BlockAverage}) {
    ExtractionConfig cfg;
    cfg.mode = mode;
    const auto a = extract_features(ref, test, cfg);
    const auto b = extract_features(ref, test, cfg);
    CHECK(a == b);
    CHECK(a.mode() == mode);
    CHECK(a.values().allFinite());
  }
}

TEST_CASE("full frame matches manual composition") {
  const GrayImage ref = testing::procedural_texture(36, 42, 4);
  const GrayImage test = testing::add_noise(ref, 12, 4);
  const auto f = extract_full_frame(ref, test, full_cfg());
  const auto rb = svd_bands(ref);
  const auto tb = svd_bands(test);
  const auto s = svd_features(rb, tb);
  const auto h = f1_f2_hist(ref, test, 5, 64);
  for (Band b : kAllBands) {
    const auto i = static_cast<Eigen::Index>(band_index(b));
    CHECK(f.at(FeatureGroup::F1svd, i) == s.f1[band_index(b)]);
    CHECK(f.at(FeatureGroup::F2svd, i) == s.f2[band_index(b)]);
    CHECK(f.at(FeatureGroup::F3svd, i) == s.f3[band_index(b)]);
    CHECK(f.at(FeatureGroup::F4svd, i) == s.f4[band_index(b)]);
    const auto hb = f3_f4_hist(ref, test, b, 5, 64);
    CHECK(f.at(FeatureGroup::F3hist, i) == hb.f3);
    CHECK(f.at(FeatureGroup::F4hist, i) == hb.f4);
  }
  CHECK(f.at(FeatureGroup::F1hist, 0) == h.f1);
  CHECK(f.at(FeatureGroup::F2hist, 0) == h.f2);
}

TEST_CASE("single-region image: block average equals the region value") {
  const GrayImage ref = testing::random_image(10, 10, 7);
  const GrayImage test = testing::random_image(10, 10, 8);
  const auto f = extract_block_average(ref, test, ExtractionConfig{});
  const auto rb = svd_bands(ref.pixels(), kMinRelaxedExtent);
  const auto tb = svd_bands(test.pixels(), kMinRelaxedExtent);
  const auto s = svd_features(rb, tb);
  CHECK(f.at(FeatureGroup::F1svd, 0) == doctest::Approx(s.f1[0]).epsilon(1e-14));
  CHECK(f.at(FeatureGroup::F4svd, 2) == doctest::Approx(s.f4[2]).epsilon(1e-14));
  CHECK(f.at(FeatureGroup::F1hist, 0) == doctest::Approx(f1_f2_hist(ref, test, 5, 8).f1).epsilon(1e-14));
}

TEST_CASE("block average pools independently computed regions") {
  const GrayImage ref = testing::procedural_texture(20, 20, 9);
  const GrayImage test = testing::gaussian_blur(ref, 1.0);
  const ExtractionConfig cfg;
  const auto pooled = extract_block_average(ref, test, cfg);
  FeatureGroupSet::Values sum = FeatureGroupSet::Values::Zero();
  for (Eigen::Index r : {0, 10}) {
    for (Eigen::Index c : {0, 10}) {
      sum += extract_block_average(crop(ref, r, c, 10), crop(test, r, c, 10), cfg).values();
    }
  }
  CHECK((pooled.values() - sum / 4.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("extraction preconditions") {
  const GrayImage a = testing::random_image(20, 20, 1);
  const GrayImage b = testing::random_image(20, 21, 1);
  CHECK_THROWS_AS(extract_full_frame(a, b, full_cfg()), ArgumentError);
  CHECK_THROWS_AS(extract_block_average(a, b, ExtractionConfig{}), ArgumentError);
  const GrayImage tiny = testing::random_image(8, 8, 1);
  CHECK_THROWS_AS(extract_block_average(tiny, tiny, ExtractionConfig{}), ArgumentError);
  const GrayImage narrow = testing::random_image(5, 30, 1);
  CHECK_THROWS_AS(extract_full_frame(narrow, narrow, full_cfg()), ArgumentError);
}
