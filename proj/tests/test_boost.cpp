#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "ssqp/boost.hpp"
#include "synthetic.hpp"

using namespace ssqp;
namespace fs = std::filesystem;

namespace {

BoostOptions small_grid() {
  BoostOptions o;
  o.hyper = SvrHyperparams{0.5, {1.0, 8.0, 64.0}, {0.25, 1.0, 4.0}, 5};
  return o;
}

ExtractionConfig block_cfg() { return ExtractionConfig{}; }

// Random feature rows whose MOS is a monotone function of the F4svd group.
TrainingSet feature_driven_set(int n_contents, int per_content, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet set;
  for (int c = 0; c < n_contents; ++c) {
    for (int k = 0; k < per_content; ++k) {
      FeatureGroupSet::Values v;
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = uniform_unit(rng);
      FeatureGroupSet f(v, ExtractionMode::BlockAverage);
      const double drive = f.group(FeatureGroup::F4svd).sum();
      set.rows.push_back({f, 100.0 / (1.0 + std::exp(2.0 * (drive - 1.5))), "c" + std::to_string(c)});
    }
  }
  return set;
}

TrainingSet extract_set(const std::vector<LabeledPair>& pairs, const ExtractionConfig& cfg) {
  TrainingSet set;
  for (const auto& p : pairs) set.rows.push_back({extract_features(p.ref, p.test, cfg), p.mos, p.content_id});
  return set;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ssqp_test_boost";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("held-out accuracy when MOS follows one feature group") {
  const TrainingSet all = feature_driven_set(10, 10, 1);
  TrainingSet train, test;
  for (const auto& r : all.rows) (r.content_id < "c8" ? train : test).rows.push_back(r);
  const SsqpModel m = train_ssqp(train, block_cfg(), small_grid(), 3);
  std::vector<double> pred, mos;
  for (const auto& r : test.rows) {
    pred.push_back(predict_ssqp(m, r.features));
    mos.push_back(r.mos);
  }
  CHECK(testing::loop_pearson(pred, mos) > 0.95);
}

TEST_CASE("constant MOS gives a constant predictor") {
  TrainingSet set = feature_driven_set(3, 5, 2);
  for (auto& r : set.rows) r.mos = 42.0;
  const SsqpModel m = train_ssqp(set, block_cfg(), small_grid(), 0);
  for (const auto& r : feature_driven_set(2, 3, 99).rows) CHECK(predict_ssqp(m, r.features) == 42.0);
}

TEST_CASE("training is deterministic and independent of row order") {
  const TrainingSet set = feature_driven_set(4, 6, 3);
  const auto a = serialize_model(train_ssqp(set, block_cfg(), small_grid(), 17));
  CHECK(a == serialize_model(train_ssqp(set, block_cfg(), small_grid(), 17)));
  TrainingSet shuffled = set;
  std::reverse(shuffled.rows.begin(), shuffled.rows.end());
  std::rotate(shuffled.rows.begin(), shuffled.rows.begin() + 5, shuffled.rows.end());
  CHECK(a == serialize_model(train_ssqp(shuffled, block_cfg(), small_grid(), 17)));
  BoostOptions threaded = small_grid();
  threaded.jobs = 4;
  CHECK(a == serialize_model(train_ssqp(set, block_cfg(), threaded, 17)));
}

TEST_CASE("out-of-fold stacking trains and differs from in-sample") {
  const TrainingSet set = feature_driven_set(4, 6, 4);
  BoostOptions oof = small_grid();
  oof.stacking = StackingMode::OutOfFold;
  const SsqpModel m = train_ssqp(set, block_cfg(), oof, 5);
  CHECK(m.stacking == StackingMode::OutOfFold);
  CHECK(std::isfinite(predict_ssqp(m, set.rows[0].features)));
  CHECK(parse_stacking(stacking_name(StackingMode::OutOfFold)) == StackingMode::OutOfFold);
  CHECK_THROWS_AS(parse_stacking("both"), ArgumentError);
}

TEST_CASE("stage composition equals manual chaining") {
  const TrainingSet set = feature_driven_set(4, 6, 5);
  const SsqpModel m = train_ssqp(set, block_cfg(), small_grid(), 6);
  for (const auto& r : feature_driven_set(1, 5, 7).rows) {
    Eigen::VectorXd s1(8);
    for (std::size_t gi = 0; gi < 8; ++gi) s1(static_cast<Eigen::Index>(gi)) = predict(m.stage1[gi], r.features.group(kAllGroups[gi]));
    const double svd = predict(m.stage2_svd, Eigen::VectorXd(s1.head(4)));
    const double hist = predict(m.stage2_hist, Eigen::VectorXd(s1.tail(4)));
    const double final_score = predict(m.stage3, Eigen::Vector2d(svd, hist));
    const StageScores s = stage_scores(m, r.features);
    CHECK(s.stage1 == s1);
    CHECK(s.svd_family == svd);
    CHECK(s.hist_family == hist);
    CHECK(s.final_score == final_score);
    CHECK(predict_ssqp(m, r.features) == final_score);
  }
}

TEST_CASE("training preconditions") {
  TrainingSet one_content = feature_driven_set(1, 8, 8);
  CHECK_THROWS_AS(train_ssqp(one_content, block_cfg(), small_grid(), 0), ArgumentError);
  TrainingSet few = feature_driven_set(2, 2, 8);
  CHECK_THROWS_AS(train_ssqp(few, block_cfg(), small_grid(), 0), ArgumentError);
  TrainingSet wrong_mode = feature_driven_set(2, 4, 8);
  ExtractionConfig full;
  full.mode = ExtractionMode::FullFrame;
  CHECK_THROWS_AS(train_ssqp(wrong_mode, full, small_grid(), 0), ArgumentError);
}

TEST_CASE("image-level predictions on a synthetic database") {
  const auto pairs = testing::synthetic_database(5, 32, 11);
  const SsqpModel m = train_ssqp(extract_set(pairs, block_cfg()), block_cfg(), small_grid(), 12);
  double lo = 1e300, hi = -1e300;
  for (const auto& p : pairs) lo = std::min(lo, p.mos), hi = std::max(hi, p.mos);

  const GrayImage ref = testing::procedural_texture(32, 32, 555);
  const double identity = predict_ssqp(m, ref, ref);
  CHECK(identity >= hi - 0.1 * (hi - lo));
  CHECK(identity == predict_ssqp(m, ref, ref));

  const double mild = predict_ssqp(m, ref, testing::distort(ref, testing::Distortion::Noise, 1, 1));
  const double severe = predict_ssqp(m, ref, testing::distort(ref, testing::Distortion::Noise, 3, 1));
  CHECK(mild > severe);
}

TEST_CASE("final stage is no worse than the best single group") {
  const auto pairs = testing::synthetic_database(6, 32, 21);
  const TrainingSet all = extract_set(pairs, block_cfg());
  const auto ids = all.content_ids();
  std::vector<double> final_sq, mos;
  std::vector<std::vector<double>> group_sq(8);
  for (std::size_t f = 0; f < 3; ++f) {
    TrainingSet train;
    std::vector<const TrainingRow*> held;
    for (const auto& r : all.rows) {
      const auto pos = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), r.content_id) - ids.begin());
      if (pos % 3 == f) {
        held.push_back(&r);
      } else {
        train.rows.push_back(r);
      }
    }
    const SsqpModel m = train_ssqp(train, block_cfg(), small_grid(), 30 + f);
    for (const TrainingRow* r : held) {
      const StageScores s = stage_scores(m, r->features);
      final_sq.push_back(std::pow(s.final_score - r->mos, 2));
      for (int g = 0; g < 8; ++g) group_sq[static_cast<std::size_t>(g)].push_back(std::pow(s.stage1(g) - r->mos, 2));
    }
  }
  auto rmse = [](const std::vector<double>& sq) {
    double s = 0;
    for (double v : sq) s += v;
    return std::sqrt(s / static_cast<double>(sq.size()));
  };
  double best = 1e300;
  for (const auto& g : group_sq) best = std::min(best, rmse(g));
  MESSAGE("stage III CV RMSE " << rmse(final_sq) << ", best stage I " << best);
  CHECK(rmse(final_sq) <= 1.1 * best);
}

TEST_CASE("model files round-trip exactly") {
  const TrainingSet set = feature_driven_set(4, 6, 9);
  const SsqpModel m = train_ssqp(set, block_cfg(), small_grid(), 10);
  const auto path = scratch("model.json");
  save_model(m, path);
  const SsqpModel back = load_model(path);
  for (const auto& r : feature_driven_set(2, 5, 10).rows) CHECK(predict_ssqp(back, r.features) == predict_ssqp(m, r.features));
  CHECK(serialize_model(back) == serialize_model(m));
  CHECK(describe_model(back).find("stage III") != std::string::npos);
}

TEST_CASE("damaged or foreign model files") {
  const SsqpModel m = train_ssqp(feature_driven_set(3, 5, 11), block_cfg(), small_grid(), 1);
  const std::string text = serialize_model(m);
  CHECK_THROWS_AS(parse_model(text.substr(0, text.size() / 2)), ParseError);
  CHECK_THROWS_AS(parse_model("{}"), ParseError);

  const auto truncated = scratch("truncated.json");
  std::ofstream(truncated) << text.substr(0, text.size() - 10);
  CHECK_THROWS_AS(load_model(truncated), ParseError);
  CHECK_THROWS_AS(load_model(scratch("missing.json")), IoError);

  std::string old = text;
  const std::string key = "\"schema_version\": 1";
  const auto pos = old.find(key);
  REQUIRE(pos != std::string::npos);
  old.replace(pos, key.size(), "\"schema_version\": 0");
  try {
    parse_model(old);
    FAIL("expected an incompatibility error");
  } catch (const IncompatibleVersionError& e) {
    const std::string what = e.what();
    CHECK(what.find("schema_version 0") != std::string::npos);
    CHECK(what.find("schema_version 1") != std::string::npos);
  }
}
