#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"
#include "ssqp/eval.hpp"
#include "synthetic.hpp"

using namespace ssqp;

namespace {

BoostOptions small_grid() {
  BoostOptions o;
  o.hyper = SvrHyperparams{0.5, {1.0, 8.0, 64.0}, {0.25, 1.0, 4.0}, 5};
  return o;
}

// Rows whose MOS is a smooth function of the F1svd group: every content
// carries the full MOS range.
TrainingSet separable_set(int n_contents, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet set;
  for (int c = 0; c < n_contents; ++c) {
    for (int k = 0; k < 8; ++k) {
      FeatureGroupSet::Values v;
      for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = uniform_unit(rng);
      const double severity = (k + uniform_unit(rng)) / 8.0;
      for (Eigen::Index i = 0; i < 12; ++i) v(i) = severity + 0.01 * uniform_unit(rng);
      set.rows.push_back({FeatureGroupSet(v, ExtractionMode::BlockAverage), 100.0 - 80.0 * severity,
                          "c" + std::to_string(c)});
    }
  }
  return set;
}

bool monotone(const LogisticParams& beta, double lo, double hi) {
  const double sign = beta[0] >= beta[1] ? 1.0 : -1.0;
  double prev = logistic(beta, lo);
  for (int i = 1; i <= 1000; ++i) {
    const double cur = logistic(beta, lo + (hi - lo) * i / 1000.0);
    if (sign * (cur - prev) < -1e-12) return false;
    prev = cur;
  }
  return true;
}

}  // namespace

TEST_CASE("logistic recovers its own curve") {
  const LogisticParams truth{20, 0, 0.5, 0.1};
  std::vector<double> s, m;
  for (int i = 0; i < 60; ++i) {
    s.push_back(i / 59.0);
    m.push_back(logistic(truth, s.back()));
  }
  const LogisticFit fit = fit_logistic(s, m);
  std::vector<double> mapped;
  for (double x : s) mapped.push_back(fit(x));
  CHECK(rmse(mapped, m) < 1e-4);
  CHECK(monotone(fit.beta, 0.0, 1.0));
}

TEST_CASE("logistic fits linear data") {
  std::vector<double> s, m;
  for (int i = 0; i < 40; ++i) {
    s.push_back(i);
    m.push_back(10.0 + 0.5 * i);
  }
  const LogisticFit fit = fit_logistic(s, m);
  std::vector<double> mapped;
  for (double x : s) mapped.push_back(fit(x));
  CHECK(rmse(mapped, m) < 1e-3);
}

TEST_CASE("logistic on constant MOS is flat") {
  const std::vector<double> s{1, 2, 3, 4, 5, 6};
  const std::vector<double> m(6, 7.5);
  const LogisticFit fit = fit_logistic(s, m);
  for (double x : s) CHECK(std::abs(fit(x) - 7.5) < 1e-6);
}

TEST_CASE("logistic preconditions") {
  CHECK_THROWS_AS(fit_logistic(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}), ArgumentError);
  CHECK_THROWS_AS(fit_logistic(std::vector<double>(6, 1.0), std::vector<double>{1, 2, 3, 4, 5, 6}),
                  DegenerateDataError);
  // |b4| makes the sign of the slope parameter irrelevant.
  const LogisticParams a{5, 1, 0, 2};
  const LogisticParams b{5, 1, 0, -2};
  CHECK(logistic(a, 0.7) == logistic(b, 0.7));
}

TEST_CASE("correlation examples") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> r{3, 2, 1};
  CHECK(pcc(a, a) == doctest::Approx(1.0));
  CHECK(srocc(a, a) == doctest::Approx(1.0));
  CHECK(rmse(a, a) == 0.0);
  CHECK(pcc(a, r) == doctest::Approx(-1.0));
  CHECK(srocc(a, r) == doctest::Approx(-1.0));
  const std::vector<double> x{1, 2, 2, 3};
  const std::vector<double> y{1, 2, 3, 3};
  CHECK(srocc(x, y) == doctest::Approx(testing::loop_spearman(x, y)).epsilon(1e-14));
  CHECK(average_ranks(x) == std::vector<double>{1, 2.5, 2.5, 4});
  CHECK_THROWS_AS(pcc(std::vector<double>{1, 1}, std::vector<double>{1, 2}), DegenerateDataError);
  CHECK_THROWS_AS(pcc(std::vector<double>{1}, std::vector<double>{1}), ArgumentError);
}

TEST_CASE("correlation invariances and oracles on random data") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(30), b(30);
    for (auto& v : a) v = uniform_unit(rng);
    for (auto& v : b) v = uniform_unit(rng) + 0.5 * a[static_cast<std::size_t>(&v - b.data())];
    std::vector<double> affine, warped;
    for (double v : a) {
      affine.push_back(3.0 * v - 7.0);
      warped.push_back(std::exp(5.0 * v));
    }
    CHECK(pcc(a, b) == doctest::Approx(testing::loop_pearson(a, b)).epsilon(1e-12));
    CHECK(srocc(a, b) == doctest::Approx(testing::loop_spearman(a, b)).epsilon(1e-12));
    CHECK(pcc(affine, b) == doctest::Approx(pcc(a, b)).epsilon(1e-12));
    CHECK(srocc(warped, b) == doctest::Approx(srocc(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("median is order-invariant") {
  std::vector<double> v{5, 1, 4, 2, 3, 9};
  const double m = median(v);
  CHECK(m == 3.5);
  std::reverse(v.begin(), v.end());
  CHECK(median(v) == m);
  CHECK(median({7.0}) == 7.0);
  CHECK_THROWS_AS(median({}), ArgumentError);
}

TEST_CASE("content split sizes and exclusivity") {
  std::vector<std::string> ids;
  for (int i = 0; i < 9; ++i) ids.push_back("c" + std::to_string(i));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto split = split_contents(ids, 0.8, s);
    CHECK(split.train.size() == 7);
    CHECK(split.test.size() == 2);
    std::set<std::string> all(split.train.begin(), split.train.end());
    for (const auto& id : split.test) CHECK(all.insert(id).second);
    CHECK(all.size() == 9);
  }
  CHECK(split_contents({"a", "b"}, 0.8, 0).train.size() == 1);
  CHECK(split_contents({"a", "b", "c", "d", "e"}, 0.8, 0).train.size() == 4);
  CHECK_THROWS_AS(split_contents({"a"}, 0.8, 0), ArgumentError);
}

TEST_CASE("degenerate predictions are recorded, not thrown") {
  const std::vector<double> flat(6, 1.0);
  const std::vector<double> mos{1, 2, 3, 4, 5, 6};
  const TrialResult t = score_predictions(flat, mos);
  CHECK(t.degenerate);
  CHECK(t.pcc == 0.0);
  CHECK(t.rmse == doctest::Approx(rmse(std::vector<double>(6, 3.5), mos)));
}

TEST_CASE("split protocol on separable data") {
  const TrainingSet set = separable_set(6, 1);
  SplitProtocolOptions o;
  o.n_trials = 1;
  o.boost = small_grid();
  const EvalReport r = split_protocol(set, ExtractionConfig{}, o, 5);
  CHECK(r.pcc > 0.95);
  CHECK(r.n_trials == 1);
  CHECK(r.aggregation == "median");
}

TEST_CASE("split protocol is reproducible and content-exclusive") {
  const TrainingSet set = separable_set(5, 2);
  SplitProtocolOptions o;
  o.n_trials = 4;
  o.boost = small_grid();
  const EvalReport a = split_protocol(set, ExtractionConfig{}, o, 9);
  o.jobs = 3;
  const EvalReport b = split_protocol(set, ExtractionConfig{}, o, 9);
  CHECK(report_csv(a) == report_csv(b));
  CHECK(per_trial_csv(a) == per_trial_csv(b));
  for (const auto& t : a.per_trial) {
    for (const auto& id : t.split.test) {
      CHECK(std::find(t.split.train.begin(), t.split.train.end(), id) == t.split.train.end());
    }
    CHECK(t.pcc >= -1.0);
    CHECK(t.pcc <= 1.0);
    CHECK(t.rmse >= 0.0);
    if (!t.degenerate) CHECK(monotone(t.logistic, t.score_min, t.score_max));
  }
  CHECK(report_csv(a).rfind("n_trials,aggregation,pcc,srocc,rmse\n4,median,", 0) == 0);
}

TEST_CASE("block-size sweep fills every cell") {
  const auto pairs = testing::synthetic_database(4, 40, 3);
  std::vector<ExtractionConfig> cfgs;
  for (Eigen::Index b : {5, 10, 20}) {
    ExtractionConfig c;
    c.svd_block = b;
    cfgs.push_back(c);
  }
  const auto rows = block_size_sweep(pairs, cfgs, small_grid(), 4, 1);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    for (double v : {r.svd_pcc, r.svd_srocc, r.hist_pcc, r.hist_srocc, r.ssqp_pcc, r.ssqp_srocc}) {
      CHECK(std::isfinite(v));
    }
  }
  const std::string table = sweep_table(rows);
  CHECK(table.find("20x20") != std::string::npos);
  const std::string csv = sweep_csv(rows);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
