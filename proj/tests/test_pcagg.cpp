#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "ssqp/pcagg.hpp"
#include "ssqp/random.hpp"

using namespace ssqp;

namespace {

PreferenceMatrix two_items(double w01, double w10, double ties = 0, int assessors = 0) {
  PreferenceMatrix p = PreferenceMatrix::zeros(2, assessors > 0 ? assessors : static_cast<int>(w01 + w10 + ties));
  p.wins(0, 1) = w01;
  p.wins(1, 0) = w10;
  p.ties(0, 1) = p.ties(1, 0) = ties;
  return p;
}

// Round-robin study sampled from Bradley-Terry strengths.
PreferenceMatrix sample_bt(const Eigen::VectorXd& log_strength, int per_pair, std::uint64_t seed) {
  const auto n = log_strength.size();
  Rng rng(seed);
  PreferenceMatrix p = PreferenceMatrix::zeros(n, per_pair);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double pij = 1.0 / (1.0 + std::exp(log_strength(j) - log_strength(i)));
      for (int k = 0; k < per_pair; ++k) (uniform_unit(rng) < pij ? p.wins(i, j) : p.wins(j, i)) += 1;
    }
  }
  return p;
}

std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

PreferenceMatrix permuted(const PreferenceMatrix& p, const std::vector<Eigen::Index>& perm) {
  PreferenceMatrix q = PreferenceMatrix::zeros(p.n_items(), p.n_assessors);
  for (Eigen::Index i = 0; i < p.n_items(); ++i) {
    for (Eigen::Index j = 0; j < p.n_items(); ++j) {
      q.wins(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = p.wins(i, j);
      q.ties(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = p.ties(i, j);
    }
  }
  return q;
}

}  // namespace

TEST_CASE("counts MOS anchoring") {
  const Eigen::VectorXd mos = counts_mos(two_items(20, 0));
  CHECK(mos(0) == doctest::Approx(20.0));
  CHECK(mos(1) == doctest::Approx(0.0));
  const Eigen::VectorXd scaled = counts_mos(two_items(20, 0), 5.0);
  CHECK(scaled(0) == doctest::Approx(5.0));
}

TEST_CASE("all ties give equal scores everywhere") {
  PreferenceMatrix p = PreferenceMatrix::zeros(4, 10);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) p.ties(i, j) = 10;
  const auto agg = aggregate(p);
  for (int i = 1; i < 4; ++i) {
    CHECK(agg.counts_mos(i) == doctest::Approx(agg.counts_mos(0)));
    CHECK(std::abs(agg.bt_scores(i)) < 1e-9);
    CHECK(std::abs(agg.tm_scores(i)) < 1e-9);
  }
}

TEST_CASE("aggregators are label-equivariant") {
  Eigen::VectorXd truth(6);
  truth << 0.3, -1.0, 1.2, 0.0, -0.4, 0.8;
  PreferenceMatrix p = sample_bt(truth, 30, 4);
  p.ties(0, 3) = p.ties(3, 0) = 2;
  p.n_assessors = 40;
  const std::vector<Eigen::Index> perm{3, 5, 0, 1, 4, 2};
  const auto a = aggregate(p);
  const auto b = aggregate(permuted(p, perm));
  for (Eigen::Index i = 0; i < 6; ++i) {
    const auto k = perm[static_cast<std::size_t>(i)];
    CHECK(b.counts_mos(k) == doctest::Approx(a.counts_mos(i)).epsilon(1e-12));
    CHECK(b.bt_scores(k) == doctest::Approx(a.bt_scores(i)).epsilon(1e-6));
    CHECK(b.tm_scores(k) == doctest::Approx(a.tm_scores(i)).epsilon(1e-9));
  }
}

TEST_CASE("counts MOS never drops when an item gains a win") {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    PreferenceMatrix p = PreferenceMatrix::zeros(5, 50);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) p.wins(i, j) = static_cast<double>(uniform_below(rng, 10));
    const Eigen::VectorXd before = counts_mos(p);
    const auto i = static_cast<Eigen::Index>(uniform_below(rng, 5));
    const auto j = (i + 1 + static_cast<Eigen::Index>(uniform_below(rng, 4))) % 5;
    p.wins(i, j) += 1;
    CHECK(counts_mos(p)(i) >= before(i) - 1e-12);
  }
}

TEST_CASE("two-item Bradley-Terry closed form") {
  const auto bt = bradley_terry(two_items(15, 5));
  CHECK(bt.converged);
  CHECK(std::abs(bt.scores(0) - bt.scores(1) - std::log(3.0)) < 1e-6);
  CHECK(std::abs(bt.scores.sum()) < 1e-12);
  const Eigen::VectorXd s = bt_strengths(bt);
  CHECK(s.sum() == doctest::Approx(2.0));
  CHECK(s(0) / s(1) == doctest::Approx(3.0).epsilon(1e-6));
  // A tie is half a win each way: 14 + 1/2 against 4 + 1/2.
  const auto tied = bradley_terry(two_items(14, 4, 1));
  CHECK(std::abs(tied.scores(0) - tied.scores(1) - std::log(14.5 / 4.5)) < 1e-6);
}

TEST_CASE("symmetric wins give zero Bradley-Terry scores") {
  PreferenceMatrix p = PreferenceMatrix::zeros(5, 20);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) p.wins(i, j) = 7;
  const auto bt = bradley_terry(p);
  CHECK(bt.scores.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Bradley-Terry recovers generating strengths") {
  Eigen::VectorXd truth(10);
  truth << -1.5, 0.2, 1.1, -0.6, 0.9, -0.1, 1.8, -1.0, 0.5, 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto bt = bradley_terry(sample_bt(truth, 200, seed));
    CHECK(testing::loop_spearman(as_vec(bt.scores), as_vec(truth)) >= 0.95);
  }
}

TEST_CASE("all-loss items hit the floor and are flagged") {
  PreferenceMatrix p = PreferenceMatrix::zeros(3, 10);
  p.wins(0, 1) = 6;
  p.wins(1, 0) = 4;
  p.wins(0, 2) = 10;
  p.wins(1, 2) = 10;
  const auto bt = bradley_terry(p);
  CHECK(bt.at_floor[2]);
  CHECK_FALSE(bt.at_floor[0]);
  CHECK(bt.scores(2) < bt.scores(1));
  CHECK(std::isfinite(bt.scores(2)));
  CHECK_FALSE(bt.warnings.empty());
}

TEST_CASE("disconnected comparison graph is fitted per component") {
  PreferenceMatrix p = PreferenceMatrix::zeros(4, 20);
  p.wins(0, 1) = 15;
  p.wins(1, 0) = 5;
  p.wins(2, 3) = 4;
  p.wins(3, 2) = 16;
  const auto bt = bradley_terry(p);
  CHECK(bt.component[0] == bt.component[1]);
  CHECK(bt.component[2] == bt.component[3]);
  CHECK(bt.component[0] != bt.component[2]);
  CHECK_FALSE(bt.warnings.empty());
  CHECK(bt.scores(0) + bt.scores(1) == doctest::Approx(0.0));
  CHECK(bt.scores(0) - bt.scores(1) == doctest::Approx(std::log(3.0)).epsilon(1e-6));
  CHECK(bt.scores(3) - bt.scores(2) == doctest::Approx(std::log(4.0)).epsilon(1e-6));
  const auto tm = thurstone_mosteller(p);
  CHECK_FALSE(tm.warnings.empty());
}

TEST_CASE("Thurstone-Mosteller examples") {
  const auto even = thurstone_mosteller(two_items(10, 10));
  CHECK(std::abs(even.scores(0)) < 1e-12);
  CHECK(std::abs(even.scores(1)) < 1e-12);
  const auto tm = thurstone_mosteller(two_items(841, 159));
  CHECK(std::abs(tm.scores(0) - tm.scores(1) - 1.0) < 0.01);
  const auto clamped = thurstone_mosteller(two_items(20, 0));
  CHECK(clamped.scores(0) - clamped.scores(1) == doctest::Approx(inverse_normal_cdf(0.99)).epsilon(1e-12));
}

TEST_CASE("inverse normal CDF") {
  for (double p : {1e-10, 0.001, 0.02, 0.1, 0.3, 0.5, 0.7, 0.97, 0.999, 1 - 1e-9}) {
    const double x = inverse_normal_cdf(p);
    CHECK(0.5 * std::erfc(-x / std::sqrt(2.0)) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(inverse_normal_cdf(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK(inverse_normal_cdf(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_normal_cdf(0.0), ArgumentError);
  CHECK_THROWS_AS(inverse_normal_cdf(1.0), ArgumentError);
}

TEST_CASE("models agree on consistent data") {
  Eigen::VectorXd truth(10);
  truth << -1.5, 0.2, 1.1, -0.6, 0.9, -0.1, 1.8, -1.0, 0.5, 0.0;
  const auto agg = aggregate(sample_bt(truth, 200, 77));
  CHECK(testing::loop_pearson(as_vec(agg.counts_mos), as_vec(agg.bt_scores)) >= 0.95);
  CHECK(testing::loop_spearman(as_vec(agg.tm_scores), as_vec(agg.bt_scores)) >= 0.95);
  CHECK(agg.bt_strengths.sum() == doctest::Approx(10.0));
  CHECK(agg.counts_mos.minCoeff() >= 0.0);
}

TEST_CASE("validation") {
  PreferenceMatrix p = two_items(15, 10, 0, 20);
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p = two_items(1, 1);
  p.wins(0, 0) = 1;
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p = two_items(1, 1);
  p.ties(0, 1) = 1;
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p = two_items(1, -1);
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  CHECK_THROWS_AS(PreferenceMatrix::zeros(1, 3).validate(), ArgumentError);
}

TEST_CASE("never-compared items are missing") {
  PreferenceMatrix p = PreferenceMatrix::zeros(3, 10);
  p.wins(0, 1) = 6;
  p.wins(1, 0) = 4;
  const auto agg = aggregate(p);
  CHECK(std::isnan(agg.counts_mos(2)));
  CHECK_FALSE(agg.warnings.empty());
  const std::string csv = aggregated_csv(agg);
  CHECK(csv.find("\n2,,") != std::string::npos);
}

TEST_CASE("preference CSV") {
  const auto p = parse_preference_csv("i,j,wins_ij,wins_ji,ties\n0,1,20,0,0\n");
  CHECK(p.n_items() == 2);
  CHECK(p.n_assessors == 20);
  CHECK(p.wins(0, 1) == 20);
  const auto agg = aggregate(p);
  CHECK(agg.counts_mos(0) == doctest::Approx(20.0));
  CHECK(agg.counts_mos(1) == doctest::Approx(0.0));
  CHECK(aggregated_csv(agg).rfind("item,counts_mos,bt_score,bt_strength,tm_score\n0,20,", 0) == 0);

  const auto q = parse_preference_csv("i,j,wins_ij,wins_ji,ties\n0,1,3,2,1\n1,0,1,0,0\n2,0,4,4,2\n", 12);
  CHECK(q.n_items() == 3);
  CHECK(q.n_assessors == 12);
  CHECK(q.wins(0, 1) == 3);
  CHECK(q.wins(1, 0) == 3);
  CHECK(q.ties(1, 0) == 1);
  CHECK(q.ties(0, 2) == 2);
  CHECK_THROWS_AS(parse_preference_csv("i,j,wins_ij,wins_ji,ties\n0,0,1,1,0\n"), ParseError);
  CHECK_THROWS_AS(parse_preference_csv("i,j,wins_ij,wins_ji,ties\n0,1,1.5,1,0\n"), ParseError);
  CHECK_THROWS_AS(parse_preference_csv("i,j,wins\n0,1,1\n"), ParseError);
}
