#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ssqp {

// Group preference counts from a pairwise-comparison study.
// wins(i, j): times i was preferred over j. ties(i, j) == ties(j, i).
struct PreferenceMatrix {
  Eigen::MatrixXd wins;
  Eigen::MatrixXd ties;
  int n_assessors = 0;

  Eigen::Index n_items() const { return wins.rows(); }
  // Total comparisons between i and j.
  double comparisons(Eigen::Index i, Eigen::Index j) const { return wins(i, j) + wins(j, i) + ties(i, j); }

  static PreferenceMatrix zeros(Eigen::Index n, int n_assessors);
  void validate() const;
};

// Averaged counts: (wins + ties / 2) / (largest per-item comparison count),
// scaled so that winning every comparison scores `scale` (n_assessors when
// unset). Items never compared come back as NaN.
Eigen::VectorXd counts_mos(const PreferenceMatrix& p, std::optional<double> scale = std::nullopt);

struct PairwiseScaling {
  Eigen::VectorXd scores;              // centred within each connected component
  std::vector<int> component;          // component id per item
  std::vector<bool> at_floor;          // strength collapsed to the numerical floor
  std::vector<std::string> warnings;
  int iterations = 0;
  bool converged = true;
};

// Bradley-Terry strengths by MM iteration (ties count half a win each way),
// returned as log-strengths centred to mean zero per component.
PairwiseScaling bradley_terry(const PreferenceMatrix& p, double tolerance = 1e-8, int max_iterations = 100000);

// Bradley-Terry strengths exp(score) rescaled so they sum to the item count.
Eigen::VectorXd bt_strengths(const PairwiseScaling& bt);

// Thurstone-Mosteller Case V: least-squares scale values from probit-transformed
// win proportions (clamped to [0.01, 0.99], ties excluded), centred per component.
PairwiseScaling thurstone_mosteller(const PreferenceMatrix& p);

// Standard normal quantile.
double inverse_normal_cdf(double p);

struct AggregatedScores {
  Eigen::VectorXd counts_mos;
  Eigen::VectorXd bt_scores;
  Eigen::VectorXd bt_strengths;
  Eigen::VectorXd tm_scores;
  std::vector<std::string> warnings;
};

AggregatedScores aggregate(const PreferenceMatrix& p, std::optional<double> scale = std::nullopt);

// CSV columns i,j,wins_ij,wins_ji,ties. Items are numbered from 0; repeated
// pairs accumulate. n_assessors defaults to the largest per-pair total.
PreferenceMatrix read_preference_csv(const std::filesystem::path& path, std::optional<int> n_assessors = std::nullopt);
PreferenceMatrix parse_preference_csv(std::string_view text, std::optional<int> n_assessors = std::nullopt);

std::string aggregated_csv(const AggregatedScores& s);

}  // namespace ssqp
