#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace ssqp {

// Per-dimension min-max scaling to [0, 1], fitted on training rows. Inputs
// outside the training range are clamped; constant dimensions map to 0.5.
struct MinMaxScaler {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  bool empty() const { return lo.size() == 0; }
  Eigen::Index dim() const { return lo.size(); }

  static MinMaxScaler fit(const Eigen::MatrixXd& rows);
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const;

  friend bool operator==(const MinMaxScaler&, const MinMaxScaler&) = default;
};

inline MinMaxScaler normalize_fit(const Eigen::MatrixXd& rows) { return MinMaxScaler::fit(rows); }
inline Eigen::MatrixXd normalize_apply(const MinMaxScaler& s, const Eigen::MatrixXd& rows) { return s.apply_rows(rows); }

struct SvrParams {
  double nu = 0.5;
  double C = 1.0;
  double gamma = 1.0;
  double tolerance = 1e-3;  // KKT violation at which SMO stops
};

// RBF-kernel nu-SVR: f(x) = sum_i coeff_i exp(-gamma |sv_i - x|^2) + bias,
// evaluated after the optional input scaler.
struct SvrModel {
  Eigen::MatrixXd support_vectors;  // one row per support vector, in normalized space
  Eigen::VectorXd dual_coeffs;      // alpha_i - alpha_i^*
  double bias = 0.0;
  double gamma = 1.0;
  double C = 1.0;
  double nu = 0.5;
  Eigen::Index input_dim = 0;
  MinMaxScaler scaler;  // empty: inputs are used as given

  std::size_t n_support() const { return static_cast<std::size_t>(dual_coeffs.size()); }
};

struct SvrTrainingStats {
  long iterations = 0;
  bool converged = true;
  std::size_t n_rows = 0;
  std::size_t n_support = 0;        // rows with a non-zero coefficient
  std::size_t n_bounded = 0;        // rows with alpha or alpha^* at C
};

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma);

// X rows are expected to be normalized already; the returned model carries no
// scaler. All-equal targets produce a model with no support vectors.
SvrModel train_nu_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrParams& params,
                      SvrTrainingStats* stats = nullptr);

double predict(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_rows(const SvrModel& model, const Eigen::MatrixXd& rows);

struct SvrHyperparams {
  double nu = 0.5;
  std::vector<double> C_grid;
  std::vector<double> gamma_grid;
  int cv_folds = 5;
  double tolerance = 1e-3;

  // C in 2^-5, 2^-3, ..., 2^15 and gamma in 2^-15, 2^-13, ..., 2^3; 5 folds.
  static SvrHyperparams defaults();
  void validate() const;
};

struct GridSearchResult {
  double C = 0.0;
  double gamma = 0.0;
  double cv_mse = 0.0;
};

// Fold id per row: a seeded shuffle dealt round-robin into `folds` folds.
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

// v-fold CV mean squared error over the full grid; ties go to the smaller C,
// then the smaller gamma.
GridSearchResult grid_search_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrHyperparams& hyper,
                                 std::uint64_t seed);

// Scaler fit, grid search and final training on all rows, as one step.
SvrModel fit_svr(const Eigen::MatrixXd& raw_rows, const Eigen::VectorXd& y, const SvrHyperparams& hyper,
                 std::uint64_t seed, GridSearchResult* selection = nullptr);

}  // namespace ssqp
