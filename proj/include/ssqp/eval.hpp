#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssqp/boost.hpp"

namespace ssqp {

using LogisticParams = std::array<double, 4>;

// L(s) = (b1 - b2) / (1 + exp((b3 - s) / |b4|)) + b2
double logistic(const LogisticParams& beta, double s);

struct LogisticFit {
  LogisticParams beta{};
  bool converged = false;
  double final_mse = 0.0;
  int iterations = 0;

  double operator()(double s) const { return logistic(beta, s); }
};

// Nelder-Mead least squares from b1 = max(mos), b2 = min(mos),
// b3 = mean(scores), b4 = std(scores) / 4. Needs >= 5 points and
// non-constant scores.
LogisticFit fit_logistic(std::span<const double> scores, std::span<const double> mos);

std::vector<double> average_ranks(std::span<const double> values);
double pcc(std::span<const double> a, std::span<const double> b);
double srocc(std::span<const double> a, std::span<const double> b);
double rmse(std::span<const double> a, std::span<const double> b);
double median(std::vector<double> values);

struct ContentSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// floor(frac_train * n) contents for training, the rest for testing, with at
// least one content on each side.
ContentSplit split_contents(const std::vector<std::string>& sorted_ids, double frac_train, std::uint64_t seed);

struct TrialResult {
  int trial = 0;
  double pcc = 0.0;
  double srocc = 0.0;
  double rmse = 0.0;
  bool degenerate = false;  // predictions or targets without spread
  LogisticParams logistic{};  // mapping fitted on this trial's predictions
  double score_min = 0.0;
  double score_max = 0.0;
  ContentSplit split;
};

struct EvalReport {
  double pcc = 0.0;
  double srocc = 0.0;
  double rmse = 0.0;
  int n_trials = 0;
  std::string aggregation = "median";
  std::vector<TrialResult> per_trial;
};

struct SplitProtocolOptions {
  double frac_train = 0.8;
  int n_trials = 50;
  BoostOptions boost;
  int jobs = 1;  // trials run concurrently
};

// Metrics for one held-out set: PCC and RMSE after the logistic mapping, SROCC
// on the raw predictions.
TrialResult score_predictions(std::span<const double> predicted, std::span<const double> mos);

EvalReport split_protocol(const TrainingSet& data, const ExtractionConfig& extraction,
                          const SplitProtocolOptions& options, std::uint64_t seed);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);
std::string per_trial_csv(const EvalReport& report);

struct LabeledPair {
  GrayImage ref;
  GrayImage test;
  double mos = 0.0;
  std::string content_id;
};

struct SweepRow {
  ExtractionConfig config;
  double svd_pcc = 0.0;
  double svd_srocc = 0.0;
  double hist_pcc = 0.0;
  double hist_srocc = 0.0;
  double ssqp_pcc = 0.0;
  double ssqp_srocc = 0.0;
};

// Content-wise k-fold CV (k = min(folds, #contents)) of the full stack for each
// configuration, reporting the stage-II family scores alongside the final score.
std::vector<SweepRow> block_size_sweep(const std::vector<LabeledPair>& pairs,
                                       const std::vector<ExtractionConfig>& configs, const BoostOptions& options,
                                       int folds, std::uint64_t seed);

std::string sweep_table(const std::vector<SweepRow>& rows);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace ssqp
