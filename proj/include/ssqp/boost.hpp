#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ssqp/image.hpp"
#include "ssqp/pipeline.hpp"
#include "ssqp/svr.hpp"

namespace ssqp {

// How stage-II/III training inputs are produced from the stage below.
enum class StackingMode {
  InSample,   // predictions of the final lower-stage models on their own training rows
  OutOfFold,  // v-fold predictions with the selected hyperparameters
};

std::string_view stacking_name(StackingMode m);
StackingMode parse_stacking(std::string_view name);

struct TrainingRow {
  FeatureGroupSet features;
  double mos = 0.0;
  std::string content_id;
};

struct TrainingSet {
  std::vector<TrainingRow> rows;

  std::size_t size() const { return rows.size(); }
  std::vector<std::string> content_ids() const;  // sorted, unique
};

struct BoostOptions {
  SvrHyperparams hyper = SvrHyperparams::defaults();
  StackingMode stacking = StackingMode::InSample;
  int jobs = 1;  // stage-I models train concurrently
};

// Eight per-group SVRs, two per-family fusion SVRs, one final fusion SVR.
struct SsqpModel {
  static constexpr int kSchemaVersion = 1;

  int schema_version = kSchemaVersion;
  ExtractionConfig extraction;
  StackingMode stacking = StackingMode::InSample;
  std::array<SvrModel, 8> stage1;  // indexed by FeatureGroup
  SvrModel stage2_svd;
  SvrModel stage2_hist;
  SvrModel stage3;
};

struct StageScores {
  Eigen::Matrix<double, 8, 1> stage1;  // S_S1..S_S4, S_H1..S_H4
  double svd_family = 0.0;
  double hist_family = 0.0;
  double final_score = 0.0;
};

SsqpModel train_ssqp(const TrainingSet& data, const ExtractionConfig& extraction, const BoostOptions& options,
                     std::uint64_t seed);

StageScores stage_scores(const SsqpModel& model, const FeatureGroupSet& features);
double predict_ssqp(const SsqpModel& model, const FeatureGroupSet& features);
// Extracts features with the model's own configuration first.
double predict_ssqp(const SsqpModel& model, const GrayImage& ref, const GrayImage& test);

std::string serialize_model(const SsqpModel& model);
SsqpModel parse_model(std::string_view text);
void save_model(const SsqpModel& model, const std::filesystem::path& path);
SsqpModel load_model(const std::filesystem::path& path);

// Human-readable structure dump used by `ssqp inspect`.
std::string describe_model(const SsqpModel& model);

}  // namespace ssqp
