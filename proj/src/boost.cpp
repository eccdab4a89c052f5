#include "ssqp/boost.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "ssqp/error.hpp"
#include "ssqp/parallel.hpp"
#include "ssqp/random.hpp"

namespace ssqp {

using json = nlohmann::json;

std::string_view stacking_name(StackingMode m) { return m == StackingMode::InSample ? "in_sample" : "out_of_fold"; }

StackingMode parse_stacking(std::string_view name) {
  if (name == "in_sample") return StackingMode::InSample;
  if (name == "out_of_fold") return StackingMode::OutOfFold;
  throw ArgumentError("unknown stacking mode '" + std::string(name) + "'");
}

std::vector<std::string> TrainingSet::content_ids() const {
  std::set<std::string> ids;
  for (const auto& r : rows) ids.insert(r.content_id);
  return {ids.begin(), ids.end()};
}

namespace {

constexpr std::uint64_t kStreamStage2Svd = 8;
constexpr std::uint64_t kStreamStage2Hist = 9;
constexpr std::uint64_t kStreamStage3 = 10;
constexpr std::uint64_t kStreamOutOfFold = 100;

// Rows sorted by content, then target, then features, so training does not
// depend on the order rows were supplied in.
std::vector<const TrainingRow*> canonical_order(const TrainingSet& data) {
  std::vector<const TrainingRow*> rows;
  rows.reserve(data.rows.size());
  for (const auto& r : data.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const TrainingRow* a, const TrainingRow* b) {
    if (a->content_id != b->content_id) return a->content_id < b->content_id;
    if (a->mos != b->mos) return a->mos < b->mos;
    const auto& va = a->features.values();
    const auto& vb = b->features.values();
    return std::lexicographical_compare(va.data(), va.data() + va.size(), vb.data(), vb.data() + vb.size());
  });
  return rows;
}

// Lower-stage predictions used as the next stage's training inputs.
Eigen::VectorXd stacked_inputs(const SvrModel& fitted, const Eigen::MatrixXd& raw, const Eigen::VectorXd& y,
                               const BoostOptions& options, std::uint64_t seed) {
  if (options.stacking == StackingMode::InSample) return predict_rows(fitted, raw);
  const auto folds = fold_assignment(static_cast<std::size_t>(raw.rows()), options.hyper.cv_folds, seed);
  Eigen::VectorXd out(raw.rows());
  const Eigen::MatrixXd X = fitted.scaler.apply_rows(raw);
  for (int f = 0; f < options.hyper.cv_folds; ++f) {
    std::vector<Eigen::Index> tr;
    std::vector<Eigen::Index> te;
    for (Eigen::Index r = 0; r < raw.rows(); ++r) (folds[static_cast<std::size_t>(r)] == f ? te : tr).push_back(r);
    if (te.empty()) continue;
    const Eigen::MatrixXd x_tr = X(tr, Eigen::all);
    const Eigen::VectorXd y_tr = y(tr);
    SvrModel m = train_nu_svr(x_tr, y_tr, {fitted.nu, fitted.C, fitted.gamma, options.hyper.tolerance});
    for (Eigen::Index r : te) out(r) = predict(m, X.row(r).transpose());
  }
  return out;
}

}  // namespace

SsqpModel train_ssqp(const TrainingSet& data, const ExtractionConfig& extraction, const BoostOptions& options,
                     std::uint64_t seed) {
  options.hyper.validate();
  extraction.validate();
  if (data.content_ids().size() < 2) throw ArgumentError("train_ssqp: need at least 2 distinct content ids");
  if (data.size() < static_cast<std::size_t>(options.hyper.cv_folds)) {
    throw ArgumentError("train_ssqp: " + std::to_string(data.size()) + " rows is fewer than " +
                        std::to_string(options.hyper.cv_folds) + " cross-validation folds");
  }
  for (const auto& r : data.rows) {
    if (!std::isfinite(r.mos)) throw ArgumentError("train_ssqp: MOS must be finite");
    if (r.content_id.empty()) throw ArgumentError("train_ssqp: content_id must be non-empty");
    if (r.features.mode() != extraction.mode) {
      throw ArgumentError("train_ssqp: feature rows were extracted in a different mode than the configuration");
    }
  }

  const auto rows = canonical_order(data);
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = rows[static_cast<std::size_t>(i)]->mos;

  SsqpModel model;
  model.extraction = extraction;
  model.stacking = options.stacking;

  Eigen::MatrixXd scores(n, 8);
  parallel_for(kAllGroups.size(), options.jobs, [&](std::size_t gi) {
    const FeatureGroup g = kAllGroups[gi];
    Eigen::MatrixXd X(n, group_dim(g));
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) = rows[static_cast<std::size_t>(i)]->features.group(g).transpose();
    const std::uint64_t s = derive_seed(seed, gi);
    model.stage1[gi] = fit_svr(X, y, options.hyper, s);
    scores.col(static_cast<Eigen::Index>(gi)) =
        stacked_inputs(model.stage1[gi], X, y, options, derive_seed(s, kStreamOutOfFold));
  });

  const Eigen::MatrixXd svd_scores = scores.leftCols(4);
  const Eigen::MatrixXd hist_scores = scores.rightCols(4);
  model.stage2_svd = fit_svr(svd_scores, y, options.hyper, derive_seed(seed, kStreamStage2Svd));
  model.stage2_hist = fit_svr(hist_scores, y, options.hyper, derive_seed(seed, kStreamStage2Hist));

  Eigen::MatrixXd family(n, 2);
  family.col(0) = stacked_inputs(model.stage2_svd, svd_scores, y, options,
                                 derive_seed(derive_seed(seed, kStreamStage2Svd), kStreamOutOfFold));
  family.col(1) = stacked_inputs(model.stage2_hist, hist_scores, y, options,
                                 derive_seed(derive_seed(seed, kStreamStage2Hist), kStreamOutOfFold));
  model.stage3 = fit_svr(family, y, options.hyper, derive_seed(seed, kStreamStage3));
  return model;
}

StageScores stage_scores(const SsqpModel& model, const FeatureGroupSet& features) {
  if (features.mode() != model.extraction.mode) {
    throw ArgumentError("predict_ssqp: features were extracted in '" + std::string(mode_name(features.mode())) +
                        "' mode but the model expects '" + std::string(mode_name(model.extraction.mode)) + "'");
  }
  StageScores s;
  for (std::size_t gi = 0; gi < kAllGroups.size(); ++gi) {
    s.stage1(static_cast<Eigen::Index>(gi)) = predict(model.stage1[gi], features.group(kAllGroups[gi]));
  }
  s.svd_family = predict(model.stage2_svd, Eigen::VectorXd(s.stage1.head<4>()));
  s.hist_family = predict(model.stage2_hist, Eigen::VectorXd(s.stage1.tail<4>()));
  s.final_score = predict(model.stage3, Eigen::Vector2d(s.svd_family, s.hist_family));
  return s;
}

double predict_ssqp(const SsqpModel& model, const FeatureGroupSet& features) {
  return stage_scores(model, features).final_score;
}

double predict_ssqp(const SsqpModel& model, const GrayImage& ref, const GrayImage& test) {
  return predict_ssqp(model, extract_features(ref, test, model.extraction));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json svr_json(const SvrModel& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.support_vectors.rows(); ++r) rows.push_back(vector_json(m.support_vectors.row(r)));
  return {{"nu", m.nu},
          {"C", m.C},
          {"gamma", m.gamma},
          {"bias", m.bias},
          {"input_dim", m.input_dim},
          {"scaler", {{"lo", vector_json(m.scaler.lo)}, {"hi", vector_json(m.scaler.hi)}}},
          {"support_vectors", rows},
          {"dual_coeffs", vector_json(m.dual_coeffs)}};
}

SvrModel svr_from(const json& j) {
  SvrModel m;
  m.nu = j.at("nu").get<double>();
  m.C = j.at("C").get<double>();
  m.gamma = j.at("gamma").get<double>();
  m.bias = j.at("bias").get<double>();
  m.input_dim = j.at("input_dim").get<Eigen::Index>();
  m.scaler.lo = vector_from(j.at("scaler").at("lo"));
  m.scaler.hi = vector_from(j.at("scaler").at("hi"));
  m.dual_coeffs = vector_from(j.at("dual_coeffs"));
  const auto& rows = j.at("support_vectors");
  if (rows.size() != static_cast<std::size_t>(m.dual_coeffs.size())) {
    throw ParseError("model: support vector count does not match coefficient count");
  }
  m.support_vectors.resize(static_cast<Eigen::Index>(rows.size()), m.input_dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Eigen::VectorXd row = vector_from(rows[r]);
    if (row.size() != m.input_dim) throw ParseError("model: support vector has the wrong dimension");
    m.support_vectors.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  if (!m.scaler.empty() && m.scaler.dim() != m.input_dim) throw ParseError("model: scaler dimension mismatch");
  return m;
}

json extraction_json(const ExtractionConfig& c) {
  return {{"mode", mode_name(c.mode)},          {"svd_block", c.svd_block},       {"hist_block", c.hist_block},
          {"hist_kl_region", c.hist_kl_region}, {"n_bins_full", c.n_bins_full}, {"n_bins_block", c.n_bins_block}};
}

ExtractionConfig extraction_from(const json& j) {
  ExtractionConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.svd_block = j.at("svd_block").get<Eigen::Index>();
  c.hist_block = j.at("hist_block").get<Eigen::Index>();
  c.hist_kl_region = j.at("hist_kl_region").get<Eigen::Index>();
  c.n_bins_full = j.at("n_bins_full").get<int>();
  c.n_bins_block = j.at("n_bins_block").get<int>();
  c.validate();
  return c;
}

constexpr const char* kFormatTag = "ssqp-model";

}  // namespace

std::string serialize_model(const SsqpModel& model) {
  json stage1 = json::object();
  for (std::size_t gi = 0; gi < kAllGroups.size(); ++gi) {
    stage1[std::string(group_name(kAllGroups[gi]))] = svr_json(model.stage1[gi]);
  }
  const json doc = {{"format", kFormatTag},
                    {"schema_version", model.schema_version},
                    {"extraction", extraction_json(model.extraction)},
                    {"stacking", stacking_name(model.stacking)},
                    {"stage1", stage1},
                    {"stage2", {{"svd", svr_json(model.stage2_svd)}, {"hist", svr_json(model.stage2_hist)}}},
                    {"stage3", svr_json(model.stage3)}};
  return doc.dump(1) + "\n";
}

SsqpModel parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatTag) throw ParseError("model: not an SSQP model file");
    const int version = doc.at("schema_version").get<int>();
    if (version != SsqpModel::kSchemaVersion) {
      throw IncompatibleVersionError("model schema_version " + std::to_string(version) +
                                     " is incompatible with this build (expects schema_version " +
                                     std::to_string(SsqpModel::kSchemaVersion) + ")");
    }
    SsqpModel model;
    model.schema_version = version;
    model.extraction = extraction_from(doc.at("extraction"));
    model.stacking = parse_stacking(doc.at("stacking").get<std::string>());
    for (std::size_t gi = 0; gi < kAllGroups.size(); ++gi) {
      model.stage1[gi] = svr_from(doc.at("stage1").at(std::string(group_name(kAllGroups[gi]))));
      if (model.stage1[gi].input_dim != group_dim(kAllGroups[gi])) throw ParseError("model: stage-I dimension mismatch");
    }
    model.stage2_svd = svr_from(doc.at("stage2").at("svd"));
    model.stage2_hist = svr_from(doc.at("stage2").at("hist"));
    model.stage3 = svr_from(doc.at("stage3"));
    if (model.stage2_svd.input_dim != 4 || model.stage2_hist.input_dim != 4 || model.stage3.input_dim != 2) {
      throw ParseError("model: fusion stage dimension mismatch");
    }
    return model;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is malformed: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("model file is malformed: ") + e.what());
  }
}

void save_model(const SsqpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path.string() + "'");
  out << serialize_model(model);
  if (!out) throw IoError("failed writing model '" + path.string() + "'");
}

SsqpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string describe_model(const SsqpModel& model) {
  std::ostringstream os;
  auto line = [&os](std::string_view name, const SvrModel& m) {
    os << "  " << std::left << std::setw(12) << name << " dim=" << m.input_dim << " C=" << m.C
       << " gamma=" << m.gamma << " nu=" << m.nu << " support_vectors=" << m.n_support() << " bias=" << m.bias
       << "\n";
  };
  const auto& c = model.extraction;
  os << "SSQP model (schema_version " << model.schema_version << ")\n"
     << "extraction: mode=" << mode_name(c.mode) << " svd_block=" << c.svd_block << " hist_block=" << c.hist_block
     << " hist_kl_region=" << c.hist_kl_region << " n_bins_full=" << c.n_bins_full
     << " n_bins_block=" << c.n_bins_block << "\n"
     << "stacking: " << stacking_name(model.stacking) << "\n"
     << "stage I (per feature group):\n";
  for (std::size_t gi = 0; gi < kAllGroups.size(); ++gi) line(group_name(kAllGroups[gi]), model.stage1[gi]);
  os << "stage II (per family):\n";
  line("svd", model.stage2_svd);
  line("hist", model.stage2_hist);
  os << "stage III (fusion):\n";
  line("final", model.stage3);
  return os.str();
}

}  // namespace ssqp
