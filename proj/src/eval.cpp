#include "ssqp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "ssqp/csv.hpp"
#include "ssqp/error.hpp"
#include "ssqp/parallel.hpp"
#include "ssqp/random.hpp"

namespace ssqp {

namespace {

constexpr double kMinSlope = 1e-12;
constexpr int kMaxIterations = 5000;
constexpr double kTolerance = 1e-9;

void require_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw ArgumentError(std::string(what) + ": inputs differ in length");
  if (a.size() < 2) throw ArgumentError(std::string(what) + ": need at least 2 values");
}

double mean_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

double logistic(const LogisticParams& beta, double s) {
  const double slope = std::max(std::abs(beta[3]), kMinSlope);
  return (beta[0] - beta[1]) / (1.0 + std::exp((beta[2] - s) / slope)) + beta[1];
}

LogisticFit fit_logistic(std::span<const double> scores, std::span<const double> mos) {
  if (scores.size() != mos.size()) throw ArgumentError("fit_logistic: inputs differ in length");
  if (scores.size() < 5) throw ArgumentError("fit_logistic: need at least 5 points");
  const auto [smin, smax] = std::minmax_element(scores.begin(), scores.end());
  if (*smin == *smax) throw DegenerateDataError("fit_logistic: all scores are identical");

  const double s_mean = mean_of(scores);
  double s_var = 0.0;
  for (double s : scores) s_var += (s - s_mean) * (s - s_mean);
  const double s_std = std::sqrt(s_var / static_cast<double>(scores.size()));

  using Point = Eigen::Vector4d;
  auto objective = [&](const Point& p) {
    const LogisticParams beta{p(0), p(1), p(2), p(3)};
    double sse = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double r = logistic(beta, scores[i]) - mos[i];
      sse += r * r;
    }
    return sse / static_cast<double>(scores.size());
  };

  const Point start(*std::max_element(mos.begin(), mos.end()), *std::min_element(mos.begin(), mos.end()), s_mean,
                    s_std / 4.0);
  const double mos_span = std::max(start(0) - start(1), 1e-3);
  const Point step(0.1 * mos_span, 0.1 * mos_span, 0.1 * s_std, 0.05 * s_std);

  // Nelder-Mead with standard coefficients; restarted around the best vertex
  // until a restart no longer improves the objective.
  std::array<Point, 5> simplex;
  std::array<double, 5> value{};
  auto reset = [&](const Point& centre) {
    simplex[0] = centre;
    for (int d = 0; d < 4; ++d) {
      simplex[d + 1] = centre;
      simplex[d + 1](d) += step(d);
    }
    for (int k = 0; k < 5; ++k) value[k] = objective(simplex[k]);
  };

  reset(start);
  int iterations = 0;
  bool converged = false;
  double last_best = std::numeric_limits<double>::infinity();
  while (iterations < kMaxIterations) {
    std::array<int, 5> order{0, 1, 2, 3, 4};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
    const Point& best = simplex[order[0]];
    double f_spread = 0.0;
    double x_spread = 0.0;
    for (int k = 1; k < 5; ++k) {
      f_spread = std::max(f_spread, std::abs(value[order[k]] - value[order[0]]));
      x_spread = std::max(x_spread, (simplex[order[k]] - best).cwiseAbs().maxCoeff());
    }
    if (f_spread <= kTolerance && x_spread <= kTolerance) {
      if (value[order[0]] >= last_best - kTolerance * 1e-3) {
        converged = true;
        break;
      }
      last_best = value[order[0]];
      reset(Point(best));
      continue;
    }
    ++iterations;

    Point centroid = Point::Zero();
    for (int k = 0; k < 4; ++k) centroid += simplex[order[k]];
    centroid /= 4.0;
    const int worst = order[4];
    const Point reflected = centroid + (centroid - simplex[worst]);
    const double f_r = objective(reflected);
    if (f_r < value[order[0]]) {
      const Point expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_e = objective(expanded);
      if (f_e < f_r) {
        simplex[worst] = expanded, value[worst] = f_e;
      } else {
        simplex[worst] = reflected, value[worst] = f_r;
      }
      continue;
    }
    if (f_r < value[order[3]]) {
      simplex[worst] = reflected, value[worst] = f_r;
      continue;
    }
    const bool outside = f_r < value[worst];
    const Point contracted =
        outside ? Point(centroid + 0.5 * (reflected - centroid)) : Point(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_c = objective(contracted);
    if (f_c < (outside ? f_r : value[worst])) {
      simplex[worst] = contracted, value[worst] = f_c;
      continue;
    }
    for (int k = 1; k < 5; ++k) {
      const int idx = order[k];
      simplex[idx] = simplex[order[0]] + 0.5 * (simplex[idx] - simplex[order[0]]);
      value[idx] = objective(simplex[idx]);
    }
  }

  const auto best_it = std::min_element(value.begin(), value.end());
  const Point& best = simplex[static_cast<std::size_t>(best_it - value.begin())];
  LogisticFit fit;
  fit.beta = {best(0), best(1), best(2), best(3)};
  fit.converged = converged;
  fit.final_mse = *best_it;
  fit.iterations = iterations;
  return fit;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pcc(std::span<const double> a, std::span<const double> b) {
  require_pair(a, b, "pcc");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateDataError("pcc: zero variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double srocc(std::span<const double> a, std::span<const double> b) {
  require_pair(a, b, "srocc");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pcc(ra, rb);
}

double rmse(std::span<const double> a, std::span<const double> b) {
  require_pair(a, b, "rmse");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sse += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sse / static_cast<double>(a.size()));
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

ContentSplit split_contents(const std::vector<std::string>& sorted_ids, double frac_train, std::uint64_t seed) {
  const std::size_t n = sorted_ids.size();
  if (n < 2) throw ArgumentError("split: need at least 2 distinct contents");
  if (!(frac_train > 0.0 && frac_train < 1.0)) throw ArgumentError("split: train fraction must lie in (0, 1)");
  auto n_train = static_cast<std::size_t>(std::floor(frac_train * static_cast<double>(n) + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  const auto order = shuffled_indices(n, seed);
  ContentSplit split;
  for (std::size_t k = 0; k < n; ++k) (k < n_train ? split.train : split.test).push_back(sorted_ids[order[k]]);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

TrialResult score_predictions(std::span<const double> predicted, std::span<const double> mos) {
  TrialResult t;
  if (!predicted.empty()) {
    const auto [lo, hi] = std::minmax_element(predicted.begin(), predicted.end());
    t.score_min = *lo;
    t.score_max = *hi;
  }
  try {
    const LogisticFit fit = fit_logistic(predicted, mos);
    t.logistic = fit.beta;
    std::vector<double> mapped(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) mapped[i] = fit(predicted[i]);
    t.srocc = srocc(predicted, mos);
    t.rmse = rmse(mapped, mos);
    t.pcc = pcc(mapped, mos);
  } catch (const DegenerateDataError&) {
    // Constant predictions (or constant targets) carry no ranking information.
    const double m = mean_of(mos);
    std::vector<double> flat(mos.size(), m);
    t.degenerate = true;
    t.pcc = 0.0;
    t.srocc = 0.0;
    t.rmse = rmse(flat, mos);
  }
  return t;
}

EvalReport split_protocol(const TrainingSet& data, const ExtractionConfig& extraction,
                          const SplitProtocolOptions& options, std::uint64_t seed) {
  if (options.n_trials < 1) throw ArgumentError("split_protocol: need at least one trial");
  const auto ids = data.content_ids();
  if (ids.size() < 2) throw ArgumentError("split_protocol: need at least 2 distinct contents");

  EvalReport report;
  report.n_trials = options.n_trials;
  report.per_trial.resize(static_cast<std::size_t>(options.n_trials));
  BoostOptions inner = options.boost;
  if (options.jobs > 1) inner.jobs = 1;

  parallel_for(report.per_trial.size(), options.jobs, [&](std::size_t trial) {
    const std::uint64_t trial_seed = derive_seed(seed, trial);
    ContentSplit split = split_contents(ids, options.frac_train, trial_seed);
    TrainingSet train;
    std::vector<const TrainingRow*> test;
    for (const auto& row : data.rows) {
      if (std::binary_search(split.train.begin(), split.train.end(), row.content_id)) {
        train.rows.push_back(row);
      } else {
        test.push_back(&row);
      }
    }
    const SsqpModel model = train_ssqp(train, extraction, inner, derive_seed(trial_seed, 1));
    std::vector<double> predicted;
    std::vector<double> mos;
    for (const TrainingRow* row : test) {
      predicted.push_back(predict_ssqp(model, row->features));
      mos.push_back(row->mos);
    }
    TrialResult result = score_predictions(predicted, mos);
    result.trial = static_cast<int>(trial);
    result.split = std::move(split);
    report.per_trial[trial] = std::move(result);
  });

  std::vector<double> p;
  std::vector<double> s;
  std::vector<double> r;
  for (const auto& t : report.per_trial) {
    p.push_back(t.pcc);
    s.push_back(t.srocc);
    r.push_back(t.rmse);
  }
  report.pcc = median(p);
  report.srocc = median(s);
  report.rmse = median(r);
  return report;
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "n_trials,aggregation,pcc,srocc,rmse\n"
     << report.n_trials << ',' << report.aggregation << ',' << format_real(report.pcc) << ','
     << format_real(report.srocc) << ',' << format_real(report.rmse) << '\n';
  return os.str();
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "trials: " << report.n_trials << " (" << report.aggregation << ")\n"
     << "  PCC    " << report.pcc << "\n"
     << "  SROCC  " << report.srocc << "\n"
     << "  RMSE   " << report.rmse << "\n";
  return os.str();
}

std::string per_trial_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "trial,pcc,srocc,rmse,degenerate,train_contents,test_contents\n";
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + v[i];
    return out;
  };
  for (const auto& t : report.per_trial) {
    os << t.trial << ',' << format_real(t.pcc) << ',' << format_real(t.srocc) << ',' << format_real(t.rmse) << ','
       << (t.degenerate ? 1 : 0) << ',' << csv_escape(join(t.split.train)) << ',' << csv_escape(join(t.split.test))
       << '\n';
  }
  return os.str();
}

namespace {

std::pair<double, double> correlation_pair(const std::vector<double>& predicted, const std::vector<double>& mos) {
  const TrialResult t = score_predictions(predicted, mos);
  return {t.pcc, t.srocc};
}

}  // namespace

std::vector<SweepRow> block_size_sweep(const std::vector<LabeledPair>& pairs,
                                       const std::vector<ExtractionConfig>& configs, const BoostOptions& options,
                                       int folds, std::uint64_t seed) {
  if (pairs.empty()) throw ArgumentError("block_size_sweep: no image pairs");
  std::vector<std::string> ids;
  for (const auto& p : pairs) ids.push_back(p.content_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 3) throw ArgumentError("block_size_sweep: need at least 3 distinct contents");
  const int k = std::min<int>(folds, static_cast<int>(ids.size()));
  if (k < 2) throw ArgumentError("block_size_sweep: need at least 2 folds");

  // Contents dealt into folds once so every configuration sees the same splits.
  const auto order = shuffled_indices(ids.size(), seed);
  std::vector<int> content_fold(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) content_fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  auto fold_of = [&](const std::string& id) {
    return content_fold[static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin())];
  };

  std::vector<SweepRow> out;
  for (const auto& cfg : configs) {
    cfg.validate();
    TrainingSet all;
    all.rows.resize(pairs.size());
    parallel_for(pairs.size(), options.jobs, [&](std::size_t i) {
      all.rows[i] = {extract_features(pairs[i].ref, pairs[i].test, cfg), pairs[i].mos, pairs[i].content_id};
    });

    std::vector<double> svd_pred;
    std::vector<double> hist_pred;
    std::vector<double> final_pred;
    std::vector<double> mos;
    for (int f = 0; f < k; ++f) {
      TrainingSet train;
      std::vector<const TrainingRow*> test;
      for (const auto& row : all.rows) {
        if (fold_of(row.content_id) == f) {
          test.push_back(&row);
        } else {
          train.rows.push_back(row);
        }
      }
      const SsqpModel model = train_ssqp(train, cfg, options, derive_seed(seed, static_cast<std::uint64_t>(f) + 1));
      for (const TrainingRow* row : test) {
        const StageScores s = stage_scores(model, row->features);
        svd_pred.push_back(s.svd_family);
        hist_pred.push_back(s.hist_family);
        final_pred.push_back(s.final_score);
        mos.push_back(row->mos);
      }
    }
    SweepRow row;
    row.config = cfg;
    std::tie(row.svd_pcc, row.svd_srocc) = correlation_pair(svd_pred, mos);
    std::tie(row.hist_pcc, row.hist_srocc) = correlation_pair(hist_pred, mos);
    std::tie(row.ssqp_pcc, row.ssqp_srocc) = correlation_pair(final_pred, mos);
    out.push_back(row);
  }
  return out;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "svd block | hist block (region) | F_svd PCC  SROCC | F_hist PCC  SROCC | SSQP PCC  SROCC\n";
  for (const auto& r : rows) {
    os << std::setw(9) << (std::to_string(r.config.svd_block) + "x" + std::to_string(r.config.svd_block)) << " | "
       << std::setw(19)
       << (std::to_string(r.config.hist_block) + "x" + std::to_string(r.config.hist_block) + " (" +
           std::to_string(r.config.hist_kl_region) + "x" + std::to_string(r.config.hist_kl_region) + ")")
       << " | " << std::setw(9) << r.svd_pcc << std::setw(7) << r.svd_srocc << " | " << std::setw(10) << r.hist_pcc
       << std::setw(7) << r.hist_srocc << " | " << std::setw(8) << r.ssqp_pcc << std::setw(7) << r.ssqp_srocc
       << "\n";
  }
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "svd_block,hist_block,hist_kl_region,svd_pcc,svd_srocc,hist_pcc,hist_srocc,ssqp_pcc,ssqp_srocc\n";
  for (const auto& r : rows) {
    os << r.config.svd_block << ',' << r.config.hist_block << ',' << r.config.hist_kl_region << ','
       << format_real(r.svd_pcc) << ',' << format_real(r.svd_srocc) << ',' << format_real(r.hist_pcc) << ','
       << format_real(r.hist_srocc) << ',' << format_real(r.ssqp_pcc) << ',' << format_real(r.ssqp_srocc) << '\n';
  }
  return os.str();
}

}  // namespace ssqp
