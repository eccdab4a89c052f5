#include "ssqp/pcagg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <fstream>
#include <sstream>

#include "ssqp/csv.hpp"
#include "ssqp/error.hpp"

namespace ssqp {

PreferenceMatrix PreferenceMatrix::zeros(Eigen::Index n, int n_assessors) {
  return {Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), n_assessors};
}

void PreferenceMatrix::validate() const {
  const Eigen::Index n = n_items();
  if (n < 2) throw ArgumentError("preference matrix: need at least 2 items");
  if (wins.cols() != n || ties.rows() != n || ties.cols() != n) {
    throw ArgumentError("preference matrix: wins and ties must be square and equally sized");
  }
  if ((wins.array() < 0).any() || (ties.array() < 0).any()) {
    throw ArgumentError("preference matrix: counts must be non-negative");
  }
  if (!wins.allFinite() || !ties.allFinite()) throw ArgumentError("preference matrix: counts must be finite");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (wins(i, i) != 0.0 || ties(i, i) != 0.0) throw ArgumentError("preference matrix: diagonal must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (ties(i, j) != ties(j, i)) throw ArgumentError("preference matrix: ties must be symmetric");
      if (n_assessors > 0 && comparisons(i, j) > n_assessors) {
        throw ArgumentError("preference matrix: pair (" + std::to_string(i) + "," + std::to_string(j) +
                            ") has more comparisons than assessors");
      }
    }
  }
}

Eigen::VectorXd counts_mos(const PreferenceMatrix& p, std::optional<double> scale) {
  p.validate();
  const Eigen::Index n = p.n_items();
  const double target = scale.value_or(static_cast<double>(p.n_assessors));
  if (!(target > 0.0)) throw ArgumentError("counts_mos: scale (or n_assessors) must be positive");
  Eigen::VectorXd score = p.wins.rowwise().sum() + 0.5 * p.ties.rowwise().sum();
  Eigen::VectorXd participated(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double c = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) c += p.comparisons(i, j);
    }
    participated(i) = c;
  }
  const double most = participated.maxCoeff();
  Eigen::VectorXd mos(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    mos(i) = participated(i) > 0.0 ? score(i) / most * target : std::numeric_limits<double>::quiet_NaN();
  }
  return mos;
}

namespace {

// Connected components of the graph with an edge wherever `linked(i, j)`.
std::vector<int> components(Eigen::Index n, const std::function<bool(Eigen::Index, Eigen::Index)>& linked) {
  std::vector<int> comp(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (Eigen::Index seed = 0; seed < n; ++seed) {
    if (comp[static_cast<std::size_t>(seed)] >= 0) continue;
    std::vector<Eigen::Index> stack{seed};
    comp[static_cast<std::size_t>(seed)] = next;
    while (!stack.empty()) {
      const Eigen::Index i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i && comp[static_cast<std::size_t>(j)] < 0 && linked(i, j)) {
          comp[static_cast<std::size_t>(j)] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::vector<std::vector<Eigen::Index>> members(const std::vector<int>& comp) {
  const int count = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < comp.size(); ++i) out[static_cast<std::size_t>(comp[i])].push_back(static_cast<Eigen::Index>(i));
  return out;
}

void note_components(PairwiseScaling& r, std::size_t count, const char* model) {
  if (count > 1) {
    r.warnings.push_back(std::string(model) + ": comparison graph has " + std::to_string(count) +
                         " disconnected components; scores are only comparable within a component");
  }
}

}  // namespace

PairwiseScaling bradley_terry(const PreferenceMatrix& p, double tolerance, int max_iterations) {
  p.validate();
  const Eigen::Index n = p.n_items();
  PairwiseScaling result;
  result.scores = Eigen::VectorXd::Zero(n);
  result.at_floor.assign(static_cast<std::size_t>(n), false);
  result.component = components(n, [&](Eigen::Index i, Eigen::Index j) { return p.comparisons(i, j) > 0.0; });
  const auto groups = members(result.component);
  note_components(result, groups.size(), "bradley_terry");

  constexpr double kFloor = 1e-12;
  const Eigen::VectorXd won = p.wins.rowwise().sum() + 0.5 * p.ties.rowwise().sum();
  for (const auto& items : groups) {
    if (items.size() < 2) continue;
    const auto m = static_cast<Eigen::Index>(items.size());
    Eigen::VectorXd strength = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd next(m);
    bool done = false;
    int iter = 0;
    while (!done && iter < max_iterations) {
      ++iter;
      for (Eigen::Index a = 0; a < m; ++a) {
        double denom = 0.0;
        for (Eigen::Index b = 0; b < m; ++b) {
          if (a == b) continue;
          const double games = p.comparisons(items[static_cast<std::size_t>(a)], items[static_cast<std::size_t>(b)]);
          if (games > 0.0) denom += games / (strength(a) + strength(b));
        }
        next(a) = std::max(won(items[static_cast<std::size_t>(a)]) / denom, kFloor);
      }
      next *= static_cast<double>(m) / next.sum();
      next = next.cwiseMax(kFloor);
      done = ((next - strength).cwiseAbs().array() / strength.array()).maxCoeff() < tolerance;
      strength = next;
    }
    result.iterations = std::max(result.iterations, iter);
    if (!done) {
      result.converged = false;
      result.warnings.push_back("bradley_terry: MM iteration did not reach tolerance");
    }
    const Eigen::VectorXd logs = strength.array().log();
    const double centre = logs.mean();
    for (Eigen::Index a = 0; a < m; ++a) {
      const auto item = items[static_cast<std::size_t>(a)];
      result.scores(item) = logs(a) - centre;
      if (strength(a) <= kFloor * 1.000001) {
        result.at_floor[static_cast<std::size_t>(item)] = true;
        result.warnings.push_back("bradley_terry: item " + std::to_string(item) +
                                  " lost every comparison; strength held at the numerical floor");
      }
    }
  }
  return result;
}

Eigen::VectorXd bt_strengths(const PairwiseScaling& bt) {
  Eigen::VectorXd s = bt.scores.array().exp();
  return s * (static_cast<double>(s.size()) / s.sum());
}

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("inverse_normal_cdf: p must lie in (0, 1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x = 0.0;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

PairwiseScaling thurstone_mosteller(const PreferenceMatrix& p) {
  p.validate();
  const Eigen::Index n = p.n_items();
  PairwiseScaling result;
  result.scores = Eigen::VectorXd::Zero(n);
  result.at_floor.assign(static_cast<std::size_t>(n), false);
  auto decisive = [&](Eigen::Index i, Eigen::Index j) { return p.wins(i, j) + p.wins(j, i); };
  result.component = components(n, [&](Eigen::Index i, Eigen::Index j) { return decisive(i, j) > 0.0; });
  const auto groups = members(result.component);
  note_components(result, groups.size(), "thurstone_mosteller");

  for (const auto& items : groups) {
    if (items.size() < 2) continue;
    const auto m = static_cast<Eigen::Index>(items.size());
    // Normal equations of sum (s_i - s_j - z_ij)^2 with sum(s) = 0 folded in.
    Eigen::MatrixXd lhs = Eigen::MatrixXd::Ones(m, m);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      for (Eigen::Index b = a + 1; b < m; ++b) {
        const auto i = items[static_cast<std::size_t>(a)];
        const auto j = items[static_cast<std::size_t>(b)];
        const double total = decisive(i, j);
        if (total <= 0.0) continue;
        const double z = inverse_normal_cdf(std::clamp(p.wins(i, j) / total, 0.01, 0.99));
        lhs(a, a) += 1.0;
        lhs(b, b) += 1.0;
        lhs(a, b) -= 1.0;
        lhs(b, a) -= 1.0;
        rhs(a) += z;
        rhs(b) -= z;
      }
    }
    const Eigen::VectorXd s = lhs.ldlt().solve(rhs);
    const double centre = s.mean();
    for (Eigen::Index a = 0; a < m; ++a) result.scores(items[static_cast<std::size_t>(a)]) = s(a) - centre;
  }
  return result;
}

AggregatedScores aggregate(const PreferenceMatrix& p, std::optional<double> scale) {
  AggregatedScores out;
  out.counts_mos = counts_mos(p, scale);
  const auto bt = bradley_terry(p);
  const auto tm = thurstone_mosteller(p);
  out.bt_scores = bt.scores;
  out.bt_strengths = bt_strengths(bt);
  out.tm_scores = tm.scores;
  out.warnings = bt.warnings;
  out.warnings.insert(out.warnings.end(), tm.warnings.begin(), tm.warnings.end());
  for (Eigen::Index i = 0; i < out.counts_mos.size(); ++i) {
    if (std::isnan(out.counts_mos(i))) {
      out.warnings.push_back("counts_mos: item " + std::to_string(i) + " was never compared; MOS is missing");
    }
  }
  return out;
}

namespace {

double parse_count(const std::string& field, const char* what) {
  const double v = parse_real(field, what);
  if (!(v >= 0.0) || v != std::floor(v)) throw ParseError(std::string(what) + " must be a non-negative integer");
  return v;
}

}  // namespace

PreferenceMatrix parse_preference_csv(std::string_view text, std::optional<int> n_assessors) {
  const CsvTable table = parse_csv(text);
  const int ci = table.require_column("i");
  const int cj = table.require_column("j");
  const int cw = table.require_column("wins_ij");
  const int cl = table.require_column("wins_ji");
  const int ct = table.require_column("ties");
  struct Entry {
    Eigen::Index i, j;
    double w, l, t;
  };
  std::vector<Entry> entries;
  Eigen::Index n = 0;
  for (const auto& row : table.rows) {
    Entry e{static_cast<Eigen::Index>(parse_count(row[static_cast<std::size_t>(ci)], "i")),
            static_cast<Eigen::Index>(parse_count(row[static_cast<std::size_t>(cj)], "j")),
            parse_count(row[static_cast<std::size_t>(cw)], "wins_ij"),
            parse_count(row[static_cast<std::size_t>(cl)], "wins_ji"),
            parse_count(row[static_cast<std::size_t>(ct)], "ties")};
    if (e.i == e.j) throw ParseError("preference CSV: an item cannot be compared with itself");
    n = std::max({n, e.i + 1, e.j + 1});
    entries.push_back(e);
  }
  PreferenceMatrix p = PreferenceMatrix::zeros(n, 0);
  for (const auto& e : entries) {
    p.wins(e.i, e.j) += e.w;
    p.wins(e.j, e.i) += e.l;
    p.ties(e.i, e.j) += e.t;
    p.ties(e.j, e.i) += e.t;
  }
  if (n_assessors) {
    p.n_assessors = *n_assessors;
  } else {
    double most = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) most = std::max(most, p.comparisons(i, j));
    }
    p.n_assessors = static_cast<int>(most);
  }
  p.validate();
  return p;
}

PreferenceMatrix read_preference_csv(const std::filesystem::path& path, std::optional<int> n_assessors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_preference_csv(buf.str(), n_assessors);
}

std::string aggregated_csv(const AggregatedScores& s) {
  std::ostringstream os;
  os << "item,counts_mos,bt_score,bt_strength,tm_score\n";
  for (Eigen::Index i = 0; i < s.counts_mos.size(); ++i) {
    os << i << ',' << (std::isnan(s.counts_mos(i)) ? "" : format_real(s.counts_mos(i))) << ','
       << format_real(s.bt_scores(i)) << ',' << format_real(s.bt_strengths(i)) << ',' << format_real(s.tm_scores(i))
       << '\n';
  }
  return os.str();
}

}  // namespace ssqp
