#include "ssqp/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ssqp/error.hpp"
#include "ssqp/random.hpp"

namespace ssqp {

MinMaxScaler MinMaxScaler::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw ArgumentError("normalize_fit: need at least 2 training rows");
  return {rows.colwise().minCoeff().transpose(), rows.colwise().maxCoeff().transpose()};
}

Eigen::VectorXd MinMaxScaler::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw ArgumentError("normalize_apply: dimension mismatch");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double span = hi(d) - lo(d);
    out(d) = span > 0.0 ? std::clamp((x(d) - lo(d)) / span, 0.0, 1.0) : 0.5;
  }
  return out;
}

Eigen::MatrixXd MinMaxScaler::apply_rows(const Eigen::MatrixXd& rows) const {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out.row(r) = apply(rows.row(r).transpose()).transpose();
  return out;
}

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * a * b.transpose()).colwise() + na;
  d2.rowwise() += nb.transpose();
  return (-gamma * d2.cwiseMax(0.0)).array().exp().matrix();
}

namespace {

struct DualSolution {
  Eigen::VectorXd alpha;   // [alpha; alpha^*]
  Eigen::VectorXd coeffs;  // alpha - alpha^*, one per training row
  double bias = 0.0;
  SvrTrainingStats stats;
};

// SMO for the nu-SVR dual in the libsvm parametrization:
//   min 1/2 (a - a*)' K (a - a*) - y'(a - a*)
//   s.t. sum(a - a*) = 0, sum(a + a*) = C nu l, 0 <= a, a* <= C.
// Variables t < l are a (sign +1), t >= l are a* (sign -1). Pairs are always
// taken from the same sign group so both equality constraints are preserved.
class NuSvrSolver {
 public:
  // `start`, when given, must be feasible for (nu, C).
  NuSvrSolver(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, double nu, double C, double tol,
              const Eigen::VectorXd* start)
      : K_(kernel), y_(y), l_(y.size()), C_(C), tol_(tol), alpha_(2 * l_), resid_(l_), diag_(kernel.diagonal()) {
    if (start) {
      alpha_ = *start;
    } else {
      double remaining = C * nu * static_cast<double>(l_) / 2.0;
      for (Eigen::Index i = 0; i < l_; ++i) {
        alpha_(i) = alpha_(i + l_) = std::min(remaining, C);
        remaining -= alpha_(i);
      }
    }
    resid_ = K_ * beta() - y_;
  }

  DualSolution solve() {
    const long max_iter = std::max<long>(10'000'000, 100 * static_cast<long>(l_));
    DualSolution out;
    long iter = 0;
    const long polish_every = std::max<long>(1000, 10 * static_cast<long>(l_));
    for (; iter < max_iter; ++iter) {
      Eigen::Index i = -1;
      Eigen::Index j = -1;
      if (!select_working_set(i, j)) break;
      update_pair(i, j);
      if ((iter + 1) % polish_every == 0) polish();
    }
    out.stats.iterations = iter;
    out.stats.converged = iter < max_iter;
    out.alpha = alpha_;
    out.coeffs = beta();
    out.bias = -rho();
    out.stats.n_rows = static_cast<std::size_t>(l_);
    for (Eigen::Index i = 0; i < l_; ++i) {
      if (out.coeffs(i) != 0.0) ++out.stats.n_support;
      if (alpha_(i) >= C_ || alpha_(i + l_) >= C_) ++out.stats.n_bounded;
    }
    return out;
  }

 private:
  static constexpr double kTau = 1e-12;

  Eigen::VectorXd beta() const { return alpha_.head(l_) - alpha_.tail(l_); }
  Eigen::Index row(Eigen::Index t) const { return t < l_ ? t : t - l_; }

  // The gradient is G_t = s_t (K beta - y)_row(t) with s = +1 for alpha and -1
  // for alpha^*, so one residual vector serves both groups.
  double grad(Eigen::Index t) const { return t < l_ ? resid_(t) : -resid_(t - l_); }

  // Maximal violator for i, second-order choice for j.
  bool select_working_set(Eigen::Index& out_i, Eigen::Index& out_j) const {
    const double* a = alpha_.data();
    const double* as = alpha_.data() + l_;
    const double* r = resid_.data();
    constexpr double inf = std::numeric_limits<double>::infinity();
    double gmax_p = -inf;
    double gmax_n = -inf;
    Eigen::Index ip = -1;
    Eigen::Index in = -1;
    for (Eigen::Index t = 0; t < l_; ++t) {
      if (a[t] < C_ && -r[t] >= gmax_p) gmax_p = -r[t], ip = t;
      if (as[t] > 0.0 && -r[t] >= gmax_n) gmax_n = -r[t], in = t;
    }

    Eigen::Index best_j = -1;
    double best_obj = inf;
    double gmax_p2 = -inf;
    double gmax_n2 = -inf;
    // Both groups share the same gradient-difference form gmax + r_t.
    auto scan = [&](const double* group, bool positive, Eigen::Index partner, double gmax, double& gmax2,
                    Eigen::Index offset) {
      const double* kp = partner >= 0 ? K_.col(partner).data() : nullptr;
      const double dp = partner >= 0 ? diag_(partner) : 0.0;
      for (Eigen::Index t = 0; t < l_; ++t) {
        if (positive ? group[t] <= 0.0 : group[t] >= C_) continue;
        gmax2 = std::max(gmax2, r[t]);
        const double grad_diff = gmax + r[t];
        if (partner < 0 || grad_diff <= 0.0) continue;
        double quad = dp + diag_(t) - 2.0 * kp[t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) best_obj = obj, best_j = t + offset;
      }
    };
    scan(a, true, ip, gmax_p, gmax_p2, 0);
    scan(as, false, in, gmax_n, gmax_n2, l_);

    if (std::max(gmax_p + gmax_p2, gmax_n + gmax_n2) < tol_ || best_j < 0) return false;
    out_i = best_j < l_ ? ip : in + l_;
    out_j = best_j;
    return true;
  }

  void update_pair(Eigen::Index i, Eigen::Index j) {
    const Eigen::Index ri = row(i);
    const Eigen::Index rj = row(j);
    double quad = diag_(ri) + diag_(rj) - 2.0 * K_(ri, rj);
    if (quad <= 0.0) quad = kTau;
    const double old_i = alpha_(i);
    const double old_j = alpha_(j);
    const double delta = (grad(i) - grad(j)) / quad;
    const double sum = old_i + old_j;
    double ai = old_i - delta;
    double aj = old_j + delta;
    if (sum > C_) {
      if (ai > C_) ai = C_, aj = sum - C_;
    } else if (aj < 0.0) {
      aj = 0.0, ai = sum;
    }
    if (sum > C_) {
      if (aj > C_) aj = C_, ai = sum - C_;
    } else if (ai < 0.0) {
      ai = 0.0, aj = sum;
    }
    alpha_(i) = ai;
    alpha_(j) = aj;

    const double s = i < l_ ? 1.0 : -1.0;
    const double di = s * (ai - old_i);
    const double dj = s * (aj - old_j);
    const double* ki = K_.col(ri).data();
    const double* kj = K_.col(rj).data();
    double* r = resid_.data();
    for (Eigen::Index t = 0; t < l_; ++t) r[t] += ki[t] * di + kj[t] * dj;
  }

  // Newton step on the face of the box where the currently free variables
  // move and the rest stay fixed: solves the KKT system (equal gradients within
  // each sign group, both equality constraints) and moves toward its solution
  // as far as the box allows. The dual objective is convex on that face, so
  // the step never increases it. SMO on its own crawls when most variables are
  // free, which is the usual state at large C.
  void polish() {
    std::vector<Eigen::Index> free;
    for (Eigen::Index t = 0; t < 2 * l_; ++t) {
      if (alpha_(t) > 0.0 && alpha_(t) < C_) free.push_back(t);
    }
    const auto m = static_cast<Eigen::Index>(free.size());
    if (m == 0) return;
    for (Eigen::Index t = 0; t < l_; ++t) {
      if (alpha_(t) > 0.0 && alpha_(t) < C_ && alpha_(t + l_) > 0.0 && alpha_(t + l_) < C_) return;
    }

    // Unknowns: free alphas, then the common residual of each group.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 2, m + 2);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m + 2);
    Eigen::VectorXd x0(m);
    Eigen::VectorXd beta_fixed = beta();
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index t = free[static_cast<std::size_t>(k)];
      x0(k) = alpha_(t);
      beta_fixed(row(t)) -= (t < l_ ? 1.0 : -1.0) * alpha_(t);
    }
    const Eigen::VectorXd k_fixed = K_ * beta_fixed;
    for (Eigen::Index k = 0; k < m; ++k) {
      const Eigen::Index tk = free[static_cast<std::size_t>(k)];
      for (Eigen::Index q = 0; q < m; ++q) {
        const Eigen::Index tq = free[static_cast<std::size_t>(q)];
        A(k, q) = (tq < l_ ? 1.0 : -1.0) * K_(row(tk), row(tq));
      }
      A(k, tk < l_ ? m : m + 1) = -1.0;
      b(k) = y_(row(tk)) - k_fixed(row(tk));
      A(m, k) = tk < l_ ? 1.0 : -1.0;
      A(m + 1, k) = 1.0;
    }
    b(m) = -beta_fixed.sum();
    b(m + 1) = x0.sum();
    const Eigen::VectorXd z = A.colPivHouseholderQr().solve(b);
    if (!z.allFinite() || (A * z - b).norm() > 1e-9 * std::max(1.0, b.norm())) return;

    const Eigen::VectorXd d = z.head(m) - x0;
    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double limit = d(k) > 0.0 ? (C_ - x0(k)) / d(k) : d(k) < 0.0 ? -x0(k) / d(k) : step;
      if (limit < step) step = limit, blocking = k;
    }
    if (!(step > 0.0)) return;
    for (Eigen::Index k = 0; k < m; ++k) {
      alpha_(free[static_cast<std::size_t>(k)]) = std::clamp(x0(k) + step * d(k), 0.0, C_);
    }
    if (blocking >= 0) alpha_(free[static_cast<std::size_t>(blocking)]) = d(blocking) > 0.0 ? C_ : 0.0;
    resid_ = K_ * beta() - y_;
  }

  // Offset from the free variables of each sign group, or the midpoint of the
  // feasible interval when a group has none.
  double rho() const {
    double r[2];
    for (int group = 0; group < 2; ++group) {
      double ub = std::numeric_limits<double>::infinity();
      double lb = -ub;
      double sum_free = 0.0;
      int n_free = 0;
      for (Eigen::Index k = 0; k < l_; ++k) {
        const Eigen::Index t = group == 0 ? k : k + l_;
        if (alpha_(t) >= C_) {
          lb = std::max(lb, grad(t));
        } else if (alpha_(t) <= 0.0) {
          ub = std::min(ub, grad(t));
        } else {
          ++n_free;
          sum_free += grad(t);
        }
      }
      r[group] = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
    }
    return (r[0] - r[1]) / 2.0;
  }

  const Eigen::MatrixXd& K_;
  const Eigen::VectorXd& y_;
  Eigen::Index l_;
  double C_;
  double tol_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd resid_;  // K beta - y
  Eigen::VectorXd diag_;
};

void check_params(double nu, double C, double gamma) {
  if (!(nu > 0.0 && nu < 1.0)) throw ArgumentError("nu-SVR: nu must lie in (0, 1)");
  if (!(C > 0.0)) throw ArgumentError("nu-SVR: C must be positive");
  if (!(gamma > 0.0)) throw ArgumentError("nu-SVR: gamma must be positive");
}

bool all_equal(const Eigen::VectorXd& y) { return (y.array() == y(0)).all(); }

DualSolution solve_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double nu, double C, double tol,
                        const Eigen::VectorXd* start = nullptr) {
  if (all_equal(y)) {
    DualSolution out;
    out.coeffs = Eigen::VectorXd::Zero(y.size());
    out.bias = y(0);
    out.stats.n_rows = static_cast<std::size_t>(y.size());
    return out;
  }
  return NuSvrSolver(K, y, nu, C, tol, start).solve();
}

SvrModel assemble(const Eigen::MatrixXd& X, const DualSolution& sol, const SvrParams& p) {
  SvrModel model;
  model.bias = sol.bias;
  model.gamma = p.gamma;
  model.C = p.C;
  model.nu = p.nu;
  model.input_dim = X.cols();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < sol.coeffs.size(); ++i) {
    if (sol.coeffs(i) != 0.0) keep.push_back(i);
  }
  model.support_vectors = X(keep, Eigen::all);
  model.dual_coeffs = sol.coeffs(keep);
  return model;
}

}  // namespace

SvrModel train_nu_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrParams& params,
                      SvrTrainingStats* stats) {
  if (X.rows() != y.size()) throw ArgumentError("train_nu_svr: row count and target count differ");
  if (X.rows() < 2) throw ArgumentError("train_nu_svr: need at least 2 training rows");
  check_params(params.nu, params.C, params.gamma);
  if (!X.allFinite() || !y.allFinite()) throw ArgumentError("train_nu_svr: non-finite training data");
  const DualSolution sol = solve_dual(rbf_kernel(X, X, params.gamma), y, params.nu, params.C, params.tolerance);
  if (stats) *stats = sol.stats;
  return assemble(X, sol, params);
}

double predict(const SvrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.input_dim) {
    throw ArgumentError("predict: expected " + std::to_string(model.input_dim) + " features, got " +
                        std::to_string(x.size()));
  }
  const Eigen::VectorXd z = model.scaler.empty() ? Eigen::VectorXd(x) : model.scaler.apply(x);
  double f = model.bias;
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    f += model.dual_coeffs(i) * std::exp(-model.gamma * (model.support_vectors.row(i).transpose() - z).squaredNorm());
  }
  return f;
}

Eigen::VectorXd predict_rows(const SvrModel& model, const Eigen::MatrixXd& rows) {
  Eigen::VectorXd out(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out(r) = predict(model, rows.row(r).transpose());
  return out;
}

SvrHyperparams SvrHyperparams::defaults() {
  SvrHyperparams h;
  for (int e = -5; e <= 15; e += 2) h.C_grid.push_back(std::ldexp(1.0, e));
  for (int e = -15; e <= 3; e += 2) h.gamma_grid.push_back(std::ldexp(1.0, e));
  return h;
}

void SvrHyperparams::validate() const {
  if (!(nu > 0.0 && nu < 1.0)) throw ArgumentError("hyperparameters: nu must lie in (0, 1)");
  if (C_grid.empty() || gamma_grid.empty()) throw ArgumentError("hyperparameters: grids must be non-empty");
  for (double c : C_grid) {
    if (!(c > 0.0)) throw ArgumentError("hyperparameters: C values must be positive");
  }
  for (double g : gamma_grid) {
    if (!(g > 0.0)) throw ArgumentError("hyperparameters: gamma values must be positive");
  }
  if (cv_folds < 2) throw ArgumentError("hyperparameters: cv_folds must be >= 2");
}

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  const auto order = shuffled_indices(n, seed);
  std::vector<int> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[order[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  return fold;
}

GridSearchResult grid_search_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrHyperparams& hyper,
                                 std::uint64_t seed) {
  hyper.validate();
  if (X.rows() != y.size()) throw ArgumentError("grid_search_cv: row count and target count differ");
  if (X.rows() < hyper.cv_folds) {
    throw ArgumentError("grid_search_cv: " + std::to_string(X.rows()) + " rows is fewer than " +
                        std::to_string(hyper.cv_folds) + " folds");
  }
  const auto fold = fold_assignment(static_cast<std::size_t>(X.rows()), hyper.cv_folds, seed);
  std::vector<std::vector<Eigen::Index>> train_idx(static_cast<std::size_t>(hyper.cv_folds));
  std::vector<std::vector<Eigen::Index>> test_idx(train_idx.size());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (int f = 0; f < hyper.cv_folds; ++f) {
      (fold[static_cast<std::size_t>(r)] == f ? test_idx : train_idx)[static_cast<std::size_t>(f)].push_back(r);
    }
  }

  std::vector<double> c_grid = hyper.C_grid;
  std::vector<double> g_grid = hyper.gamma_grid;
  std::sort(c_grid.begin(), c_grid.end());
  std::sort(g_grid.begin(), g_grid.end());
  std::vector<Eigen::MatrixXd> kernels;
  kernels.reserve(g_grid.size());
  for (double g : g_grid) kernels.push_back(rbf_kernel(X, X, g));

  // Each fold's solver starts from its solution at the next smaller C with the
  // same gamma, scaled by the ratio of the two C values. Scaling maps the
  // feasible set for one C exactly onto the feasible set for the other.
  Eigen::MatrixXd mse(c_grid.size(), g_grid.size());
  for (std::size_t gi = 0; gi < g_grid.size(); ++gi) {
    const Eigen::MatrixXd& K = kernels[gi];
    std::vector<Eigen::VectorXd> start(train_idx.size());
    for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
      const double c = c_grid[ci];
      double sse = 0.0;
      for (std::size_t f = 0; f < train_idx.size(); ++f) {
        const auto& tr = train_idx[f];
        const auto& te = test_idx[f];
        const Eigen::VectorXd y_tr = y(tr);
        const bool warm = start[f].size() > 0;
        if (warm) start[f] *= c / c_grid[ci - 1];
        const DualSolution sol = solve_dual(K(tr, tr), y_tr, hyper.nu, c, hyper.tolerance, warm ? &start[f] : nullptr);
        start[f] = sol.alpha;
        const Eigen::VectorXd pred = (K(te, tr) * sol.coeffs).array() + sol.bias;
        sse += (pred - y(te)).squaredNorm();
      }
      mse(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(gi)) = sse / static_cast<double>(X.rows());
    }
  }

  GridSearchResult best{c_grid.front(), g_grid.front(), std::numeric_limits<double>::infinity()};
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
    for (std::size_t gi = 0; gi < g_grid.size(); ++gi) {
      const double m = mse(static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(gi));
      if (m < best.cv_mse) best = {c_grid[ci], g_grid[gi], m};
    }
  }
  return best;
}

SvrModel fit_svr(const Eigen::MatrixXd& raw_rows, const Eigen::VectorXd& y, const SvrHyperparams& hyper,
                 std::uint64_t seed, GridSearchResult* selection) {
  MinMaxScaler scaler = MinMaxScaler::fit(raw_rows);
  const Eigen::MatrixXd X = scaler.apply_rows(raw_rows);
  const GridSearchResult gs = grid_search_cv(X, y, hyper, seed);
  if (selection) *selection = gs;
  SvrModel model = train_nu_svr(X, y, {hyper.nu, gs.C, gs.gamma, hyper.tolerance});
  model.scaler = std::move(scaler);
  return model;
}

}  // namespace ssqp
