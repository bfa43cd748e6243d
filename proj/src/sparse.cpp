#include "pdemts/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pdemts/metrics.hpp"

namespace pdemts {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

double lasso_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                       double lambda) {
  return (b - A * c).squaredNorm() + lambda * c.lpNorm<1>();
}

namespace {

void check_problem(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  if (A.rows() != b.size()) throw std::invalid_argument("design and target row counts differ");
  if (!A.allFinite() || !b.allFinite()) throw std::invalid_argument("design or target is not finite");
}

std::vector<std::size_t> support(const Eigen::VectorXd& c) {
  std::vector<std::size_t> s;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (c[i] != 0.0) s.push_back(static_cast<std::size_t>(i));
  return s;
}

}  // namespace

SparseFit lasso_cd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda, double tol,
                   int max_iter) {
  check_problem(A, b);
  if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  const Eigen::Index m = A.cols();
  SparseFit fit;
  fit.lambda = lambda;
  fit.coef = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd norms = A.colwise().squaredNorm();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (norms[i] == 0.0) fit.warnings.push_back("column " + std::to_string(i) + " is zero; coefficient fixed at 0");
  }
  Eigen::VectorXd r = b;
  fit.objective.push_back(lasso_objective(A, b, fit.coef, lambda));
  for (int it = 0; it < max_iter; ++it) {
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (norms[i] == 0.0) continue;
      const double old = fit.coef[i];
      const double rho = A.col(i).dot(r) + norms[i] * old;
      const double updated = soft_threshold(rho, lambda / 2.0) / norms[i];
      if (updated != old) {
        r.noalias() -= (updated - old) * A.col(i);
        fit.coef[i] = updated;
        max_change = std::max(max_change, std::fabs(updated - old));
      }
    }
    fit.iterations = it + 1;
    const double obj = lasso_objective(A, b, fit.coef, lambda);
    const double prev = fit.objective.back();
    if (obj > prev + 1e-12 * (1.0 + std::fabs(prev))) {
      throw std::logic_error("coordinate descent objective increased");
    }
    fit.objective.push_back(obj);
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.active = support(fit.coef);
  fit.empty = fit.active.empty();
  return fit;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return A.colPivHouseholderQr().solve(b);
}

SparseFit stlsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double threshold, int n_iters) {
  check_problem(A, b);
  if (threshold < 0) throw std::invalid_argument("threshold must be >= 0");
  const Eigen::Index m = A.cols();
  SparseFit fit;
  fit.coef = least_squares(A, b);
  std::vector<std::size_t> active;
  for (int it = 0; it < n_iters; ++it) {
    std::vector<std::size_t> keep;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::fabs(fit.coef[i]) >= threshold && fit.coef[i] != 0.0) keep.push_back(static_cast<std::size_t>(i));
    }
    fit.iterations = it + 1;
    const bool stable = it > 0 && keep == active;
    active = keep;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(m);
    if (!active.empty()) {
      Eigen::MatrixXd sub(A.rows(), static_cast<Eigen::Index>(active.size()));
      for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = A.col(static_cast<Eigen::Index>(active[k]));
      Eigen::VectorXd cs = least_squares(sub, b);
      for (std::size_t k = 0; k < active.size(); ++k) c[static_cast<Eigen::Index>(active[k])] = cs[static_cast<Eigen::Index>(k)];
    }
    fit.coef = c;
    fit.objective.push_back((b - A * c).squaredNorm());
    if (stable || active.empty()) {
      fit.converged = true;
      break;
    }
  }
  fit.active = support(fit.coef);
  fit.empty = fit.active.empty();
  return fit;
}

CvReport cross_validate_lambda(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                               std::vector<double> grid, int k, double tol, int max_iter) {
  check_problem(A, b);
  const Eigen::Index n = A.rows();
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (n < k) throw std::invalid_argument("fewer rows than folds");
  if (grid.empty()) throw std::invalid_argument("empty lambda grid");
  std::sort(grid.begin(), grid.end());
  CvReport rep;
  rep.grid = grid;
  rep.mean_error.assign(grid.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    const Eigen::Index lo = n * f / k, hi = n * (f + 1) / k;
    const Eigen::Index nv = hi - lo, nt = n - nv;
    Eigen::MatrixXd At(nt, A.cols());
    Eigen::VectorXd bt(nt);
    At.topRows(lo) = A.topRows(lo);
    At.bottomRows(n - hi) = A.bottomRows(n - hi);
    bt.head(lo) = b.head(lo);
    bt.tail(n - hi) = b.tail(n - hi);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto fit = lasso_cd(At, bt, grid[g], tol, max_iter);
      const double mse = (b.segment(lo, nv) - A.middleRows(lo, nv) * fit.coef).squaredNorm() /
                         static_cast<double>(nv);
      rep.mean_error[g] += mse / k;
    }
  }
  rep.best_index = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double best = rep.mean_error[rep.best_index];
    if (rep.mean_error[g] <= best + 1e-12 * std::fabs(best)) rep.best_index = g;
  }
  rep.best_lambda = grid[rep.best_index];
  rep.final_fit = lasso_cd(A, b, rep.best_lambda, tol, max_iter);
  return rep;
}

PdeSpec assemble_pde(const SparseFit& fit, const FunctionLibrary& library, const Symbol& lhs) {
  if (static_cast<std::size_t>(fit.coef.size()) != library.size()) {
    throw std::invalid_argument("fit has " + std::to_string(fit.coef.size()) + " coefficients, library has " +
                                std::to_string(library.size()) + " columns");
  }
  std::optional<Expr> rhs;
  for (std::size_t i = 0; i < library.size(); ++i) {
    const double c = fit.coef[static_cast<Eigen::Index>(i)];
    if (c == 0.0) continue;
    const Expr& basis = library.exprs[i];
    const bool unit = basis.op() == ExprOp::Constant && basis.value() == 1.0;
    if (!rhs) {
      rhs = unit ? Expr::constant(c) : Expr::constant(c) * basis;
      continue;
    }
    Expr term = unit ? Expr::constant(std::fabs(c)) : Expr::constant(std::fabs(c)) * basis;
    rhs = c < 0 ? *rhs - term : *rhs + term;
  }
  PdeSpec pde = make_pde(lhs, rhs ? *rhs : Expr::constant(0.0));
  pde.trivial = !rhs.has_value();
  return pde;
}

FitMetrics validate_pde(PdeSpec& pde, const ColumnTable& data) {
  const auto truth = data.column(pde.lhs);
  const auto pred = evaluate_batch(pde.rhs, data);
  pde.metrics = regression_metrics(truth, pred);
  return *pde.metrics;
}

}  // namespace pdemts
