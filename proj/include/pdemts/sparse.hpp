#pragma once

// Sparse regression: sequentially thresholded least squares and LASSO by
// cyclic coordinate descent on ||b - A c||^2 + lambda ||c||_1 (no 1/n factor,
// so useful lambdas grow with the row count).

#include <vector>

#include <Eigen/Dense>

#include "pdemts/expr.hpp"
#include "pdemts/featlib.hpp"

namespace pdemts {

struct SparseFit {
  Eigen::VectorXd coef;
  std::vector<std::size_t> active;
  double lambda = 0.0;
  std::vector<double> objective;  // per full sweep (lasso) or per iteration (stlsq)
  int iterations = 0;
  bool converged = false;
  bool empty = false;
  std::vector<std::string> warnings;
};

double soft_threshold(double x, double t);
double lasso_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                       double lambda);

SparseFit lasso_cd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda,
                   double tol = 1e-12, int max_iter = 10000);

Eigen::VectorXd least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

SparseFit stlsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double threshold = 0.05,
                int n_iters = 10);

inline const std::vector<double> kDefaultLambdaGrid = {0.01, 0.1, 1.0, 10.0, 100.0};

struct CvReport {
  std::vector<double> grid;
  std::vector<double> mean_error;
  std::size_t best_index = 0;
  double best_lambda = 0.0;
  SparseFit final_fit;  // all rows at best_lambda
};

// Contiguous chronological folds; ties go to the larger lambda.
CvReport cross_validate_lambda(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                               std::vector<double> grid = kDefaultLambdaGrid, int k = 5,
                               double tol = 1e-12, int max_iter = 10000);

PdeSpec assemble_pde(const SparseFit& fit, const FunctionLibrary& library, const Symbol& lhs);

// Evaluates rhs against the lhs column of `data` and stores the metrics on `pde`.
FitMetrics validate_pde(PdeSpec& pde, const ColumnTable& data);

}  // namespace pdemts
