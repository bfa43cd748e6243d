#pragma once

// Log-density builders: B-LASSO for discovery, BLR / PI-BLR and BNN / B-PINN
// for prediction, the PDE potential, and posterior-predictive summaries.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdemts/bayes_core.hpp"
#include "pdemts/expr.hpp"
#include "pdemts/featlib.hpp"
#include "pdemts/net.hpp"

namespace pdemts {

// Rows are samples. `state_columns[k - 1]` is the column of `inputs` holding
// state X_k at the most recent step; derivative symbols dYj_dXk refer to it.
// Empty means column k - 1.
struct RegressionData {
  Eigen::MatrixXd inputs;   // (n, m)
  Eigen::MatrixXd targets;  // (n, p)
  std::vector<std::size_t> state_columns;

  std::size_t state_column(int k) const;
  std::size_t states() const { return state_columns.empty() ? static_cast<std::size_t>(inputs.cols()) : state_columns.size(); }
};

// A density plus what the downstream tools need to use its draws.
struct BayesModel {
  std::string kind;  // blasso, blr, pi_blr, bnn, bpinn
  LogDensityModel density;
  // Constrained parameters and an input matrix to predictions (n, p).
  std::function<Eigen::MatrixXd(std::span<const double> x, const Eigen::MatrixXd& inputs)> forward;
  // Per-PDE residuals at constrained parameters, as a tape node of shape (r).
  std::function<Var(Tape& tape, const Var& x, const std::vector<PdeSpec>& pdes)> residuals;
  std::vector<double> init_z;  // unconstrained starting point
  std::vector<std::pair<std::string, std::string>> manifest;
  std::size_t pde_count = 0;

  void write_manifest(std::ostream& out) const;
};

// ---------------------------------------------------------------- B-LASSO

struct BlassoHyper {
  double mu_beta = 0.0;
  double alpha_lambda = 1.0;
  double beta_lambda = 1.0;  // rate
  double mu_sigma = 0.0;
  double sigma_sigma = 1.0;
};

struct BlassoSpec {
  Eigen::MatrixXd design;  // Theta(X), (n, m)
  Eigen::VectorXd target;  // (n)
  std::vector<std::string> names;  // column names; defaults to c0, c1, ...
  BlassoHyper hyper;
};

// Parameters: beta[name] (m), lambda[name] (m, positive), sigma.
BayesModel build_blasso(const BlassoSpec& spec);

// Keeps terms whose HDI excludes 0, with posterior-mean coefficients. The
// draws must carry one beta label per library column, in order.
PdeSpec select_terms_blasso(const PosteriorSamples& samples, const FunctionLibrary& library, const Symbol& lhs,
                            double prob = 0.95);

// ---------------------------------------------------------------- BLR / PI-BLR

struct BlrHyper {
  double alpha_lambda = 1.0;
  double beta_lambda = 1.0;
  double sigma_eps = 1.0;
  double mu_sigma = 0.0;
  double sigma_sigma = 1.0;
};

// beta = lambda * eps with shape (p, m); Y ~ Normal(X beta^T, sigma^2).
// Parameters: eps[j,c], lambda[j,c] (positive), sigma.
BayesModel build_blr(const RegressionData& data, const BlrHyper& hyper = {});

// Effective coefficients of a BLR draw, (p, m).
Eigen::MatrixXd blr_coefficients(std::span<const double> x, std::size_t p, std::size_t m);

// residual_r = mean over rows of (beta[j, col(i)] - f(row)) for pde r with
// lhs dYj_dXi. Derivative symbols bind to coefficients; Xk and Yj bind to
// the batch. Throws BindingError for symbols with no binding.
Var pde_residual_linear(const Var& beta, const std::vector<PdeSpec>& pdes, const RegressionData& batch);

// logp' = logp - sum(residual^2) / (2 sigma_pde^2) over pdes with mask set.
// With no such pdes the model is returned unchanged.
BayesModel add_pde_potential(BayesModel model, const std::vector<PdeSpec>& pdes, double sigma_pde = 0.1);

// Euclidean norm of the masked residuals at constrained parameters.
double pde_residual_norm(const BayesModel& model, std::span<const double> x, const std::vector<PdeSpec>& pdes);

// ---------------------------------------------------------------- BNN / B-PINN

struct BpinnHyper {
  double c = 0.01;
  double sigma_w2 = 1.0;  // variance
  double sigma_b2 = 0.1;  // variance
  double sigma_sigma = 1.0;
};

class UnsupportedSpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// `net` must be Flatten/Dense layers with tanh hidden layers and a linear
// head. Inputs are flattened windows (n, T * d); state_columns default to the
// last step. H = tanh(H (c W) + b). Parameters: W1[i,j], b1[j], ..., sigma.
BayesModel build_bpinn(const NetworkSpec& net, const RegressionData& data, const BpinnHyper& hyper = {},
                       std::uint64_t init_seed = 0);

// ---------------------------------------------------------------- prediction

struct Predictive {
  Eigen::MatrixXd mean, lower, upper;  // (n, p)
  std::size_t draws = 0;
};

// Interval is the HDI at `prob`; below 10 draws it is the min-max range.
Predictive posterior_predict(const BayesModel& model, const PosteriorSamples& samples, const Eigen::MatrixXd& inputs,
                             double prob = 0.95);

// index, then truth/mean/lower/upper per target.
void write_predictive_csv(std::ostream& out, const Predictive& pred, const Eigen::MatrixXd& truth,
                          const std::vector<std::string>& names);

}  // namespace pdemts
