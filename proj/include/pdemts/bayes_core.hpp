#pragma once

// Log densities, MAP, mean-field ADVI, NUTS and posterior summaries.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pdemts/autodiff.hpp"

namespace pdemts {

// Scalar log densities; values outside the support give -inf.
double normal_lpdf(double x, double mu, double sigma);
double laplace_lpdf(double x, double mu, double b);
double gamma_lpdf(double x, double alpha, double beta);  // beta is a rate
double half_cauchy_lpdf(double x, double loc, double scale);
double half_normal_lpdf(double x, double scale);

// Tape versions sum over the coordinates of `x`. Single-element parameter
// nodes broadcast. The support is not checked.
Var normal_lpdf(const Var& x, const Var& mu, const Var& sigma);
Var normal_lpdf(const Var& x, double mu, double sigma);
Var laplace_lpdf(const Var& x, const Var& mu, const Var& b);
Var laplace_lpdf(const Var& x, double mu, double b);
Var gamma_lpdf(const Var& x, double alpha, double beta);
Var half_cauchy_lpdf(const Var& x, double loc, double scale);
Var half_normal_lpdf(const Var& x, const Var& scale);
Var half_normal_lpdf(const Var& x, double scale);

// A density over a parameter vector. Coordinates flagged `positive` are
// sampled as z = log(x - lower); `log_density` always receives constrained
// values. An empty `lower` means all bounds are 0.
struct LogDensityModel {
  std::vector<std::string> labels;
  std::vector<bool> positive;
  std::function<Var(Tape& tape, const Var& params)> log_density;
  std::vector<double> lower;

  double bound(std::size_t k) const { return lower.empty() ? 0.0 : lower[k]; }

  std::size_t dim() const { return labels.size(); }
  std::vector<double> constrain(std::span<const double> z) const;
  std::vector<double> unconstrain(std::span<const double> x) const;

  // `jacobian` adds sum(z) over positive coordinates.
  Var logp_on_tape(Tape& tape, const Var& z, bool jacobian) const;
  double logp(std::span<const double> z, bool jacobian = true) const;
  std::vector<double> grad_logp(std::span<const double> z, bool jacobian = true, double* value = nullptr) const;
};

struct MapResult {
  std::vector<double> z;  // unconstrained argmax so far
  std::vector<double> x;  // constrained
  double logp = 0.0;
  double grad_norm = 0.0;
  int steps = 0;
};

// Adam ascent on logp without the Jacobian term.
MapResult map_estimate(const LogDensityModel& model, std::span<const double> init_z, int steps = 2000,
                       double lr = 0.05);

struct SamplerConfig {
  int chains = 1;
  int tune = 200;
  int draws = 1000;
  double target_accept = 0.9;
  int max_treedepth = 10;
  double init_step_size = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PosteriorSamples {
  std::vector<std::string> labels;
  std::size_t chains = 0, draws = 0;
  std::vector<double> values;  // [chain][draw][dim], constrained
  std::vector<double> accept_rate;
  std::vector<int> divergences;
  std::vector<double> step_size;
  std::vector<int> mean_tree_depth;
  std::vector<std::string> warnings;

  std::size_t dim() const { return labels.size(); }
  double at(std::size_t chain, std::size_t draw, std::size_t k) const {
    return values[(chain * draws + draw) * dim() + k];
  }
  // All chains and draws of coordinate k.
  std::vector<double> column(std::size_t k) const;

  void write_csv(std::ostream& out) const;
  void write_diagnostics(std::ostream& out) const;
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Multinomial NUTS with a diagonal metric. `init_z` is unconstrained.
PosteriorSamples nuts_sample(const LogDensityModel& model, const SamplerConfig& config,
                             std::span<const double> init_z);

struct VIApprox {
  std::vector<double> mean;     // unconstrained
  std::vector<double> log_std;  // unconstrained
  std::vector<double> elbo;     // per step
};

VIApprox advi_fit(const LogDensityModel& model, std::span<const double> init_z, int steps = 2000,
                  int mc_samples = 10, double lr = 0.05, std::uint64_t seed = 0);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Shortest window holding ceil(prob * n) sorted samples; ties go left.
Interval hdi(std::vector<double> samples, double prob = 0.95);

std::vector<double> posterior_mean(const PosteriorSamples& samples);

// Kolmogorov-Smirnov statistic of samples against a continuous CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace pdemts
