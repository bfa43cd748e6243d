#include "pdemts/bayes_core.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace pdemts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

// ---------------------------------------------------------------- scalar densities

double normal_lpdf(double x, double mu, double sigma) {
  if (!(sigma > 0)) return kNegInf;
  const double z = (x - mu) / sigma;
  return -kHalfLog2Pi - std::log(sigma) - 0.5 * z * z;
}

double laplace_lpdf(double x, double mu, double b) {
  if (!(b > 0)) return kNegInf;
  return -std::log(2.0 * b) - std::fabs(x - mu) / b;
}

double gamma_lpdf(double x, double alpha, double beta) {
  if (!(alpha > 0) || !(beta > 0) || !(x > 0)) return kNegInf;
  return alpha * std::log(beta) - std::lgamma(alpha) + (alpha - 1.0) * std::log(x) - beta * x;
}

double half_cauchy_lpdf(double x, double loc, double scale) {
  if (!(scale > 0) || x < loc) return kNegInf;
  const double z = (x - loc) / scale;
  return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(z * z);
}

double half_normal_lpdf(double x, double scale) {
  if (!(scale > 0) || x < 0) return kNegInf;
  const double z = x / scale;
  return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(scale) - 0.5 * z * z;
}

// ---------------------------------------------------------------- tape densities

namespace {

Var broadcast(const Var& p, const Shape& shape) {
  if (p.shape() == shape) return p;
  return ad::expand(p, shape);
}

Var filled(const Var& like, double v) { return like.tape().constant(Tensor(like.shape(), v)); }

double count(const Var& x) { return static_cast<double>(x.value().size()); }

}  // namespace

Var normal_lpdf(const Var& x, const Var& mu, const Var& sigma) {
  const Var s = broadcast(sigma, x.shape());
  const Var z = ad::mul(ad::sub(x, broadcast(mu, x.shape())), ad::recip(s));
  auto terms = ad::add(ad::log(s), ad::scale(ad::square(z), 0.5));
  return ad::add_scalar(ad::neg(ad::sum(terms)), -kHalfLog2Pi * count(x));
}

Var normal_lpdf(const Var& x, double mu, double sigma) {
  const Var z = ad::scale(ad::add_scalar(x, -mu), 1.0 / sigma);
  return ad::add_scalar(ad::scale(ad::sum(ad::square(z)), -0.5), -(kHalfLog2Pi + std::log(sigma)) * count(x));
}

Var laplace_lpdf(const Var& x, const Var& mu, const Var& b) {
  const Var bb = broadcast(b, x.shape());
  const Var dev = ad::mul(ad::abs(ad::sub(x, broadcast(mu, x.shape()))), ad::recip(bb));
  auto terms = ad::add(ad::log(bb), dev);
  return ad::add_scalar(ad::neg(ad::sum(terms)), -std::log(2.0) * count(x));
}

Var laplace_lpdf(const Var& x, double mu, double b) {
  auto dev = ad::scale(ad::sum(ad::abs(ad::add_scalar(x, -mu))), -1.0 / b);
  return ad::add_scalar(dev, -std::log(2.0 * b) * count(x));
}

Var gamma_lpdf(const Var& x, double alpha, double beta) {
  auto terms = ad::sub(ad::scale(ad::log(x), alpha - 1.0), ad::scale(x, beta));
  return ad::add_scalar(ad::sum(terms), (alpha * std::log(beta) - std::lgamma(alpha)) * count(x));
}

Var half_cauchy_lpdf(const Var& x, double loc, double scale) {
  auto z = ad::scale(ad::add_scalar(x, -loc), 1.0 / scale);
  auto terms = ad::log(ad::add_scalar(ad::square(z), 1.0));
  return ad::add_scalar(ad::neg(ad::sum(terms)), std::log(2.0 / (std::numbers::pi * scale)) * count(x));
}

Var half_normal_lpdf(const Var& x, const Var& scale) {
  const Var s = broadcast(scale, x.shape());
  const Var z = ad::mul(x, ad::recip(s));
  auto terms = ad::add(ad::log(s), ad::scale(ad::square(z), 0.5));
  return ad::add_scalar(ad::neg(ad::sum(terms)), 0.5 * std::log(2.0 / std::numbers::pi) * count(x));
}

Var half_normal_lpdf(const Var& x, double scale) {
  return half_normal_lpdf(x, filled(ad::sum(x), scale));
}

// ---------------------------------------------------------------- model

std::vector<double> LogDensityModel::constrain(std::span<const double> z) const {
  std::vector<double> x(z.begin(), z.end());
  for (std::size_t k = 0; k < x.size(); ++k)
    if (positive[k]) x[k] = bound(k) + std::exp(x[k]);
  return x;
}

std::vector<double> LogDensityModel::unconstrain(std::span<const double> x) const {
  std::vector<double> z(x.begin(), x.end());
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!positive[k]) continue;
    if (!(z[k] > bound(k))) throw std::invalid_argument("parameter " + labels[k] + " is not above its lower bound");
    z[k] = std::log(z[k] - bound(k));
  }
  return z;
}

Var LogDensityModel::logp_on_tape(Tape& tape, const Var& z, bool jacobian) const {
  if (z.value().size() != dim()) throw std::invalid_argument("parameter vector has the wrong length");
  const bool any = std::find(positive.begin(), positive.end(), true) != positive.end();
  if (!any) return log_density(tape, z);
  if (!lower.empty() && lower.size() != dim()) throw std::invalid_argument("lower bounds have the wrong length");
  Tensor mask({dim()}, 0.0), keep({dim()}, 1.0), shift({dim()}, 0.0);
  bool shifted = false;
  for (std::size_t k = 0; k < dim(); ++k)
    if (positive[k]) {
      mask[k] = 1.0;
      keep[k] = 0.0;
      shift[k] = bound(k);
      shifted = shifted || shift[k] != 0.0;
    }
  const Var m = tape.constant(mask);
  const Var zm = ad::mul(z, m);
  Var x = ad::add(ad::mul(z, tape.constant(keep)), ad::mul(ad::exp(zm), m));
  if (shifted) x = ad::add(x, tape.constant(shift));
  Var lp = log_density(tape, x);
  if (jacobian) lp = ad::add(lp, ad::sum(zm));
  return lp;
}

double LogDensityModel::logp(std::span<const double> z, bool jacobian) const {
  Tape tape;
  auto v = tape.constant(Tensor({z.size()}, std::vector<double>(z.begin(), z.end())));
  return logp_on_tape(tape, v, jacobian).value().item();
}

std::vector<double> LogDensityModel::grad_logp(std::span<const double> z, bool jacobian, double* value) const {
  Tape tape;
  auto v = tape.variable(Tensor({z.size()}, std::vector<double>(z.begin(), z.end())));
  auto lp = logp_on_tape(tape, v, jacobian);
  if (value) *value = lp.value().item();
  return tape.grad_values(lp, std::vector<Var>{v})[0].vec();
}

// ---------------------------------------------------------------- MAP

MapResult map_estimate(const LogDensityModel& model, std::span<const double> init_z, int steps, double lr) {
  std::vector<double> z(init_z.begin(), init_z.end());
  double lp = 0.0;
  auto g = model.grad_logp(z, false, &lp);
  if (!std::isfinite(lp)) throw std::invalid_argument("log density is not finite at the MAP initial point");
  MapResult best{z, model.constrain(z), lp, 0.0, 0};
  auto norm = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  best.grad_norm = norm(g);
  const std::size_t n = z.size();
  std::vector<double> m(n, 0.0), v(n, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= steps; ++t) {
    // Ascent with a slowly decaying rate so the iterate settles on the mode.
    const double rate = lr / std::sqrt(1.0 + t / 100.0);
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (1 - b1) * g[k];
      v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
      const double mh = m[k] / (1 - std::pow(b1, t)), vh = v[k] / (1 - std::pow(b2, t));
      z[k] += rate * mh / (std::sqrt(vh) + eps);
    }
    g = model.grad_logp(z, false, &lp);
    if (std::isfinite(lp) && lp > best.logp) {
      best.z = z;
      best.logp = lp;
      best.grad_norm = norm(g);
    }
    best.steps = t;
    if (!std::isfinite(lp)) break;
  }
  best.x = model.constrain(best.z);
  return best;
}

// ---------------------------------------------------------------- NUTS

void SamplerConfig::validate() const {
  if (chains < 1) throw std::invalid_argument("chains must be >= 1");
  if (tune < 1 || draws < 1) throw std::invalid_argument("tune and draws must be >= 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw std::invalid_argument("target_accept must lie in (0, 1)");
  if (max_treedepth < 1) throw std::invalid_argument("max_treedepth must be >= 1");
  if (!(init_step_size > 0.0)) throw std::invalid_argument("initial step size must be positive");
}

namespace {

using Vec = Eigen::VectorXd;

struct PhasePoint {
  Vec q, p, g;     // g = gradient of logp
  double lp = 0.0;  // logp
};

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

class Nuts {
 public:
  Nuts(const LogDensityModel& model, const SamplerConfig& cfg, std::uint64_t seed)
      : model_(model), cfg_(cfg), rng_(seed), inv_metric_(Vec::Ones(static_cast<Eigen::Index>(model.dim()))) {}

  void init_point(std::span<const double> z0) {
    z_.q = Eigen::Map<const Vec>(z0.data(), static_cast<Eigen::Index>(z0.size()));
    evaluate(z_);
    if (!std::isfinite(z_.lp)) throw SamplerError("log density is not finite at the initial point");
  }

  double hamiltonian(const PhasePoint& s) const {
    return -s.lp + 0.5 * s.p.dot(inv_metric_.cwiseProduct(s.p));
  }

  void sample_momentum(PhasePoint& s) {
    std::normal_distribution<double> n01;
    s.p.resize(s.q.size());
    for (Eigen::Index i = 0; i < s.q.size(); ++i) s.p[i] = n01(rng_) / std::sqrt(inv_metric_[i]);
  }

  Vec dtau_dp(const PhasePoint& s) const { return inv_metric_.cwiseProduct(s.p); }

  void leapfrog(PhasePoint& s, double eps) {
    s.p += 0.5 * eps * s.g;
    s.q += eps * dtau_dp(s);
    evaluate(s);
    s.p += 0.5 * eps * s.g;
  }

  static bool criterion(const Vec& p_sharp_minus, const Vec& p_sharp_plus, const Vec& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  bool build_tree(int depth, PhasePoint& z_propose, Vec& p_sharp_beg, Vec& p_sharp_end, Vec& rho, Vec& p_beg,
                  Vec& p_end, double H0, double sign, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_);
      ++n_leapfrog;
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - H0 > 1000.0) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
      sum_metro_prob += H0 - h > 0 ? 1.0 : std::exp(H0 - h);
      z_propose = z_;
      p_sharp_beg = dtau_dp(z_);
      p_sharp_end = p_sharp_beg;
      rho += z_.p;
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }
    const Eigen::Index n = z_.q.size();
    double lsw_init = kNegInf;
    Vec p_init_end(n), p_sharp_init_end(n), rho_init = Vec::Zero(n);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, H0, sign,
                    n_leapfrog, lsw_init, sum_metro_prob)) {
      return false;
    }
    PhasePoint z_propose_final = z_;
    double lsw_final = kNegInf;
    Vec p_final_beg(n), p_sharp_final_beg(n), rho_final = Vec::Zero(n);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, H0,
                    sign, n_leapfrog, lsw_final, sum_metro_prob)) {
      return false;
    }
    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree || uniform() < std::exp(lsw_final - lsw_subtree)) z_propose = z_propose_final;

    const Vec rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist &= criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist &= criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  // One NUTS transition from z_; returns the acceptance statistic.
  double transition() {
    sample_momentum(z_);
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    Vec p_fwd_fwd = z_.p, p_sharp_fwd_fwd = dtau_dp(z_);
    Vec p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp_fwd_fwd;
    Vec p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp_fwd_fwd;
    Vec p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp_fwd_fwd;
    Vec rho = z_.p;
    double log_sum_weight = 0.0;
    const double H0 = hamiltonian(z_);
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    depth_ = 0;
    divergent_ = false;
    const Eigen::Index n = z_.q.size();

    while (depth_ < cfg_.max_treedepth) {
      Vec rho_fwd = Vec::Zero(n), rho_bck = Vec::Zero(n);
      bool valid = false;
      double lsw_subtree = kNegInf;
      if (uniform() > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth_, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, H0,
                           1.0, n_leapfrog, lsw_subtree, sum_metro_prob);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth_, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, H0,
                           -1.0, n_leapfrog, lsw_subtree, sum_metro_prob);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth_;
      if (lsw_subtree > log_sum_weight || uniform() < std::exp(lsw_subtree - log_sum_weight)) z_sample = z_propose;
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist &= criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist &= criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    z_ = z_sample;
    return n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
  }

  // Doubles or halves eps until one leapfrog step crosses acceptance 0.8.
  void init_step_size() {
    const PhasePoint z_init = z_;
    auto delta_h = [&]() {
      z_ = z_init;
      sample_momentum(z_);
      const double H0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      return H0 - h;
    };
    const double log08 = std::log(0.8);
    const int direction = delta_h() > log08 ? 1 : -1;
    for (int iter = 0; iter < 200; ++iter) {
      const double dh = delta_h();
      if (direction == 1 && !(dh > log08)) break;
      if (direction == -1 && !(dh < log08)) break;
      eps_ = direction == 1 ? 2 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw SamplerError("step size diverged upward; the posterior may be improper");
      if (eps_ < 1e-300) throw SamplerError("step size collapsed to zero");
    }
    z_ = z_init;
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  void evaluate(PhasePoint& s) {
    std::vector<double> q(s.q.data(), s.q.data() + s.q.size());
    double lp = 0.0;
    auto g = model_.grad_logp(q, true, &lp);
    s.lp = std::isnan(lp) ? kNegInf : lp;
    s.g = Eigen::Map<const Vec>(g.data(), static_cast<Eigen::Index>(g.size()));
    if (std::isfinite(s.lp) && !s.g.allFinite()) {
      throw SamplerError("non-finite gradient of a finite log density");
    }
  }

  const LogDensityModel& model_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  Vec inv_metric_;
  PhasePoint z_;
  double eps_ = 1.0;
  int depth_ = 0;
  bool divergent_ = false;
};

// Windowed diagonal-metric schedule (initial buffer, doubling windows, terminal buffer).
class VarianceWindows {
 public:
  explicit VarianceWindows(int warmup) : warmup_(warmup) {
    if (init_buffer_ + base_window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<int>(0.15 * warmup);
      term_buffer_ = static_cast<int>(0.1 * warmup);
      base_window_ = warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when the metric was updated.
  bool learn(Eigen::VectorXd& var, const Eigen::VectorXd& q) {
    if (warmup_ < 20) return false;
    if (counter_ >= init_buffer_ && counter_ < warmup_ - term_buffer_ && counter_ != warmup_) add(q);
    if (counter_ == next_window_ && counter_ != warmup_) {
      next_window();
      const double n = static_cast<double>(n_);
      var = m2_ / (n - 1.0);
      var = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0)) * Eigen::VectorXd::Ones(var.size());
      n_ = 0;
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  void add(const Eigen::VectorXd& q) {
    if (n_ == 0) {
      mean_ = Eigen::VectorXd::Zero(q.size());
      m2_ = Eigen::VectorXd::Zero(q.size());
    }
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(q - mean_);
  }

  void next_window() {
    if (next_window_ == warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != warmup_ - term_buffer_ - 1 && next_window_ + 2 * window_size_ >= warmup_ - term_buffer_) {
      next_window_ = warmup_ - term_buffer_ - 1;
    }
  }

  int warmup_;
  int init_buffer_ = 75, term_buffer_ = 50, base_window_ = 25;
  int counter_ = 0, window_size_ = 0, next_window_ = 0;
  long n_ = 0;
  Eigen::VectorXd mean_, m2_;
};

// Nesterov dual averaging of log step size.
struct DualAveraging {
  double mu = 0.0, s_bar = 0.0, x_bar = 0.0;
  double counter = 0.0;
  double delta = 0.9, gamma = 0.05, kappa = 0.75, t0 = 10.0;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    s_bar = x_bar = counter = 0.0;
  }
  double learn(double accept) {
    counter += 1.0;
    accept = std::min(1.0, accept);
    const double eta = 1.0 / (counter + t0);
    s_bar = (1.0 - eta) * s_bar + eta * (delta - accept);
    const double x = mu - s_bar * std::sqrt(counter) / gamma;
    const double x_eta = std::pow(counter, -kappa);
    x_bar = (1.0 - x_eta) * x_bar + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar); }
};

}  // namespace

PosteriorSamples nuts_sample(const LogDensityModel& model, const SamplerConfig& cfg, std::span<const double> init_z) {
  cfg.validate();
  if (init_z.size() != model.dim()) throw std::invalid_argument("initial point has the wrong length");
  PosteriorSamples out;
  out.labels = model.labels;
  out.chains = static_cast<std::size_t>(cfg.chains);
  out.draws = static_cast<std::size_t>(cfg.draws);
  out.values.resize(out.chains * out.draws * model.dim());
  for (int c = 0; c < cfg.chains; ++c) {
    std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(c), std::uint64_t{0x6e757473}};
    std::uint64_t chain_seed = 0;
    {
      std::vector<std::uint32_t> words(2);
      seq.generate(words.begin(), words.end());
      chain_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    }
    Nuts nuts(model, cfg, chain_seed);
    nuts.init_point(init_z);
    nuts.eps_ = cfg.init_step_size;
    nuts.init_step_size();
    DualAveraging da;
    da.delta = cfg.target_accept;
    da.restart(nuts.eps_);
    VarianceWindows windows(cfg.tune);
    for (int t = 0; t < cfg.tune; ++t) {
      const double accept = nuts.transition();
      nuts.eps_ = da.learn(accept);
      if (windows.learn(nuts.inv_metric_, nuts.z_.q)) {
        nuts.init_step_size();
        da.restart(nuts.eps_);
      }
    }
    nuts.eps_ = da.final_step();
    double accept_sum = 0.0;
    long depth_sum = 0;
    int divergent = 0;
    for (int d = 0; d < cfg.draws; ++d) {
      accept_sum += nuts.transition();
      depth_sum += nuts.depth_;
      divergent += nuts.divergent_ ? 1 : 0;
      std::vector<double> q(nuts.z_.q.data(), nuts.z_.q.data() + nuts.z_.q.size());
      const auto x = model.constrain(q);
      std::copy(x.begin(), x.end(),
                out.values.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(c) * out.draws +
                                                                  static_cast<std::size_t>(d)) * model.dim()));
    }
    out.accept_rate.push_back(accept_sum / cfg.draws);
    out.divergences.push_back(divergent);
    out.step_size.push_back(nuts.eps_);
    out.mean_tree_depth.push_back(static_cast<int>(std::lround(static_cast<double>(depth_sum) / cfg.draws)));
    if (divergent > cfg.draws / 4) {
      out.warnings.push_back("chain " + std::to_string(c) + ": " + std::to_string(divergent) + " of " +
                             std::to_string(cfg.draws) + " draws diverged");
    }
  }
  return out;
}

std::vector<double> PosteriorSamples::column(std::size_t k) const {
  std::vector<double> v;
  v.reserve(chains * draws);
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t d = 0; d < draws; ++d) v.push_back(at(c, d, k));
  return v;
}

void PosteriorSamples::write_csv(std::ostream& out) const {
  out << "chain,draw";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  char buf[40];
  for (std::size_t c = 0; c < chains; ++c)
    for (std::size_t d = 0; d < draws; ++d) {
      out << c << ',' << d;
      for (std::size_t k = 0; k < dim(); ++k) {
        std::snprintf(buf, sizeof(buf), ",%.17g", at(c, d, k));
        out << buf;
      }
      out << '\n';
    }
}

void PosteriorSamples::write_diagnostics(std::ostream& out) const {
  char buf[160];
  for (std::size_t c = 0; c < accept_rate.size(); ++c) {
    std::snprintf(buf, sizeof(buf), "chain %zu: accept_rate=%.4f divergences=%d step_size=%.6g mean_tree_depth=%d\n",
                  c, accept_rate[c], divergences[c], step_size[c], mean_tree_depth[c]);
    out << buf;
  }
  for (const auto& w : warnings) out << "warning: " << w << '\n';
}

// ---------------------------------------------------------------- ADVI

VIApprox advi_fit(const LogDensityModel& model, std::span<const double> init_z, int steps, int mc_samples, double lr,
                  std::uint64_t seed) {
  if (mc_samples < 1) throw std::invalid_argument("ADVI needs at least one Monte-Carlo sample");
  const std::size_t n = model.dim();
  if (init_z.size() != n) throw std::invalid_argument("initial point has the wrong length");
  VIApprox q;
  q.mean.assign(init_z.begin(), init_z.end());
  q.log_std.assign(n, 0.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<double> m(2 * n, 0.0), v(2 * n, 0.0);
  const double b1 = 0.9, b2 = 0.99, eps = 1e-8;
  std::vector<double> avg_mean(n, 0.0), avg_log_std(n, 0.0);
  int averaged = 0;
  for (int t = 1; t <= steps; ++t) {
    Tape tape;
    auto mu = tape.variable(Tensor({n}, q.mean));
    auto omega = tape.variable(Tensor({n}, q.log_std));
    Var total = ad::sum(omega);
    const Var sd = ad::exp(omega);
    for (int s = 0; s < mc_samples; ++s) {
      Tensor e({n});
      for (std::size_t k = 0; k < n; ++k) e[k] = n01(rng);
      const Var z = ad::add(mu, ad::mul(sd, tape.constant(std::move(e))));
      total = ad::add(total, ad::scale(model.logp_on_tape(tape, z, true), 1.0 / mc_samples));
    }
    const double elbo = total.value().item();
    q.elbo.push_back(elbo);
    if (!std::isfinite(elbo)) {
      throw SamplerError("ELBO became non-finite at step " + std::to_string(t) + " after " +
                         std::to_string(q.elbo.size() - 1) + " finite steps");
    }
    auto g = tape.grad_values(total, std::vector<Var>{mu, omega});
    const double rate = lr / std::sqrt(1.0 + t / 100.0);
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const double gk = k < n ? g[0][k] : g[1][k - n];
      m[k] = b1 * m[k] + (1 - b1) * gk;
      v[k] = b2 * v[k] + (1 - b2) * gk * gk;
      const double step = rate * (m[k] / (1 - std::pow(b1, t))) / (std::sqrt(v[k] / (1 - std::pow(b2, t))) + eps);
      // Mean steps are measured in units of the current standard deviation.
      if (k < n) {
        q.mean[k] += step * std::exp(q.log_std[k]);
      } else {
        q.log_std[k - n] += step;
      }
    }
    if (t > steps - steps / 4) {
      for (std::size_t k = 0; k < n; ++k) {
        avg_mean[k] += q.mean[k];
        avg_log_std[k] += q.log_std[k];
      }
      ++averaged;
    }
  }
  // Iterate averaging over the last quarter of the run.
  if (averaged > 0) {
    for (std::size_t k = 0; k < n; ++k) {
      q.mean[k] = avg_mean[k] / averaged;
      q.log_std[k] = avg_log_std[k] / averaged;
    }
  }
  return q;
}

// ---------------------------------------------------------------- summaries

Interval hdi(std::vector<double> samples, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw std::invalid_argument("HDI probability must lie in (0, 1)");
  if (samples.size() < 10) throw std::invalid_argument("HDI needs at least 10 samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const auto k = static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n)));
  std::size_t best = 0;
  double width = samples[k - 1] - samples[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double w = samples[i + k - 1] - samples[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  return {samples[best], samples[best + k - 1]};
}

std::vector<double> posterior_mean(const PosteriorSamples& s) {
  if (s.chains * s.draws == 0) throw std::invalid_argument("posterior mean of an empty sample");
  std::vector<double> mean(s.dim(), 0.0);
  for (std::size_t c = 0; c < s.chains; ++c)
    for (std::size_t d = 0; d < s.draws; ++d)
      for (std::size_t k = 0; k < s.dim(); ++k) mean[k] += s.at(c, d, k);
  for (auto& m : mean) m /= static_cast<double>(s.chains * s.draws);
  return mean;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace pdemts
