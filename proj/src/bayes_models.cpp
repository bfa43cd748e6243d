#include "pdemts/bayes_models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include "pdemts/sparse.hpp"

namespace pdemts {

namespace {

Tensor to_tensor(const Eigen::MatrixXd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return t;
}

Tensor column_tensor(const Eigen::MatrixXd& m, std::size_t c) {
  Tensor t({static_cast<std::size_t>(m.rows())});
  for (Eigen::Index i = 0; i < m.rows(); ++i) t[static_cast<std::size_t>(i)] = m(i, static_cast<Eigen::Index>(c));
  return t;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Stacks scalar nodes into shape (r).
Var stack(Tape& tape, const std::vector<Var>& parts) {
  const std::size_t r = parts.size();
  if (r == 0) return tape.constant(Tensor(Shape{0}));
  Var out;
  for (std::size_t i = 0; i < r; ++i) {
    Var piece = ad::pad(ad::reshape(parts[i], Shape{1}), 0, i, r - i - 1);
    out = out.valid() ? ad::add(out, piece) : piece;
  }
  return out;
}

std::vector<PdeSpec> active(const std::vector<PdeSpec>& pdes) {
  std::vector<PdeSpec> out;
  for (const auto& p : pdes)
    if (p.mask) out.push_back(p);
  return out;
}

bool binds_batch(const Expr& rhs) {
  for (const auto& s : collect_symbols(rhs))
    if (s.kind != SymbolKind::Derivative) return true;
  return false;
}

// Shared by the linear and network residuals: `derivative(j, k)` yields a
// node of the requested shape for dYj_dXk.
Var residual_vector(const std::vector<PdeSpec>& pdes, const RegressionData& batch, Tape& tape,
                    const std::function<Var(int, int, const Shape&)>& derivative) {
  const std::size_t n = static_cast<std::size_t>(batch.inputs.rows());
  const auto p = static_cast<int>(batch.targets.cols());
  const auto d = static_cast<int>(batch.states());
  std::vector<Var> parts;
  for (const auto& pde : pdes) {
    if (pde.lhs.kind != SymbolKind::Derivative) throw std::invalid_argument("PDE lhs must be a derivative symbol");
    const Shape shape = binds_batch(pde.rhs) ? Shape{n} : Shape{1};
    if (shape[0] == 0) throw std::invalid_argument("PDE residual needs at least one batch row");
    std::map<Symbol, Var> bindings;
    auto in_range = [&](const Symbol& s) {
      switch (s.kind) {
        case SymbolKind::State:
          return s.input >= 1 && s.input <= d;
        case SymbolKind::Target:
          return s.target >= 1 && s.target <= p;
        case SymbolKind::Derivative:
          return s.target >= 1 && s.target <= p && s.input >= 1 && s.input <= d;
      }
      return false;
    };
    if (!in_range(pde.lhs)) throw BindingError(pde.lhs);
    for (const auto& s : collect_symbols(pde.rhs)) {
      if (!in_range(s)) throw BindingError(s);
      switch (s.kind) {
        case SymbolKind::State:
          bindings.emplace(s, tape.constant(column_tensor(batch.inputs, batch.state_column(s.input))));
          break;
        case SymbolKind::Target:
          bindings.emplace(s, tape.constant(column_tensor(batch.targets, static_cast<std::size_t>(s.target - 1))));
          break;
        case SymbolKind::Derivative:
          bindings.emplace(s, derivative(s.target, s.input, shape));
          break;
      }
    }
    const Var f = evaluate_on_tape(pde.rhs, bindings, tape, shape);
    const Var lhs = derivative(pde.lhs.target, pde.lhs.input, shape);
    parts.push_back(ad::mean(ad::sub(lhs, f)));
  }
  return stack(tape, parts);
}

void check_data(const RegressionData& data) {
  if (data.inputs.rows() != data.targets.rows()) {
    throw std::invalid_argument("inputs have " + std::to_string(data.inputs.rows()) + " rows, targets have " +
                                std::to_string(data.targets.rows()));
  }
  if (!data.inputs.allFinite() || !data.targets.allFinite()) throw std::invalid_argument("data must be finite");
  for (std::size_t c : data.state_columns)
    if (c >= static_cast<std::size_t>(data.inputs.cols())) throw std::invalid_argument("state column out of range");
}

}  // namespace

std::size_t RegressionData::state_column(int k) const {
  if (k < 1 || static_cast<std::size_t>(k) > states()) throw std::out_of_range("no state X" + std::to_string(k));
  return state_columns.empty() ? static_cast<std::size_t>(k - 1) : state_columns[static_cast<std::size_t>(k - 1)];
}

void BayesModel::write_manifest(std::ostream& out) const {
  out << "kind=" << kind << "\n";
  out << "parameters=" << density.dim() << "\n";
  out << "pdes=" << pde_count << "\n";
  for (const auto& [k, v] : manifest) out << k << "=" << v << "\n";
}

// ---------------------------------------------------------------- B-LASSO

BayesModel build_blasso(const BlassoSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.design.rows());
  const auto m = static_cast<std::size_t>(spec.design.cols());
  if (static_cast<std::size_t>(spec.target.size()) != n) {
    throw std::invalid_argument("design has " + std::to_string(n) + " rows, target has " +
                                std::to_string(spec.target.size()));
  }
  if (m == 0) throw std::invalid_argument("design has no columns");
  if (!spec.design.allFinite() || !spec.target.allFinite()) throw std::invalid_argument("design must be finite");
  const auto& h = spec.hyper;
  if (!(h.alpha_lambda > 0) || !(h.beta_lambda > 0)) throw std::invalid_argument("Gamma hyperparameters must be > 0");
  if (!(h.sigma_sigma > 0)) throw std::invalid_argument("sigma_sigma must be > 0");
  if (!spec.names.empty() && spec.names.size() != m) throw std::invalid_argument("one name per design column");

  BayesModel model;
  model.kind = "blasso";
  auto& dm = model.density;
  for (const char* group : {"beta", "lambda"})
    for (std::size_t k = 0; k < m; ++k) {
      dm.labels.push_back(std::string(group) + "[" + (spec.names.empty() ? "c" + std::to_string(k) : spec.names[k]) + "]");
      dm.positive.push_back(group[0] == 'l');
    }
  dm.labels.push_back("sigma");
  dm.positive.push_back(true);
  dm.lower.assign(2 * m + 1, 0.0);
  dm.lower.back() = h.mu_sigma;

  const Tensor design = to_tensor(spec.design);
  Tensor target({n});
  for (std::size_t i = 0; i < n; ++i) target[i] = spec.target[static_cast<Eigen::Index>(i)];
  dm.log_density = [design, target, h, n, m](Tape& tape, const Var& x) {
    const Var beta = ad::slice(x, 0, 0, m);
    const Var lambda = ad::slice(x, 0, m, m);
    const Var sigma = ad::element(x, 2 * m);
    Var lp = ad::add(laplace_lpdf(beta, tape.constant(Tensor({m}, h.mu_beta)), lambda),
                     gamma_lpdf(lambda, h.alpha_lambda, h.beta_lambda));
    lp = ad::add(lp, half_cauchy_lpdf(sigma, h.mu_sigma, h.sigma_sigma));
    if (n > 0) {
      const Var pred = ad::reshape(ad::matmul(tape.constant(design), ad::reshape(beta, Shape{m, 1})), Shape{n});
      lp = ad::add(lp, normal_lpdf(tape.constant(target), pred, sigma));
    }
    return lp;
  };
  model.forward = [m](std::span<const double> x, const Eigen::MatrixXd& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != m) throw std::invalid_argument("design width mismatch");
    Eigen::VectorXd beta(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) beta[static_cast<Eigen::Index>(k)] = x[k];
    return Eigen::MatrixXd(inputs * beta);
  };
  model.init_z.assign(2 * m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) model.init_z[k] = h.mu_beta;
  model.manifest = {{"mu_beta", num(h.mu_beta)},           {"alpha_lambda", num(h.alpha_lambda)},
                    {"beta_lambda", num(h.beta_lambda)},   {"mu_sigma", num(h.mu_sigma)},
                    {"sigma_sigma", num(h.sigma_sigma)},   {"rows", std::to_string(n)},
                    {"columns", std::to_string(m)}};
  return model;
}

PdeSpec select_terms_blasso(const PosteriorSamples& samples, const FunctionLibrary& library, const Symbol& lhs,
                            double prob) {
  if (samples.chains * samples.draws == 0) throw std::invalid_argument("posterior has no draws");
  std::vector<std::size_t> beta;
  for (std::size_t k = 0; k < samples.labels.size(); ++k)
    if (samples.labels[k].rfind("beta[", 0) == 0) beta.push_back(k);
  if (beta.size() != library.size()) {
    throw std::invalid_argument("posterior has " + std::to_string(beta.size()) + " beta labels, library has " +
                                std::to_string(library.size()) + " columns");
  }
  SparseFit fit;
  fit.coef = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(library.size()));
  for (std::size_t k = 0; k < beta.size(); ++k) {
    auto col = samples.column(beta[k]);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    const Interval iv = hdi(std::move(col), prob);
    if (iv.low > 0.0 || iv.high < 0.0) {
      fit.coef[static_cast<Eigen::Index>(k)] = mean;
      fit.active.push_back(k);
    }
  }
  fit.empty = fit.active.empty();
  return assemble_pde(fit, library, lhs);
}

// ---------------------------------------------------------------- BLR / PI-BLR

BayesModel build_blr(const RegressionData& data, const BlrHyper& h) {
  check_data(data);
  const auto n = static_cast<std::size_t>(data.inputs.rows());
  const auto m = static_cast<std::size_t>(data.inputs.cols());
  const auto p = static_cast<std::size_t>(data.targets.cols());
  if (m == 0 || p == 0) throw std::invalid_argument("BLR needs at least one input and one target");
  if (!(h.alpha_lambda > 0) || !(h.beta_lambda > 0)) throw std::invalid_argument("Gamma hyperparameters must be > 0");
  if (!(h.sigma_eps > 0) || !(h.sigma_sigma > 0)) throw std::invalid_argument("prior scales must be > 0");

  BayesModel model;
  model.kind = "blr";
  auto& dm = model.density;
  for (const char* group : {"eps", "lambda"})
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t c = 0; c < m; ++c) {
        dm.labels.push_back(std::string(group) + "[" + std::to_string(j + 1) + "," + std::to_string(c + 1) + "]");
        dm.positive.push_back(group[0] == 'l');
      }
  dm.labels.push_back("sigma");
  dm.positive.push_back(true);
  dm.lower.assign(2 * p * m + 1, 0.0);
  dm.lower.back() = h.mu_sigma;

  const Tensor inputs = to_tensor(data.inputs);
  const Tensor targets = to_tensor(data.targets);
  const std::size_t pm = p * m;
  auto beta_of = [p, m, pm](const Var& x) {
    return ad::mul(ad::reshape(ad::slice(x, 0, pm, pm), Shape{p, m}), ad::reshape(ad::slice(x, 0, 0, pm), Shape{p, m}));
  };
  dm.log_density = [inputs, targets, h, n, pm, beta_of](Tape& tape, const Var& x) {
    const Var eps = ad::slice(x, 0, 0, pm);
    const Var lambda = ad::slice(x, 0, pm, pm);
    const Var sigma = ad::element(x, 2 * pm);
    Var lp = ad::add(normal_lpdf(eps, 0.0, h.sigma_eps), gamma_lpdf(lambda, h.alpha_lambda, h.beta_lambda));
    lp = ad::add(lp, half_cauchy_lpdf(sigma, h.mu_sigma, h.sigma_sigma));
    if (n > 0) {
      const Var pred = ad::matmul(tape.constant(inputs), ad::transpose(beta_of(x)));
      lp = ad::add(lp, normal_lpdf(tape.constant(targets), pred, sigma));
    }
    return lp;
  };
  model.residuals = [data, beta_of](Tape&, const Var& x, const std::vector<PdeSpec>& pdes) {
    return pde_residual_linear(beta_of(x), pdes, data);
  };
  model.forward = [p, m](std::span<const double> x, const Eigen::MatrixXd& in) {
    if (static_cast<std::size_t>(in.cols()) != m) throw std::invalid_argument("input width mismatch");
    return Eigen::MatrixXd(in * blr_coefficients(x, p, m).transpose());
  };
  model.init_z.assign(2 * pm + 1, 0.0);
  model.manifest = {{"alpha_lambda", num(h.alpha_lambda)}, {"beta_lambda", num(h.beta_lambda)},
                    {"sigma_eps", num(h.sigma_eps)},       {"mu_sigma", num(h.mu_sigma)},
                    {"sigma_sigma", num(h.sigma_sigma)},   {"rows", std::to_string(n)},
                    {"inputs", std::to_string(m)},         {"targets", std::to_string(p)}};
  return model;
}

Eigen::MatrixXd blr_coefficients(std::span<const double> x, std::size_t p, std::size_t m) {
  if (x.size() < 2 * p * m) throw std::invalid_argument("BLR draw is too short");
  Eigen::MatrixXd beta(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t c = 0; c < m; ++c) {
      const std::size_t k = j * m + c;
      beta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = x[k] * x[p * m + k];
    }
  return beta;
}

Var pde_residual_linear(const Var& beta, const std::vector<PdeSpec>& pdes, const RegressionData& batch) {
  check_data(batch);
  const auto& shape = beta.value().shape();
  const std::size_t p = static_cast<std::size_t>(batch.targets.cols());
  const std::size_t m = static_cast<std::size_t>(batch.inputs.cols());
  if (shape.size() != 2 || shape[0] != p || shape[1] != m) {
    throw std::invalid_argument("coefficients have shape " + shape_string(shape) + ", expected (" + std::to_string(p) +
                                ", " + std::to_string(m) + ")");
  }
  auto derivative = [&](int j, int k, const Shape& s) {
    const std::size_t flat = static_cast<std::size_t>(j - 1) * m + batch.state_column(k);
    return ad::expand(ad::element(beta, flat), s);
  };
  return residual_vector(pdes, batch, beta.tape(), derivative);
}

BayesModel add_pde_potential(BayesModel model, const std::vector<PdeSpec>& pdes, double sigma_pde) {
  if (!(sigma_pde > 0)) throw std::invalid_argument("sigma_pde must be > 0");
  auto used = active(pdes);
  if (used.empty()) return model;
  if (!model.residuals) throw std::invalid_argument(model.kind + " model has no PDE residuals");
  const double w = -0.5 / (sigma_pde * sigma_pde);
  auto base = model.density.log_density;
  auto residuals = model.residuals;
  model.density.log_density = [base, residuals, used, w](Tape& tape, const Var& x) {
    const Var r = residuals(tape, x, used);
    return ad::add(base(tape, x), ad::scale(ad::sum(ad::square(r)), w));
  };
  if (model.kind == "blr") model.kind = "pi_blr";
  if (model.kind == "bnn") model.kind = "bpinn";
  model.pde_count = used.size();
  model.manifest.emplace_back("sigma_pde", num(sigma_pde));
  return model;
}

double pde_residual_norm(const BayesModel& model, std::span<const double> x, const std::vector<PdeSpec>& pdes) {
  auto used = active(pdes);
  if (used.empty()) return 0.0;
  if (!model.residuals) throw std::invalid_argument(model.kind + " model has no PDE residuals");
  Tape tape;
  const Var v = tape.variable(Tensor({x.size()}, std::vector<double>(x.begin(), x.end())));
  const Var r = model.residuals(tape, v, used);
  double s = 0.0;
  for (double e : r.value().data()) s += e * e;
  return std::sqrt(s);
}

// ---------------------------------------------------------------- BNN / B-PINN

BayesModel build_bpinn(const NetworkSpec& net, const RegressionData& given, const BpinnHyper& h,
                       std::uint64_t init_seed) {
  check_data(given);
  std::vector<std::size_t> widths{net.lag * net.inputs};
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.kind == LayerSpec::Kind::Flatten && l == 0) continue;
    if (layer.kind != LayerSpec::Kind::Dense) throw UnsupportedSpecError("B-PINN supports only dense layers");
    widths.push_back(layer.units);
  }
  const std::size_t L = widths.size() - 1;
  if (L == 0) throw UnsupportedSpecError("B-PINN needs at least one dense layer");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.kind != LayerSpec::Kind::Dense) continue;
    const bool last = l + 1 == net.layers.size();
    if (last && layer.activation != Activation::Linear) throw UnsupportedSpecError("B-PINN head must be linear");
    if (!last && layer.activation != Activation::Tanh) throw UnsupportedSpecError("B-PINN hidden layers must be tanh");
  }
  if (static_cast<std::size_t>(given.inputs.cols()) != widths.front()) {
    throw std::invalid_argument("inputs have " + std::to_string(given.inputs.cols()) + " columns, network expects " +
                                std::to_string(widths.front()));
  }
  if (static_cast<std::size_t>(given.targets.cols()) != widths.back()) {
    throw std::invalid_argument("targets have " + std::to_string(given.targets.cols()) + " columns, network has " +
                                std::to_string(widths.back()) + " outputs");
  }
  if (!(h.c > 0) || !(h.sigma_w2 > 0) || !(h.sigma_b2 > 0) || !(h.sigma_sigma > 0)) {
    throw std::invalid_argument("B-PINN scales must be > 0");
  }
  RegressionData data = given;
  if (data.state_columns.empty() && net.lag > 0) {
    for (std::size_t k = 0; k < net.inputs; ++k) data.state_columns.push_back((net.lag - 1) * net.inputs + k);
  }

  BayesModel model;
  model.kind = "bnn";
  auto& dm = model.density;
  struct Block {
    std::size_t w, b, in, out;
  };
  std::vector<Block> blocks;
  std::mt19937_64 rng(init_seed);
  std::normal_distribution<double> n01;
  const double sw = std::sqrt(h.sigma_w2), sb = std::sqrt(h.sigma_b2);
  for (std::size_t l = 0; l < L; ++l) {
    Block blk{dm.labels.size(), 0, widths[l], widths[l + 1]};
    for (std::size_t i = 0; i < blk.in; ++i)
      for (std::size_t j = 0; j < blk.out; ++j) {
        dm.labels.push_back("W" + std::to_string(l + 1) + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
        model.init_z.push_back(sw * n01(rng));
      }
    blk.b = dm.labels.size();
    for (std::size_t j = 0; j < blk.out; ++j) {
      dm.labels.push_back("b" + std::to_string(l + 1) + "[" + std::to_string(j + 1) + "]");
      model.init_z.push_back(0.0);
    }
    blocks.push_back(blk);
  }
  const std::size_t sigma_at = dm.labels.size();
  dm.labels.push_back("sigma");
  model.init_z.push_back(0.0);
  dm.positive.assign(dm.labels.size(), false);
  dm.positive.back() = true;

  auto forward_tape = [blocks, c = h.c](const Var& x, const Var& in) {
    Var hcur = in;
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const auto& b = blocks[l];
      const Var W = ad::reshape(ad::slice(x, 0, b.w, b.in * b.out), Shape{b.in, b.out});
      hcur = ad::add_bias(ad::matmul(hcur, ad::scale(W, c)), ad::slice(x, 0, b.b, b.out));
      if (l + 1 < blocks.size()) hcur = ad::tanh(hcur);
    }
    return hcur;
  };
  const Tensor inputs = to_tensor(data.inputs);
  const Tensor targets = to_tensor(data.targets);
  const std::size_t n = static_cast<std::size_t>(data.inputs.rows());
  dm.log_density = [blocks, forward_tape, inputs, targets, n, sigma_at, sw, sb, h](Tape& tape, const Var& x) {
    Var lp = half_normal_lpdf(ad::element(x, sigma_at), h.sigma_sigma);
    for (const auto& b : blocks) {
      lp = ad::add(lp, normal_lpdf(ad::slice(x, 0, b.w, b.in * b.out), 0.0, sw));
      lp = ad::add(lp, normal_lpdf(ad::slice(x, 0, b.b, b.out), 0.0, sb));
    }
    if (n > 0) {
      const Var pred = forward_tape(x, tape.constant(inputs));
      lp = ad::add(lp, normal_lpdf(tape.constant(targets), pred, ad::element(x, sigma_at)));
    }
    return lp;
  };
  model.residuals = [forward_tape, inputs, data](Tape& tape, const Var& x, const std::vector<PdeSpec>& pdes) {
    const Var in = tape.variable(inputs);
    const Var pred = forward_tape(x, in);
    std::map<int, Var> grads;  // per target j: dY_j / d inputs, (n, m)
    auto derivative = [&](int j, int k, const Shape& s) {
      auto it = grads.find(j);
      if (it == grads.end()) {
        const Var out = ad::sum(ad::column(pred, static_cast<std::size_t>(j - 1)));
        const std::vector<Var> wrt{in};
        it = grads.emplace(j, tape.grad(out, wrt, true)[0]).first;
      }
      const Var col = ad::column(it->second, data.state_column(k));
      return s[0] == col.shape()[0] ? col : ad::expand(ad::mean(col), s);
    };
    return residual_vector(pdes, data, tape, derivative);
  };
  model.forward = [blocks, c = h.c](std::span<const double> x, const Eigen::MatrixXd& in) {
    Eigen::MatrixXd hcur = in;
    if (static_cast<std::size_t>(in.cols()) != blocks.front().in) throw std::invalid_argument("input width mismatch");
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const auto& b = blocks[l];
      Eigen::MatrixXd W(static_cast<Eigen::Index>(b.in), static_cast<Eigen::Index>(b.out));
      Eigen::RowVectorXd bias(static_cast<Eigen::Index>(b.out));
      for (std::size_t i = 0; i < b.in; ++i)
        for (std::size_t j = 0; j < b.out; ++j)
          W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c * x[b.w + i * b.out + j];
      for (std::size_t j = 0; j < b.out; ++j) bias[static_cast<Eigen::Index>(j)] = x[b.b + j];
      hcur = (hcur * W).rowwise() + bias;
      if (l + 1 < blocks.size()) hcur = hcur.array().tanh().matrix();
    }
    return hcur;
  };
  std::string layout;
  for (std::size_t w : widths) layout += (layout.empty() ? "" : "-") + std::to_string(w);
  model.manifest = {{"layers", layout},
                    {"c", num(h.c)},
                    {"sigma_w2", num(h.sigma_w2)},
                    {"sigma_b2", num(h.sigma_b2)},
                    {"sigma_sigma", num(h.sigma_sigma)},
                    {"rows", std::to_string(n)},
                    {"init_seed", std::to_string(init_seed)}};
  return model;
}

// ---------------------------------------------------------------- prediction

Predictive posterior_predict(const BayesModel& model, const PosteriorSamples& samples, const Eigen::MatrixXd& inputs,
                             double prob) {
  if (samples.labels != model.density.labels) throw std::invalid_argument("posterior labels do not match the model");
  const std::size_t total = samples.chains * samples.draws;
  if (total == 0) throw std::invalid_argument("posterior has no draws");
  const std::size_t dim = samples.dim();
  std::vector<Eigen::MatrixXd> preds;
  preds.reserve(total);
  for (std::size_t s = 0; s < total; ++s) {
    preds.push_back(model.forward(std::span<const double>(samples.values.data() + s * dim, dim), inputs));
  }
  const auto rows = preds.front().rows(), cols = preds.front().cols();
  Predictive out{Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd(rows, cols), Eigen::MatrixXd(rows, cols), total};
  std::vector<double> point(total);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      double sum = 0.0;
      for (std::size_t s = 0; s < total; ++s) {
        point[s] = preds[s](i, j);
        sum += point[s];
      }
      out.mean(i, j) = sum / static_cast<double>(total);
      if (total < 10) {
        auto [lo, hi] = std::minmax_element(point.begin(), point.end());
        out.lower(i, j) = *lo;
        out.upper(i, j) = *hi;
      } else {
        const Interval iv = hdi(point, prob);
        out.lower(i, j) = iv.low;
        out.upper(i, j) = iv.high;
      }
    }
  return out;
}

void write_predictive_csv(std::ostream& out, const Predictive& pred, const Eigen::MatrixXd& truth,
                          const std::vector<std::string>& names) {
  if (truth.rows() != pred.mean.rows() || truth.cols() != pred.mean.cols()) {
    throw std::invalid_argument("truth and prediction shapes differ");
  }
  if (names.size() != static_cast<std::size_t>(truth.cols())) throw std::invalid_argument("one name per target");
  out << "index";
  for (const auto& n : names) out << "," << n << "_truth," << n << "_mean," << n << "_lower," << n << "_upper";
  out << "\n";
  for (Eigen::Index i = 0; i < truth.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      out << "," << num(truth(i, j)) << "," << num(pred.mean(i, j)) << "," << num(pred.lower(i, j)) << ","
          << num(pred.upper(i, j));
    }
    out << "\n";
  }
}

}  // namespace pdemts
