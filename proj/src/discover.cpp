#include "pdemts/discover.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pdemts/featlib.hpp"
#include "pdemts/metrics.hpp"
#include "pdemts/sparse.hpp"

namespace pdemts {

HarvestedDerivatives harvest(const Network& net, const LagWindowSet& windows, LagReduction reduction,
                             std::size_t batch) {
  const auto& spec = net.spec();
  if (windows.size() > 0 && (windows.lag() != spec.lag || windows.d() != spec.inputs)) {
    throw std::invalid_argument("harvest: windows are (T=" + std::to_string(windows.lag()) +
                                ", d=" + std::to_string(windows.d()) + "), network expects (T=" +
                                std::to_string(spec.lag) + ", d=" + std::to_string(spec.inputs) + ")");
  }
  const std::size_t n = windows.size(), T = spec.lag, d = spec.inputs, p = spec.outputs;
  HarvestedDerivatives h;
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < d; ++k)
      h.labels.push_back(Symbol::derivative(static_cast<int>(j + 1), static_cast<int>(k + 1)));
  for (std::size_t k = 0; k < d; ++k) h.states.push_back(Symbol::state(static_cast<int>(k + 1)));

  std::vector<std::vector<double>> cols(p * d, std::vector<double>(n));
  for (std::size_t b0 = 0; b0 < n; b0 += batch) {
    const std::size_t nb = std::min(batch, n - b0);
    const Tensor x = windows.batch_x(b0, nb);
    if (reduction == LagReduction::Last) {
      const Tensor g = grad_input_last(net, x, nb);
      for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t c = 0; c < p * d; ++c) cols[c][b0 + i] = g[i * p * d + c];
    } else {
      const Tensor g = grad_input(net, x);
      for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t c = 0; c < p * d; ++c) {
          double s = 0.0;
          for (std::size_t t = 0; t < T; ++t) s += g[(i * T + t) * p * d + c];
          cols[c][b0 + i] = s / static_cast<double>(T);
        }
    }
  }
  h.table = ColumnTable(n);
  for (std::size_t c = 0; c < p * d; ++c) h.table.add(h.labels[c], std::move(cols[c]));
  const Tensor last = windows.last_step(0, n);
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = last[i * d + k];
    h.table.add(h.states[k], std::move(v));
  }
  return h;
}

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

bool constant_column(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

FilterResult correlation_filter(const ColumnTable& data, const Symbol& target, double threshold) {
  if (data.rows() < 3) throw std::invalid_argument("correlation filter needs at least 3 rows");
  const auto y = to_vector(data.column(target));
  FilterResult out;
  for (const auto& s : data.symbols()) {
    if (s == target) continue;
    const double r = pearson(y, to_vector(data.column(s)));
    if (!std::isfinite(r)) {
      out.warnings.push_back("skipped zero-variance column " + s.text() + " against " + target.text());
      continue;
    }
    const bool keep = std::fabs(r) > threshold;
    out.entries.push_back({target, s, r, keep});
    if (keep) out.selected.push_back(s);
  }
  std::stable_sort(out.selected.begin(), out.selected.end(), [&](const Symbol& a, const Symbol& b) {
    auto r_of = [&](const Symbol& s) {
      for (const auto& e : out.entries)
        if (e.column == s) return std::fabs(e.r);
      return 0.0;
    };
    return r_of(a) > r_of(b);
  });
  return out;
}

PdeFit fit_pde(const ColumnTable& fit_rows, const ColumnTable& val_rows,
               const std::vector<Symbol>& selected, const Symbol& target, int degree) {
  if (selected.empty()) throw std::invalid_argument("fit_pde needs at least one selected column");
  if (fit_rows.rows() == 0 || val_rows.rows() == 0) throw std::invalid_argument("fit_pde needs fit and validation rows");
  PdeFit out;
  const auto yspan = fit_rows.column(target);
  if (constant_column(yspan)) {
    out.pde = make_pde(target, Expr::constant(yspan.front()));
    out.pde.trivial = true;
    out.terms = {Expr::constant(1.0)};
    out.coefficients = {yspan.front()};
    validate_pde(out.pde, val_rows);
    return out;
  }
  const FunctionLibrary lib = build_poly_features(fit_rows, selected, degree);
  const Eigen::MatrixXd A = lib.matrix();
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(yspan.data(), static_cast<Eigen::Index>(yspan.size()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  SparseFit fit;
  if (qr.rank() < A.cols()) {
    out.ridge = true;
    Eigen::MatrixXd G = A.transpose() * A;
    G.diagonal().array() += 1e-8;
    fit.coef = G.ldlt().solve(A.transpose() * b);
  } else {
    fit.coef = qr.solve(b);
  }
  for (Eigen::Index i = 0; i < fit.coef.size(); ++i)
    if (fit.coef[i] != 0.0) fit.active.push_back(static_cast<std::size_t>(i));
  out.pde = assemble_pde(fit, lib, target);
  out.terms = lib.exprs;
  out.coefficients.assign(fit.coef.data(), fit.coef.data() + fit.coef.size());
  const Expr lead = Expr::variable(selected.front());
  for (std::size_t i = 0; i < lib.size(); ++i)
    if (lib.exprs[i] == lead) out.leading = out.coefficients[i];
  validate_pde(out.pde, val_rows);
  return out;
}

std::vector<PdeSpec> DiscoveryReport::pdes() const {
  std::vector<PdeSpec> out;
  for (const auto& c : candidates) {
    if (!c.gated) continue;
    PdeSpec p = c.fit.pde;
    p.mask = c.selected;
    out.push_back(std::move(p));
  }
  return out;
}

void DiscoveryReport::write(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "pdes.txt");
    const auto all = pdes();
    write_pde_file(f, all);
  }
  char buf[256];
  {
    std::ofstream f(fs::path(dir) / "correlations.csv");
    f << "target,column,r,selected\n";
    for (const auto& c : candidates)
      for (const auto& e : c.filter.entries) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%d\n", e.target.text().c_str(), e.column.text().c_str(),
                      e.r, e.selected ? 1 : 0);
        f << buf;
      }
  }
  {
    std::ofstream f(fs::path(dir) / "discovery.csv");
    f << "lhs,surrogate_r2,gated,mse,mae,r2,selected,trivial,ridge,leading,terms\n";
    for (const auto& c : candidates) {
      const auto m = c.fit.pde.metrics.value_or(FitMetrics{NAN, NAN, NAN});
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%d,%.17g,%.17g,%.17g,%d,%d,%d,%.17g,%zu\n",
                    Symbol::derivative(static_cast<int>(c.target), 1).text().c_str(),
                    surrogate[c.target - 1].r2, c.gated ? 1 : 0, m.mse, m.mae, m.r2, c.selected ? 1 : 0,
                    c.fit.pde.trivial ? 1 : 0, c.fit.ridge ? 1 : 0, c.fit.leading, c.fit.terms.size());
      f << buf;
    }
  }
}

DiscoveryReport run_discovery(const Network& net, const SplitWindows& data, const DiscoveryConfig& cfg) {
  const auto& spec = net.spec();
  if (cfg.dynamic_input < 1 || cfg.dynamic_input > spec.inputs) {
    throw std::invalid_argument("dynamic input X" + std::to_string(cfg.dynamic_input) + " out of range");
  }
  DiscoveryReport report;
  const Tensor pred = net.predict(data.test);
  const Tensor truth = data.test.all_y();
  const std::size_t n = data.test.size(), p = spec.outputs;
  std::string diag;
  bool any_gated = false;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> t(n), f(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = truth[i * p + j];
      f[i] = pred[i * p + j];
    }
    report.surrogate.push_back(regression_metrics(t, f));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%sY%zu r2=%.4f", diag.empty() ? "" : ", ", j + 1, report.surrogate.back().r2);
    diag += buf;
    any_gated |= report.surrogate.back().r2 > cfg.gate_r2;
  }
  if (!any_gated) {
    throw SurrogateGateError("surrogate fails the validation gate (test R2 must exceed " +
                             std::to_string(cfg.gate_r2) + "): " + diag);
  }

  LagWindowSet fit_set = data.train;
  if (cfg.max_fit_rows > 0 && fit_set.size() > cfg.max_fit_rows) {
    fit_set = fit_set.subset(fit_set.size() - cfg.max_fit_rows, cfg.max_fit_rows);
  }
  const auto fit_h = harvest(net, fit_set, cfg.reduction);
  const auto val_h = harvest(net, data.validation, cfg.reduction);
  const int dyn = static_cast<int>(cfg.dynamic_input);

  for (std::size_t j = 1; j <= p; ++j) {
    DiscoveryCandidate c;
    c.target = j;
    const Symbol lhs = Symbol::derivative(static_cast<int>(j), dyn);
    if (!(report.surrogate[j - 1].r2 > cfg.gate_r2)) {
      c.gated = false;
      report.warnings.push_back("Y" + std::to_string(j) + " surrogate below gate; no PDE extracted");
      report.candidates.push_back(std::move(c));
      continue;
    }
    c.filter = correlation_filter(fit_h.table, lhs, cfg.correlation_threshold);
    if (c.filter.selected.empty()) {
      const auto y = fit_h.table.column(lhs);
      double mean = 0.0;
      for (double v : y) mean += v;
      mean /= static_cast<double>(y.size());
      c.fit.pde = make_pde(lhs, Expr::constant(mean));
      c.fit.pde.trivial = true;
      c.fit.terms = {Expr::constant(1.0)};
      c.fit.coefficients = {mean};
      validate_pde(c.fit.pde, val_h.table);
    } else {
      c.fit = fit_pde(fit_h.table, val_h.table, c.filter.selected, lhs, cfg.degree);
    }
    c.selected = !c.fit.pde.trivial && c.fit.pde.metrics->r2 >= cfg.selection_r2;
    report.candidates.push_back(std::move(c));
  }
  return report;
}

}  // namespace pdemts
