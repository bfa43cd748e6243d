#include "pdemts/featlib.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace pdemts {

std::vector<std::vector<int>> monomial_exponents(std::size_t vars, const LibraryConfig& config) {
  if (config.degree < 1) throw std::invalid_argument("library degree must be >= 1");
  std::vector<std::vector<int>> out;
  if (config.bias) out.emplace_back(vars, 0);
  for (int deg = 1; deg <= config.degree; ++deg) {
    if (!config.interactions) {
      for (std::size_t v = 0; v < vars; ++v) {
        std::vector<int> e(vars, 0);
        e[v] = deg;
        out.push_back(e);
      }
      continue;
    }
    // Nondecreasing index sequences of length `deg`, in lexicographic order.
    std::vector<int> e(vars, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t start, int left) {
      if (left == 0) {
        out.push_back(e);
        return;
      }
      for (std::size_t v = start; v < vars; ++v) {
        ++e[v];
        rec(v, left - 1);
        --e[v];
      }
    };
    rec(0, deg);
  }
  return out;
}

Expr monomial_expr(const std::vector<Symbol>& vars, const std::vector<int>& exponents) {
  std::optional<Expr> acc;
  for (std::size_t v = 0; v < vars.size(); ++v) {
    if (exponents[v] == 0) continue;
    Expr f = exponents[v] == 1 ? Expr::variable(vars[v]) : Expr::pow(Expr::variable(vars[v]), exponents[v]);
    acc = acc ? *acc * f : f;
  }
  return acc ? *acc : Expr::constant(1.0);
}

Eigen::MatrixXd FunctionLibrary::matrix() const {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(size()));
  for (std::size_t c = 0; c < size(); ++c)
    for (std::size_t i = 0; i < rows; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = columns[c][i];
  return m;
}

void FunctionLibrary::write_manifest(std::ostream& out) const {
  for (std::size_t c = 0; c < size(); ++c) out << c << ',' << to_text(exprs[c]) << '\n';
}

FunctionLibrary build_theta(const ColumnTable& data, const std::vector<Symbol>& vars,
                            const LibraryConfig& config) {
  if (vars.empty()) throw std::invalid_argument("library needs at least one variable");
  FunctionLibrary lib;
  lib.config = config;
  lib.rows = data.rows();
  for (const auto& e : monomial_exponents(vars.size(), config)) lib.exprs.push_back(monomial_expr(vars, e));
  if (config.trig) {
    for (const auto& v : vars) {
      lib.exprs.push_back(Expr::unary(ExprOp::Sin, Expr::variable(v)));
      lib.exprs.push_back(Expr::unary(ExprOp::Cos, Expr::variable(v)));
    }
  }
  for (const auto& e : lib.exprs) {
    auto col = evaluate_batch(e, data);
    for (double x : col)
      if (!std::isfinite(x)) throw std::invalid_argument("library column " + to_text(e) + " is not finite");
    lib.columns.push_back(std::move(col));
  }
  return lib;
}

FunctionLibrary build_poly_features(const ColumnTable& data, const std::vector<Symbol>& selected,
                                    int degree) {
  if (selected.empty()) throw std::invalid_argument("polynomial features need a non-empty selection");
  LibraryConfig cfg;
  cfg.degree = degree;
  return build_theta(data, selected, cfg);
}

}  // namespace pdemts
