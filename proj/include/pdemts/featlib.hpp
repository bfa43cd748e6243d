#pragma once

// Candidate-function libraries: graded-lexicographic monomials up to a degree,
// optionally followed by sin/cos of each raw variable.

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "pdemts/expr.hpp"

namespace pdemts {

struct LibraryConfig {
  int degree = 2;
  bool interactions = true;
  bool trig = false;
  bool bias = true;
};

struct FunctionLibrary {
  std::vector<Expr> exprs;
  std::vector<std::vector<double>> columns;
  LibraryConfig config;
  std::size_t rows = 0;

  std::size_t size() const { return exprs.size(); }
  Eigen::MatrixXd matrix() const;
  void write_manifest(std::ostream& out) const;
};

// Monomial exponent vectors in graded-lex order (degree 0 first when bias).
std::vector<std::vector<int>> monomial_exponents(std::size_t vars, const LibraryConfig& config);
Expr monomial_expr(const std::vector<Symbol>& vars, const std::vector<int>& exponents);

FunctionLibrary build_theta(const ColumnTable& data, const std::vector<Symbol>& vars,
                            const LibraryConfig& config);
FunctionLibrary build_poly_features(const ColumnTable& data, const std::vector<Symbol>& selected,
                                    int degree = 3);

}  // namespace pdemts
