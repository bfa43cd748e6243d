#pragma once

// Genetic-programming symbolic regression over expression trees.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pdemts/expr.hpp"

namespace pdemts {

struct GpConfig {
  std::size_t population = 500;
  int generations = 30;
  std::size_t tournament = 7;
  double p_crossover = 0.7;
  double p_subtree = 0.2;
  double p_hoist = 0.04;
  double p_point = 0.04;
  double point_rate = 0.1;  // per-node replacement chance under point mutation
  std::size_t max_depth = 8;
  std::size_t init_min_depth = 2;
  std::size_t init_max_depth = 5;
  std::vector<ExprOp> primitives = {ExprOp::Add, ExprOp::Sub, ExprOp::Mul, ExprOp::Div, ExprOp::Sin, ExprOp::Cos};
  double const_low = -1.0;
  double const_high = 1.0;
  double parsimony = 1e-4;
  std::size_t hall_of_fame = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Individual {
  Expr expr = Expr::constant(0.0);
  double mse = 0.0;
  double fitness = 0.0;  // mse + parsimony * size
  std::size_t size = 1;
};

struct GpResult {
  Individual best;
  std::vector<Individual> hall_of_fame;  // ascending fitness, distinct texts
  std::vector<double> best_fitness;      // best-ever after init and after each generation
  bool initial_only = false;             // no generation was run

  void write_hall_of_fame(std::ostream& out) const;
};

// Features are the columns of `data` named by `terminals`.
GpResult evolve(const ColumnTable& data, const std::vector<Symbol>& terminals, std::span<const double> target,
                const GpConfig& config);

// Drops x + 0, 0 + x, x - 0, x * 1, 1 * x and x / 1; mse is kept, fitness recomputed.
Individual simplify_size(const Individual& ind, double parsimony);
Expr simplify_neutral(const Expr& e);

}  // namespace pdemts
