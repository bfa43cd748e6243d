#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <functional>
#include <sstream>

#include "pdemts/symreg.hpp"

using namespace pdemts;

namespace {

const Symbol X1 = Symbol::state(1);
const Symbol X2 = Symbol::state(2);

struct Problem {
  ColumnTable data;
  std::vector<double> y;
};

Problem sum_problem(std::uint64_t seed, std::size_t n = 50) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> a(n), b(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = u(rng);
    b[i] = u(rng);
    y[i] = a[i] + b[i];
  }
  Problem p{ColumnTable(n), y};
  p.data.add(X1, a);
  p.data.add(X2, b);
  return p;
}

}  // namespace

TEST(Symreg, RecoversSumOfInputs) {
  auto p = sum_problem(1);
  GpConfig cfg;
  int hits = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    cfg.seed = s;
    auto r = evolve(p.data, {X1, X2}, p.y, cfg);
    hits += r.best.mse < 1e-10;
  }
  EXPECT_GE(hits, 4);
}

TEST(Symreg, TraceIsMonotoneFiniteAndDeterministic) {
  auto p = sum_problem(2);
  for (auto& v : p.y) v = std::sin(v) * 1.3 + 0.2;
  GpConfig cfg;
  cfg.population = 100;
  cfg.generations = 10;
  cfg.seed = 5;
  auto a = evolve(p.data, {X1, X2}, p.y, cfg);
  auto b = evolve(p.data, {X1, X2}, p.y, cfg);
  ASSERT_EQ(a.best_fitness.size(), 11u);
  for (std::size_t g = 1; g < a.best_fitness.size(); ++g) EXPECT_LE(a.best_fitness[g], a.best_fitness[g - 1]);
  EXPECT_EQ(a.best_fitness, b.best_fitness);
  EXPECT_EQ(to_text(a.best.expr), to_text(b.best.expr));
  EXPECT_LE(a.best.expr.depth(), cfg.max_depth);
  for (const auto& ind : a.hall_of_fame) EXPECT_TRUE(std::isfinite(ind.fitness));
  EXPECT_FALSE(a.initial_only);

  std::stringstream hof;
  a.write_hall_of_fame(hof);
  std::string line;
  std::getline(hof, line);
  EXPECT_NE(line.find(" # rank=1 fitness="), std::string::npos);
  EXPECT_EQ(parse_text(line.substr(0, line.find(" #"))), a.hall_of_fame[0].expr);
}

TEST(Symreg, ConstantTargets) {
  auto p = sum_problem(3);
  GpConfig cfg;
  cfg.population = 200;
  cfg.generations = 10;
  // With parsimony a 1-node near-constant outranks an exact 3-node identity.
  cfg.parsimony = 0.0;
  for (double c : {0.0, 1.0}) {
    std::vector<double> y(p.y.size(), c);
    auto r = evolve(p.data, {X1, X2}, y, cfg);
    EXPECT_LT(r.best.mse, 1e-12) << c << " " << to_text(r.best.expr);
  }
}

TEST(Symreg, ZeroGenerationsAndErrors) {
  auto p = sum_problem(4);
  GpConfig cfg;
  cfg.population = 50;
  cfg.generations = 0;
  auto r = evolve(p.data, {X1, X2}, p.y, cfg);
  EXPECT_TRUE(r.initial_only);
  EXPECT_EQ(r.best_fitness.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.best.fitness));

  EXPECT_THROW(evolve(p.data, {}, p.y, cfg), std::invalid_argument);
  auto small = sum_problem(4, 9);
  EXPECT_THROW(evolve(small.data, {X1}, small.y, cfg), std::invalid_argument);
  GpConfig bad = cfg;
  bad.p_crossover = 0.9;
  bad.p_subtree = 0.2;
  EXPECT_THROW(evolve(p.data, {X1}, p.y, bad), std::invalid_argument);
  bad = cfg;
  bad.max_depth = 11;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Symreg, SimplifyNeutral) {
  auto x = Expr::variable(X1);
  EXPECT_EQ(simplify_neutral(x + Expr::constant(0.0)), x);
  EXPECT_EQ(simplify_neutral(x * Expr::constant(1.0)), x);
  EXPECT_EQ(simplify_neutral(Expr::constant(1.0) * (Expr::constant(0.0) + x)), x);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> pick(0, 9);
  std::function<Expr(int)> gen = [&](int depth) -> Expr {
    if (depth <= 1 || pick(rng) < 2) {
      switch (pick(rng) % 4) {
        case 0:
          return Expr::constant(0.0);
        case 1:
          return Expr::constant(1.0);
        case 2:
          return Expr::constant(u(rng));
        default:
          return Expr::variable(pick(rng) % 2 ? X1 : X2);
      }
    }
    switch (pick(rng) % 5) {
      case 0:
        return gen(depth - 1) + gen(depth - 1);
      case 1:
        return gen(depth - 1) - gen(depth - 1);
      case 2:
        return gen(depth - 1) * gen(depth - 1);
      case 3:
        return gen(depth - 1) / gen(depth - 1);
      default:
        return Expr::unary(ExprOp::Sin, gen(depth - 1));
    }
  };
  auto p = sum_problem(8);
  for (int i = 0; i < 300; ++i) {
    auto e = gen(6);
    Individual ind{e, 0.5, 0.5 + 1e-4 * static_cast<double>(e.size()), e.size()};
    auto s = simplify_size(ind, 1e-4);
    EXPECT_LE(s.size, ind.size);
    EXPECT_LE(s.fitness, ind.fitness);
    auto before = evaluate_batch(e, p.data);
    auto after = evaluate_batch(s.expr, p.data);
    for (std::size_t r = 0; r < before.size(); ++r) EXPECT_NEAR(before[r], after[r], 1e-12) << to_text(e);
  }
}
