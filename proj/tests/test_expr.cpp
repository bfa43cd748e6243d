#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "pdemts/expr.hpp"

using namespace pdemts;

namespace {

const Symbol X1 = Symbol::state(1);
const Symbol X2 = Symbol::state(2);
const Symbol Y1 = Symbol::output(1);
const Symbol D21 = Symbol::derivative(2, 1);

Expr random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, 9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const std::vector<Symbol> syms = {X1, X2, Y1, D21};
  if (depth <= 1 || pick(rng) < 2) {
    if (pick(rng) < 4) return Expr::constant(std::round(u(rng) * 1000.0) / 1000.0);
    return Expr::variable(syms[static_cast<std::size_t>(pick(rng)) % syms.size()]);
  }
  switch (pick(rng)) {
    case 0:
      return Expr::unary(ExprOp::Sin, random_expr(rng, depth - 1));
    case 1:
      return Expr::unary(ExprOp::Cos, random_expr(rng, depth - 1));
    case 2:
      return Expr::unary(ExprOp::Tanh, random_expr(rng, depth - 1));
    case 3:
      return Expr::pow(random_expr(rng, depth - 1), pick(rng) % 7);
    case 4:
      return random_expr(rng, depth - 1) - random_expr(rng, depth - 1);
    case 5:
      return random_expr(rng, depth - 1) * random_expr(rng, depth - 1);
    case 6:
      return random_expr(rng, depth - 1) / random_expr(rng, depth - 1);
    default:
      return random_expr(rng, depth - 1) + random_expr(rng, depth - 1);
  }
}

}  // namespace

TEST(Expr, ScalarEvaluation) {
  EXPECT_EQ(evaluate(Expr::constant(3.5), {}), 3.5);
  EXPECT_EQ(evaluate(Expr::variable(X1) + Expr::constant(0.0), {{X1, 7.0}}), 7.0);
  EXPECT_EQ(evaluate(Expr::constant(1.0) / Expr::constant(0.0), {}), 1.0);
  EXPECT_EQ(evaluate(Expr::constant(1.0) / Expr::constant(5e-10), {}), 1.0);
  EXPECT_THROW(evaluate(Expr::variable(X2), {{X1, 1.0}}), BindingError);
}

TEST(Expr, ProtectedDivStaysFinite) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e-8, 1e-8);
  for (int i = 0; i < 1000; ++i) {
    double v = evaluate(Expr::variable(X1) / Expr::variable(X2), {{X1, 1e6}, {X2, u(rng)}});
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Expr, TextForms) {
  auto e = Expr::constant(2.0) * Expr::variable(X1) + Expr::constant(1.0);
  EXPECT_EQ(to_text(e), "2*X1 + 1");

  auto p = parse_text("sin(X1)*dY2_dX1");
  EXPECT_EQ(p, Expr::unary(ExprOp::Sin, Expr::variable(X1)) * Expr::variable(D21));

  try {
    parse_text("2 +");
    FAIL() << "expected syntax error";
  } catch (const ExprSyntaxError& err) {
    EXPECT_EQ(err.offset, 3u);
  }
  EXPECT_THROW(parse_text("foo + 1"), ExprSyntaxError);
  EXPECT_THROW(parse_text("X1^7"), ExprSyntaxError);
  EXPECT_THROW(parse_text("(X1"), ExprSyntaxError);

  EXPECT_EQ(to_text(Expr::constant(1.5) - Expr::constant(2.0) * Expr::pow(Expr::variable(X1), 2)),
            "1.5 - 2*X1^2");
  EXPECT_EQ(to_text(Expr::variable(X1) - (Expr::variable(X2) - Expr::variable(Y1))),
            "X1 - (X2 - Y1)");
  EXPECT_EQ(to_text(Expr::pow(Expr::constant(-2.0), 2)), "(-2)^2");
}

TEST(Expr, RoundTripRandomTrees) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    auto e = random_expr(rng, 6);
    ASSERT_LE(e.depth(), 6u);
    auto text = to_text(e);
    auto back = parse_text(text);
    ASSERT_EQ(back, e) << text;
    ASSERT_EQ(to_text(back), text);
  }
}

TEST(Expr, BatchMatchesScalarLoop) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  ColumnTable table(3);
  for (auto s : {X1, X2, Y1, D21}) table.add(s, {u(rng), u(rng), u(rng)});
  for (int i = 0; i < 200; ++i) {
    auto e = random_expr(rng, 5);
    auto batch = evaluate_batch(e, table);
    for (std::size_t r = 0; r < 3; ++r) {
      Bindings b;
      for (auto s : table.symbols()) b[s] = table.column(s)[r];
      EXPECT_EQ(batch[r], evaluate(e, b));
    }
  }
  auto col = evaluate_batch(Expr::variable(D21), table);
  EXPECT_TRUE(std::equal(col.begin(), col.end(), table.column(D21).begin()));
}

TEST(Expr, TapeMatchesScalarEvaluation) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    auto e = random_expr(rng, 6);
    Tape tape;
    Bindings b;
    std::map<Symbol, Var> vars;
    for (auto s : {X1, X2, Y1, D21}) {
      b[s] = u(rng);
      vars[s] = tape.variable(Tensor({1}, b[s]));
    }
    auto v = evaluate_on_tape(e, vars, tape, Shape{1});
    EXPECT_NEAR(v.value()[0], evaluate(e, b), 1e-12) << to_text(e);
  }
}

TEST(Expr, TapeBindingsAndGradients) {
  Tape tape;
  auto a = tape.variable(Tensor({4}, std::vector<double>{1, 2, 3, 4}));
  std::map<Symbol, Var> vars{{X1, a}};
  EXPECT_EQ(evaluate_on_tape(Expr::variable(X1), vars, tape, Shape{4}).id(), a.id());
  auto c = evaluate_on_tape(Expr::constant(2.0), vars, tape, Shape{4});
  auto g = tape.grad_values(ad::sum(c), std::vector<Var>{a});
  EXPECT_EQ(g[0].vec(), std::vector<double>(4, 0.0));

  std::mt19937_64 rng(3);
  auto e = Expr::variable(X1) * Expr::variable(X2);
  for (int rep = 0; rep < 20; ++rep) {
    auto xa = pdemts::testing::random_tensor({5}, rng);
    auto xb = pdemts::testing::random_tensor({5}, rng);
    auto f = [&](Tape& t, const std::vector<Var>& v) {
      return ad::sum(evaluate_on_tape(e, {{X1, v[0]}, {X2, v[1]}}, t, Shape{5}));
    };
    EXPECT_LE(pdemts::testing::max_grad_error(f, {xa, xb}), 1e-6);
    auto grads = pdemts::testing::analytic_grads(f, {xa, xb});
    EXPECT_EQ(grads[0].vec(), xb.vec());
  }
}

TEST(Expr, PdeLines) {
  auto pde = make_pde(Symbol::derivative(1, 1), parse_text("2*dY2_dX1 + 0.25"));
  pde.metrics = FitMetrics{0.01, 0.05, 0.975};
  auto line = format_pde_line(pde);
  EXPECT_EQ(line, "dY1_dX1 = 2*dY2_dX1 + 0.25 # r2=0.975 mask=1");
  auto back = parse_pde_line(line);
  EXPECT_EQ(back.lhs, pde.lhs);
  EXPECT_EQ(back.rhs, pde.rhs);
  EXPECT_TRUE(back.mask);
  EXPECT_DOUBLE_EQ(back.metrics->r2, 0.975);

  EXPECT_THROW(make_pde(Symbol::state(1), Expr::constant(0.0)), std::invalid_argument);
  EXPECT_THROW(make_pde(Symbol::derivative(1, 1), parse_text("dY1_dX1*2")), std::invalid_argument);

  std::stringstream ss;
  std::vector<PdeSpec> pdes{pde, make_pde(Symbol::derivative(3, 1), Expr::constant(0.0), false)};
  write_pde_file(ss, pdes);
  auto read = read_pde_file(ss);
  ASSERT_EQ(read.size(), 2u);
  EXPECT_FALSE(read[1].mask);
  EXPECT_FALSE(read[1].metrics.has_value());
}
