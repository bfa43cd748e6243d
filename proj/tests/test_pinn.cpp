#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "pdemts/pinn.hpp"

using namespace pdemts;

namespace {

NetworkSpec linear_spec(std::size_t lag, std::size_t d, std::size_t p) {
  return {"linear", lag, d, p, {LayerSpec::flatten(), LayerSpec::dense(p)}};
}

NetworkSpec small_tanh(std::size_t lag, std::size_t d, std::size_t p, std::size_t hidden = 8) {
  return {"small", lag, d, p,
          {LayerSpec::flatten(), LayerSpec::dense(hidden, Activation::Tanh), LayerSpec::dense(hidden, Activation::Tanh),
           LayerSpec::dense(p)}};
}

Tensor uniform(const Shape& shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  return pdemts::testing::random_tensor(shape, rng, lo, hi);
}

// Targets obey dY1/dX1 = cos(X1) at the last step: Y1 = sin(X1) + 0.5 X2,
// Y2 = X2 - 0.3 X1, with observation noise.
LagWindowSet planted(std::uint64_t seed, std::size_t n, std::size_t lag = 3, double noise = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Tensor x = uniform({n, lag, 2}, rng);
  Tensor y({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double x1 = x[(i * lag + lag - 1) * 2], x2 = x[(i * lag + lag - 1) * 2 + 1];
    y[i * 2] = std::sin(x1) + 0.5 * x2 + noise * n01(rng);
    y[i * 2 + 1] = x2 - 0.3 * x1 + noise * n01(rng);
  }
  return LagWindowSet(x, y, {"X1", "X2"}, {"Y1", "Y2"});
}

const std::vector<PdeSpec> kPlanted{parse_pde_line("dY1_dX1 = cos(X1)")};

}  // namespace

TEST(Pinn, PhysicsLossExamples) {
  std::mt19937_64 rng(1);
  Network net(linear_spec(1, 2, 1), 3);
  net.params()[0] = Tensor({2, 1}, std::vector<double>{0.7, -1.2});
  const Tensor xs = uniform({5, 1, 2}, rng);
  Tape tape;
  std::vector<Var> p;
  for (const auto& t : net.params()) p.push_back(tape.constant(t));
  const Var x = tape.variable(xs);
  const Var pred = net.forward(tape, x, p, Mode::Eval);

  EXPECT_EQ(physics_loss(tape, x, pred, {}, false).value().item(), 0.0);

  PdeSpec self;
  self.lhs = Symbol::derivative(1, 1);
  self.rhs = Expr::variable(Symbol::derivative(1, 1));
  EXPECT_EQ(physics_loss(tape, x, pred, {self}, false).value().item(), 0.0);

  const double lp = physics_loss(tape, x, pred, {parse_pde_line("dY1_dX1 = 0")}, false).value().item();
  EXPECT_NEAR(lp, 5 * 0.7 * 0.7, 1e-14);
  const double lp2 = physics_loss(tape, x, pred, {parse_pde_line("dY1_dX2 = X1")}, false).value().item();
  double hand = 0.0;
  for (std::size_t i = 0; i < 5; ++i) hand += (-1.2 - xs[i * 2]) * (-1.2 - xs[i * 2]);
  EXPECT_NEAR(lp2, hand, 1e-12);

  auto off = parse_pde_line("dY1_dX1 = 0");
  off.mask = false;
  EXPECT_EQ(physics_loss(tape, x, pred, {off}, false).value().item(), 0.0);
  EXPECT_THROW(physics_loss(tape, x, pred, {parse_pde_line("dY1_dX1 = X5")}, false), BindingError);
  EXPECT_THROW(physics_loss(tape, x, pred, {parse_pde_line("dY2_dX1 = 0")}, false), BindingError);
}

TEST(Pinn, TotalLossComposition) {
  std::mt19937_64 rng(2);
  Network net(small_tanh(3, 2, 2), 4);
  const Tensor xs = uniform({6, 3, 2}, rng);
  const Tensor ys = uniform({6, 2}, rng);

  Tape t1;
  std::vector<Var> p1;
  for (const auto& t : net.params()) p1.push_back(t1.variable(t));
  auto plain = total_loss(t1, net, p1, xs, ys, {}, Mode::Eval);
  std::mt19937_64 r0(0);
  auto ref = mse_loss()(t1, net, p1, xs, ys, Mode::Eval, r0);
  EXPECT_EQ(plain.total.value().item(), ref.total.value().item());

  auto both = total_loss(t1, net, p1, xs, ys, kPlanted, Mode::Eval);
  Tape t2;
  std::vector<Var> p2;
  for (const auto& t : net.params()) p2.push_back(t2.constant(t));
  const Var x = t2.variable(xs);
  const Var pred = net.forward(t2, x, p2, Mode::Eval);
  const double ld = ad::mean(ad::square(ad::sub(pred, t2.constant(ys)))).value().item();
  const double lp = physics_loss(t2, x, pred, kPlanted, false).value().item();
  EXPECT_GE(lp, 0.0);
  EXPECT_NEAR(both.total.value().item(), ld + lp, 1e-12);
  EXPECT_NEAR(both.data.value().item(), ld, 1e-15);

  // Perfect linear fit that also satisfies its PDE.
  Network lin(linear_spec(1, 2, 1), 5);
  lin.params()[0] = Tensor({2, 1}, std::vector<double>{2.0, -1.0});
  lin.params()[1] = Tensor({1}, 0.5);
  const Tensor lx = uniform({7, 1, 2}, rng);
  const Tensor ly = lin.predict(lx);
  Tape t3;
  std::vector<Var> p3;
  for (const auto& t : lin.params()) p3.push_back(t3.variable(t));
  auto zero = total_loss(t3, lin, p3, lx, ly, {parse_pde_line("dY1_dX1 = 2")}, Mode::Eval);
  EXPECT_EQ(zero.total.value().item(), 0.0);
}

TEST(Pinn, TotalLossGradient) {
  std::mt19937_64 rng(3);
  Network net(small_tanh(2, 2, 2, 4), 6);
  const Tensor xs = uniform({4, 2, 2}, rng);
  const Tensor ys = uniform({4, 2}, rng);
  const std::vector<PdeSpec> pdes{parse_pde_line("dY1_dX1 = cos(X1) + dY2_dX2*Y2"),
                                  parse_pde_line("dY2_dX1 = 0.5")};
  pdemts::testing::ScalarFn f = [&](Tape& tape, const std::vector<Var>& params) {
    return total_loss(tape, net, params, xs, ys, pdes, Mode::Eval).total;
  };
  EXPECT_LE(pdemts::testing::max_grad_error(f, net.params()), 1e-4);
}

TEST(Pinn, TrainingBasics) {
  auto tr = planted(1, 64), va = planted(2, 32);
  PinnConfig cfg;
  cfg.net = small_tanh(3, 2, 2);
  cfg.train.seed = 7;
  cfg.train.epochs = 0;
  cfg.pdes = kPlanted;
  auto none = train_pinn(cfg, tr, va);
  EXPECT_TRUE(none.trained.history.empty());
  Network fresh(cfg.net, 7);
  for (std::size_t k = 0; k < fresh.params().size(); ++k) EXPECT_EQ(none.trained.net.params()[k].vec(), fresh.params()[k].vec());

  // All masks off: the same trajectory as plain training, bitwise.
  cfg.train.epochs = 4;
  cfg.train.batch_size = 16;
  auto masked = kPlanted;
  masked[0].mask = false;
  cfg.pdes = masked;
  auto a = train_pinn(cfg, tr, va);
  cfg.pdes = {};
  auto b = train_pinn(cfg, tr, va);
  std::stringstream ha, hb;
  a.write_history(ha);
  b.write_history(hb);
  EXPECT_EQ(ha.str(), hb.str());
  for (std::size_t k = 0; k < a.trained.net.params().size(); ++k) {
    EXPECT_EQ(a.trained.net.params()[k].vec(), b.trained.net.params()[k].vec());
  }
  auto c = train(Network(cfg.net, 7), tr, va, cfg.train);
  for (std::size_t k = 0; k < c.net.params().size(); ++k) EXPECT_EQ(c.net.params()[k].vec(), b.trained.net.params()[k].vec());

  std::string header;
  std::getline(ha, header);
  EXPECT_EQ(header, "epoch,L_D,L_P,val_L_T");

  cfg.pdes = kPlanted;
  auto d = train_pinn(cfg, tr, va);
  for (const auto& e : d.trained.history) {
    ASSERT_EQ(e.components.size(), 2u);
    EXPECT_GE(e.components[0], 0.0);
    EXPECT_GE(e.components[1], 0.0);
    EXPECT_NEAR(e.train_loss, e.components[0] + e.components[1], 1e-12);
  }
}

TEST(Pinn, PhysicsTermLowersResidual) {
  auto tr = planted(10, 200), va = planted(11, 64);
  int wins = 0;
  for (std::uint64_t seed : {1u, 2u}) {
    PinnConfig cfg;
    cfg.net = small_tanh(3, 2, 2);
    cfg.train.seed = seed;
    cfg.train.epochs = 30;
    cfg.train.batch_size = 32;
    cfg.train.adam.lr = 5e-3;
    auto base = train_pinn(cfg, tr, va);
    cfg.pdes = kPlanted;
    auto pinn = train_pinn(cfg, tr, va);
    const double lb = evaluate_losses(base.trained.net, tr, kPlanted).physics;
    const double lp = evaluate_losses(pinn.trained.net, tr, kPlanted).physics;
    wins += lp <= 0.5 * lb;
    EXPECT_LE(lp, 0.5 * lb) << "seed " << seed << ": " << lp << " vs " << lb;
  }
  EXPECT_EQ(wins, 2);
}
