#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "pdemts/autodiff.hpp"

using namespace pdemts;
using pdemts::testing::max_grad_error;
using pdemts::testing::random_tensor;

namespace {

struct UnaryCase {
  const char* name;
  std::function<Var(const Var&)> op;
  double lo, hi;
};

}  // namespace

TEST(Autodiff, UnaryOpsMatchFiniteDifferences) {
  std::vector<UnaryCase> cases = {
      {"neg", [](const Var& a) { return ad::neg(a); }, -1, 1},
      {"scale", [](const Var& a) { return ad::scale(a, -2.5); }, -1, 1},
      {"add_scalar", [](const Var& a) { return ad::add_scalar(a, 3.0); }, -1, 1},
      {"square", [](const Var& a) { return ad::square(a); }, -1, 1},
      {"exp", [](const Var& a) { return ad::exp(a); }, -1, 1},
      {"log", [](const Var& a) { return ad::log(a); }, 0.5, 2},
      {"recip", [](const Var& a) { return ad::recip(a); }, 0.5, 2},
      {"tanh", [](const Var& a) { return ad::tanh(a); }, -2, 2},
      {"sin", [](const Var& a) { return ad::sin(a); }, -3, 3},
      {"cos", [](const Var& a) { return ad::cos(a); }, -3, 3},
      {"relu", [](const Var& a) { return ad::relu(a); }, 0.1, 1},
      {"abs", [](const Var& a) { return ad::abs(a); }, 0.1, 1},
      {"powi3", [](const Var& a) { return ad::powi(a, 3); }, -1, 1},
  };
  std::mt19937_64 rng(7);
  for (const auto& c : cases) {
    for (int rep = 0; rep < 20; ++rep) {
      auto x = random_tensor({2, 3}, rng, c.lo, c.hi);
      auto w = random_tensor({2, 3}, rng);
      auto f = [&](Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::mul(c.op(v[0]), v[1]));
      };
      EXPECT_LE(max_grad_error(f, {x, w}), 1e-5) << c.name;
    }
  }
}

TEST(Autodiff, StructuralOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto a = random_tensor({4, 3}, rng);
    auto b = random_tensor({3, 5}, rng);
    auto bias = random_tensor({5}, rng);
    auto f = [](Tape&, const std::vector<Var>& v) {
      auto h = ad::add_bias(ad::matmul(v[0], v[1]), v[2]);
      auto t = ad::transpose(h);
      auto s = ad::slice(ad::pad(t, 1, 2, 1), 1, 1, 4);
      auto r = ad::reshape(s, Shape{20});
      return ad::sum(ad::tanh(r));
    };
    EXPECT_LE(max_grad_error(f, {a, b, bias}), 1e-5);
  }
}

TEST(Autodiff, MaxPoolAndProtectedDivGradients) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = random_tensor({2, 5, 3}, rng);
    auto num = random_tensor({6}, rng);
    auto den = random_tensor({6}, rng, 0.5, 2.0);
    auto f = [](Tape&, const std::vector<Var>& v) {
      auto pooled = ad::maxpool_time(v[0], 2);
      return ad::add(ad::sum(ad::square(pooled)), ad::sum(ad::protected_div(v[1], v[2])));
    };
    EXPECT_LE(max_grad_error(f, {x, num, den}), 1e-5);
  }
}

TEST(Autodiff, LinearLossGradientIsInput) {
  Tape tape;
  auto w = tape.variable(Tensor({3}, std::vector<double>{0.1, -0.2, 0.3}));
  auto x = tape.constant(Tensor({3}, std::vector<double>{4.0, 5.0, -6.0}));
  auto loss = ad::sum(ad::mul(w, x));
  auto g = tape.grad_values(loss, std::vector<Var>{w});
  EXPECT_EQ(g[0].vec(), (std::vector<double>{4.0, 5.0, -6.0}));
}

TEST(Autodiff, DisconnectedParameterHasZeroGradient) {
  Tape tape;
  auto used = tape.variable(Tensor({2}, 1.5));
  auto unused = tape.variable(Tensor({2}, 2.0));
  auto loss = ad::sum(ad::square(used));
  auto g = tape.grad_values(loss, std::vector<Var>{used, unused});
  EXPECT_EQ(g[1].vec(), (std::vector<double>{0.0, 0.0}));
}

TEST(Autodiff, BackwardFromNonScalarThrows) {
  Tape tape;
  auto w = tape.variable(Tensor({2}, 1.0));
  EXPECT_THROW(tape.grad(ad::square(w), std::vector<Var>{w}), std::invalid_argument);
}

TEST(Autodiff, SecondOrderThroughInputGradient) {
  // loss(w) = sum_i (d/dx_i sum tanh(x W))^2; checked against finite differences in w.
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    auto x = random_tensor({3, 2}, rng);
    auto w = random_tensor({2, 4}, rng);
    auto f = [x](Tape& tape, const std::vector<Var>& v) {
      auto xv = tape.variable(x);
      auto y = ad::sum(ad::tanh(ad::matmul(xv, v[0])));
      auto gx = tape.grad(y, std::vector<Var>{xv}, /*create_graph=*/true)[0];
      return ad::sum(ad::square(gx));
    };
    EXPECT_LE(max_grad_error(f, {w}), 1e-5);
  }
}
