#include <gtest/gtest.h>

#include <random>

#include "pdemts/diff.hpp"

using namespace pdemts;

TEST(Diff, ForwardDifferenceExamples) {
  std::vector<double> t{0.0, 0.1, 0.2};
  EXPECT_EQ(forward_difference(t, t), (std::vector<double>{1, 1, 1}));
  std::vector<double> sq{0.0, 0.01, 0.04};
  auto d = forward_difference(sq, t);
  EXPECT_NEAR(d[0], 0.1, 1e-15);
  EXPECT_EQ(d[2], d[1]);
  std::vector<double> c{3, 3, 3};
  EXPECT_EQ(forward_difference(c, t), (std::vector<double>{0, 0, 0}));

  std::vector<double> dup{0.0, 1.0, 1.0, 2.0};
  std::vector<double> y{1, 2, 3, 4};
  try {
    forward_difference(y, dup);
    FAIL();
  } catch (const ZeroIncrementError& e) {
    EXPECT_EQ(e.index, 1u);
  }
  auto dropped = forward_difference(y, dup, ZeroIncrement::Drop);
  EXPECT_TRUE(std::isnan(dropped[1]));
}

TEST(Diff, ExactForAffineOnIrregularGrid) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> x{0.0}, y;
    for (int i = 1; i < 40; ++i) x.push_back(x.back() + u(rng));
    const double a = u(rng) * 4 - 2, b = u(rng);
    for (double v : x) y.push_back(a * v + b);
    for (double v : forward_difference(y, x)) EXPECT_NEAR(v, a, 1e-12);
  }
}

TEST(Diff, Linearity) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<double> x{0.0}, y1, y2, comb;
  for (int i = 1; i < 30; ++i) x.push_back(x.back() + 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    y1.push_back(g(rng));
    y2.push_back(g(rng));
    comb.push_back(2.0 * y1.back() - 3.0 * y2.back());
  }
  auto d1 = forward_difference(y1, x), d2 = forward_difference(y2, x), dc = forward_difference(comb, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(dc[i], 2.0 * d1[i] - 3.0 * d2[i], 1e-12);
}

TEST(Diff, MatrixShapeAndLabels) {
  TimeSeriesFrame f;
  f.names = {"t", "a", "b", "c"};
  f.seconds = {0, 60, 120, 180};
  f.columns = {{0, 1, 2, 3}, {1, 2, 4, 8}, {0, 1, 0, 1}, {5, 5, 6, 7}};
  f.missing.assign(4, std::vector<std::uint8_t>(4, 0));
  auto dm = derivative_matrix(f, {{"a", 1}, {"b", 2}}, {{"t", 1}});
  ASSERT_EQ(dm.cols(), 2u);
  EXPECT_EQ(dm.labels[1], Symbol::derivative(2, 1));
  EXPECT_EQ(dm.column(Symbol::derivative(1, 1)), (std::vector<double>{1, 2, 4, 4}));

  auto all = derivative_matrix(f, {{"a", 1}, {"b", 2}, {"c", 3}}, {{"t", 1}, {"a", 2}, {"b", 3}},
                               ZeroIncrement::Drop);
  EXPECT_EQ(all.cols(), 9u);
  EXPECT_EQ(all.labels[5], Symbol::derivative(2, 3));
  EXPECT_THROW(derivative_matrix(f, {{"a", 1}}, {}), std::invalid_argument);
  EXPECT_THROW(derivative_matrix(f, {{"a", 1}}, {{"c", 3}}), ZeroIncrementError);
  auto kept = derivative_matrix(f, {{"a", 1}}, {{"c", 3}}, ZeroIncrement::Drop);
  EXPECT_EQ(kept.rows_kept, (std::vector<std::size_t>{1, 2, 3}));
}
