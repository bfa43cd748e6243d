#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pdemts/ingest.hpp"

using namespace pdemts;

namespace {

const std::string kHeader =
    "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;"
    "Sub_metering_1;Sub_metering_2;Sub_metering_3\n";

TimeSeriesFrame parse(const std::string& body) {
  std::istringstream in(kHeader + body);
  return parse_power_csv(in);
}

TimeSeriesFrame small_frame(std::vector<double> values, std::int64_t step = 60) {
  TimeSeriesFrame f;
  f.names = {"v"};
  f.columns = {values};
  f.missing = {std::vector<std::uint8_t>(values.size(), 0)};
  for (std::size_t i = 0; i < values.size(); ++i) {
    f.seconds.push_back(static_cast<std::int64_t>(i) * step);
    if (std::isnan(values[i])) f.missing[0][i] = 1;
  }
  return f;
}

TimeSeriesFrame random_frame(std::mt19937_64& rng, std::size_t n, std::size_t w) {
  std::normal_distribution<double> g;
  TimeSeriesFrame f;
  for (std::size_t c = 0; c < w; ++c) {
    f.names.push_back("c" + std::to_string(c));
    std::vector<double> col(n);
    for (auto& v : col) v = g(rng);
    f.columns.push_back(col);
    f.missing.emplace_back(n, 0);
  }
  for (std::size_t i = 0; i < n; ++i) f.seconds.push_back(1000 + static_cast<std::int64_t>(i) * 60);
  return f;
}

}  // namespace

TEST(Ingest, ParsesSingleRow) {
  auto f = parse("16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n");
  ASSERT_EQ(f.rows(), 1u);
  EXPECT_EQ(f.missing_count(), 0u);
  EXPECT_EQ(f.column("Voltage")[0], 234.840);
  EXPECT_EQ(f.column("Sub_metering_3")[0], 17.0);
}

TEST(Ingest, MissingMarkersAreFlaggedNotZeroFilled) {
  auto f = parse("16/12/2006;17:24:00;4.216;0.418;?;18.400;0.000;1.000;17.000\n"
                 "16/12/2006;17:25:00;4.216;;234.1;18.400;0.000;1.000;17.000\n");
  EXPECT_TRUE(f.missing[2][0]);
  EXPECT_TRUE(std::isnan(f.columns[2][0]));
  EXPECT_TRUE(f.missing[1][1]);
  EXPECT_EQ(f.missing_count(), 2u);
}

TEST(Ingest, EmptyBodyAndErrors) {
  EXPECT_EQ(parse("").rows(), 0u);
  try {
    parse("16/12/2006;17:24:00;1;1;1;1;1;1;1\n16-12-2006;17:25:00;1;1;1;1;1;1;1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3u);
  }
  EXPECT_THROW(parse("16/12/2006;17:24:00;1;1;1;1;1;1;1\n16/12/2006;17:24:00;1;1;1;1;1;1;1\n"),
               DataError);
  EXPECT_THROW(parse("31/02/2007;17:24:00;1;1;1;1;1;1;1\n"), ParseError);
}

TEST(Ingest, ElapsedHours) {
  auto f = parse("16/12/2006;17:24:00;1;1;1;1;1;1;1\n"
                 "16/12/2006;17:25:00;1;1;1;1;1;1;1\n"
                 "17/12/2006;17:24:00;1;1;1;1;1;1;1\n");
  auto g = compute_elapsed_hours(f);
  EXPECT_EQ(g.names.front(), kElapsedColumn);
  EXPECT_EQ(g.column(kElapsedColumn)[0], 0.0);
  EXPECT_NEAR(g.column(kElapsedColumn)[1], 1.0 / 60.0, 1e-15);
  EXPECT_EQ(g.column(kElapsedColumn)[2], 24.0);
}

TEST(Ingest, LinearInterpolation) {
  const double nan = std::nan("");
  auto rep = interpolate_missing(small_frame({1.0, nan, 3.0}));
  EXPECT_EQ(rep.frame.columns[0], (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(rep.frame.missing_count(), 0u);
  EXPECT_NEAR(rep.fill_fraction[0], 1.0 / 3.0, 1e-15);

  auto same = interpolate_missing(small_frame({1.0, 5.0, 3.0}));
  EXPECT_EQ(same.frame.columns[0], (std::vector<double>{1.0, 5.0, 3.0}));

  // Non-uniform spacing interpolates against time, not row index.
  auto f = small_frame({0.0, nan, 4.0});
  f.seconds = {0, 60, 240};
  EXPECT_DOUBLE_EQ(interpolate_missing(f).frame.columns[0][1], 1.0);

  EXPECT_THROW(interpolate_missing(small_frame({nan, 1.0, 2.0})), DataError);
  EXPECT_THROW(interpolate_missing(small_frame({1.0, 2.0, nan})), DataError);
  EXPECT_EQ(trim_missing_edges(small_frame({nan, 1.0, nan, 2.0, nan})).rows(), 3u);
}

TEST(Ingest, InterpolationNeverTouchesObservedCells) {
  std::mt19937_64 rng(4);
  auto f = random_frame(rng, 500, 3);
  std::bernoulli_distribution drop(0.1);
  auto orig = f;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 1; i + 1 < 500; ++i)
      if (drop(rng)) {
        f.columns[c][i] = std::nan("");
        f.missing[c][i] = 1;
      }
  auto rep = interpolate_missing(f);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 500; ++i) {
      if (!f.missing[c][i]) EXPECT_EQ(rep.frame.columns[c][i], orig.columns[c][i]);
    }
}

TEST(Ingest, CorrelationScreen) {
  auto f = small_frame({1, 2, 4, 8, 3});
  f = f.with_column("twice", {3, 5, 9, 17, 7});
  f = f.with_column("neg", {-1, -2, -4, -8, -3});
  f = f.with_column("flat", {2, 2, 2, 2, 2});
  auto rep = correlation_screen(f, 1.0 - 1e-9);
  EXPECT_EQ(rep.warnings.size(), 1u);
  EXPECT_EQ(rep.flagged.size(), 3u);
  EXPECT_EQ(rep.dropped, (std::vector<std::string>{"twice", "neg"}));
  EXPECT_NEAR(pearson(f.column("v"), f.column("v")), 1.0, 1e-15);
  EXPECT_NEAR(pearson(f.column("v"), f.column("neg")), -1.0, 1e-15);

  std::mt19937_64 rng(8);
  auto g = random_frame(rng, 200, 5);
  auto fwd = correlation_screen(g, 0.05);
  auto rev = correlation_screen(g, 0.05, {"c4", "c3", "c2", "c1", "c0"});
  auto pairs = [](const ScreenReport& r) {
    std::set<std::pair<std::string, std::string>> s;
    for (const auto& p : r.flagged) s.insert(std::minmax(p.a, p.b));
    return s;
  };
  EXPECT_EQ(pairs(fwd), pairs(rev));
}

TEST(Ingest, ActiveEnergy) {
  EXPECT_NEAR(active_energy(0.06, 0, 0, 0), 1.0, 1e-12);
  EXPECT_NEAR(active_energy(4.216, 0, 1, 17), 52.266666666666666, 1e-9);
  EXPECT_EQ(active_energy(0, 0, 0, 0), 0.0);
  auto f = parse("16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n"
                 "16/12/2006;17:25:00;?;0.418;234.840;18.400;0.000;1.000;17.000\n");
  auto e = derive_active_energy(f);
  EXPECT_NEAR(e[0], 52.266666666666666, 1e-9);
  EXPECT_TRUE(std::isnan(e[1]));
}

TEST(Ingest, Normalization) {
  auto [z, st] = normalize(small_frame({2, 4, 6}));
  EXPECT_EQ(st.mean[0], 4.0);
  EXPECT_NEAR(st.std[0], 1.632993161855452, 1e-12);
  EXPECT_NEAR(z.columns[0][0], -1.224744871391589, 1e-12);
  EXPECT_EQ(z.columns[0][1], 0.0);
  EXPECT_NEAR(z.columns[0][2], 1.224744871391589, 1e-12);

  auto [z2, st2] = normalize(z, fit_normalization(z, 0, 3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(z2.columns[0][i], z.columns[0][i], 1e-12);
  EXPECT_THROW(normalize(small_frame({3, 3, 3})), DataError);

  std::mt19937_64 rng(2);
  auto f = random_frame(rng, 300, 4);
  auto stats = fit_normalization(f, 0, 100);
  auto [nz, unused] = normalize(f, stats);
  auto back = denormalize(nz, stats);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 300; ++i) EXPECT_NEAR(back.columns[c][i], f.columns[c][i], 1e-10);

  std::stringstream ss;
  stats.write(ss);
  auto read = NormalizationStats::read(ss);
  EXPECT_EQ(read.mean, stats.mean);
  EXPECT_EQ(read.std, stats.std);
}

TEST(Ingest, LagWindows) {
  auto f = small_frame({10, 11, 12, 13});
  auto w = make_lag_windows(f, 2, {"v"}, {"v"});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w.all_x().vec(), (std::vector<double>{10, 11, 11, 12}));
  EXPECT_EQ(w.all_y().vec(), (std::vector<double>{12, 13}));
  EXPECT_THROW(make_lag_windows(f, 4, {"v"}, {"v"}), DataError);

  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    auto g = random_frame(rng, 80, 4);
    auto win = make_lag_windows(g, 7, {"c0", "c1", "c2"}, {"c3", "c1"});
    ASSERT_EQ(win.size(), 73u);
    auto y = win.all_y();
    auto x = win.all_x();
    for (std::size_t i = 0; i < win.size(); ++i) {
      EXPECT_EQ(y[i * 2], g.columns[3][i + 7]);
      EXPECT_EQ(y[i * 2 + 1], g.columns[1][i + 7]);
      for (std::size_t t = 0; t < 7; ++t) EXPECT_EQ(x[(i * 7 + t) * 3 + 2], g.columns[2][i + t]);
    }
    auto sub = win.subset(5, 10);
    EXPECT_EQ(sub.y(0, 0), g.columns[3][12]);
    EXPECT_EQ(sub.last_step(0, 1)[1], g.columns[1][11]);
  }

  Tensor xt({3, 2, 1}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor yt({3, 1}, std::vector<double>{7, 8, 9});
  LagWindowSet explicit_set(xt, yt, {"a"}, {"b"});
  EXPECT_EQ(explicit_set.subset(1, 2).all_x().vec(), (std::vector<double>{3, 4, 5, 6}));
  EXPECT_EQ(explicit_set.gather_y({2, 0}).vec(), (std::vector<double>{9, 7}));
}

TEST(Ingest, Splits) {
  std::mt19937_64 rng(1);
  auto g = random_frame(rng, 3100, 2);
  auto w = make_lag_windows(g, 30, {"c0"}, {"c1"});
  auto s = split(w, SplitSpec::contiguous(0, 2000, 500, 500));
  EXPECT_EQ(s.train.size(), 2000u);
  EXPECT_EQ(s.validation.first_row(0), 2000u);
  EXPECT_EQ(s.test.first_row(0), 2500u);

  SplitSpec bad = SplitSpec::contiguous(0, 100, 100, 100);
  bad.validation.begin = 50;
  EXPECT_THROW(split(w, bad), DataError);
  EXPECT_THROW(split(w, SplitSpec::contiguous(100, 2000, 500, 500)), DataError);
  EXPECT_NO_THROW(SplitSpec::contiguous(0, 1958991, 19000, 788).validate(1958991 + 19000 + 788));
}

TEST(Ingest, CsvRoundTrip) {
  auto f = parse("16/12/2006;17:24:00;4.216;0.418;234.840;18.400;0.000;1.000;17.000\n"
                 "16/12/2006;17:25:00;5.36;0.436;233.630;23.000;0.000;1.000;16.000\n"
                 "1/1/2007;00:00:00;?;?;?;?;?;?;?\n");
  f.columns[0][1] = 0.1 + 0.2;
  std::stringstream ss;
  write_power_csv(ss, f);
  auto g = parse_power_csv(ss);
  EXPECT_EQ(g.seconds, f.seconds);
  EXPECT_EQ(g.missing, f.missing);
  for (std::size_t c = 0; c < f.width(); ++c)
    for (std::size_t i = 0; i < f.rows(); ++i)
      if (!f.missing[c][i]) EXPECT_EQ(g.columns[c][i], f.columns[c][i]);
}
