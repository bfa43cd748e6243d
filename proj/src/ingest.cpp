#include "pdemts/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string_view>

namespace pdemts {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::int64_t parse_timestamp(std::string_view date, std::string_view time, std::size_t line) {
  auto d = split_fields(date, '/');
  auto t = split_fields(time, ':');
  int dd = 0, mon = 0, yr = 0, hh = 0, mm = 0, ss = 0;
  if (d.size() != 3 || t.size() != 3 || !parse_int(d[0], dd) || !parse_int(d[1], mon) ||
      !parse_int(d[2], yr) || !parse_int(t[0], hh) || !parse_int(t[1], mm) || !parse_int(t[2], ss)) {
    throw ParseError("malformed timestamp '" + std::string(date) + " " + std::string(time) + "'",
                     line);
  }
  using namespace std::chrono;
  const year_month_day ymd{year{yr}, month{static_cast<unsigned>(mon)},
                           day{static_cast<unsigned>(dd)}};
  if (!ymd.ok() || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) {
    throw ParseError("invalid timestamp '" + std::string(date) + " " + std::string(time) + "'",
                     line);
  }
  const auto ndays = sys_days{ymd}.time_since_epoch().count();
  return static_cast<std::int64_t>(ndays) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- frame

std::size_t TimeSeriesFrame::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("no column named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

bool TimeSeriesFrame::has(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::size_t TimeSeriesFrame::missing_count() const {
  std::size_t n = 0;
  for (const auto& m : missing) n += static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
  return n;
}

TimeSeriesFrame TimeSeriesFrame::with_column(const std::string& name, std::vector<double> values,
                                             bool front) const {
  if (values.size() != rows()) throw DataError("column '" + name + "' has wrong length");
  if (has(name)) throw DataError("duplicate column '" + name + "'");
  TimeSeriesFrame out = *this;
  std::vector<std::uint8_t> miss(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) miss[i] = std::isnan(values[i]) ? 1 : 0;
  const auto pos = front ? 0 : out.names.size();
  out.names.insert(out.names.begin() + static_cast<std::ptrdiff_t>(pos), name);
  out.columns.insert(out.columns.begin() + static_cast<std::ptrdiff_t>(pos), std::move(values));
  out.missing.insert(out.missing.begin() + static_cast<std::ptrdiff_t>(pos), std::move(miss));
  return out;
}

TimeSeriesFrame TimeSeriesFrame::without_column(const std::string& name) const {
  const auto k = static_cast<std::ptrdiff_t>(index(name));
  TimeSeriesFrame out = *this;
  out.names.erase(out.names.begin() + k);
  out.columns.erase(out.columns.begin() + k);
  out.missing.erase(out.missing.begin() + k);
  return out;
}

TimeSeriesFrame TimeSeriesFrame::rows_slice(std::size_t begin, std::size_t count) const {
  if (begin + count > rows()) throw DataError("row slice out of range");
  auto cut = [&](const auto& v) {
    using V = std::decay_t<decltype(v)>;
    return V(v.begin() + static_cast<std::ptrdiff_t>(begin),
             v.begin() + static_cast<std::ptrdiff_t>(begin + count));
  };
  TimeSeriesFrame out;
  out.names = names;
  out.seconds = cut(seconds);
  for (std::size_t c = 0; c < width(); ++c) {
    out.columns.push_back(cut(columns[c]));
    out.missing.push_back(cut(missing[c]));
  }
  return out;
}

// ---------------------------------------------------------------- CSV

TimeSeriesFrame parse_power_csv(std::istream& in, const std::vector<std::string>& schema,
                                std::size_t max_rows) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1);
  auto header = split_fields(strip_cr(line), ';');
  if (header.size() != schema.size() + 2 || header[0] != "Date" || header[1] != "Time") {
    throw ParseError("unexpected header '" + line + "'", 1);
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (header[c + 2] != schema[c]) {
      throw ParseError("header column " + std::to_string(c + 3) + " is '" +
                           std::string(header[c + 2]) + "', expected '" + schema[c] + "'",
                       1);
    }
  }

  TimeSeriesFrame f;
  f.names = schema;
  f.columns.resize(schema.size());
  f.missing.resize(schema.size());

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    if (max_rows && f.rows() == max_rows) break;
    auto fields = split_fields(sv, ';');
    if (fields.size() != schema.size() + 2) {
      throw ParseError("expected " + std::to_string(schema.size() + 2) + " fields, got " +
                           std::to_string(fields.size()),
                       lineno);
    }
    const auto ts = parse_timestamp(fields[0], fields[1], lineno);
    if (!f.seconds.empty() && ts <= f.seconds.back()) {
      throw DataError("line " + std::to_string(lineno) + ": timestamps not strictly increasing");
    }
    f.seconds.push_back(ts);
    for (std::size_t c = 0; c < schema.size(); ++c) {
      std::string_view cell = fields[c + 2];
      if (cell.empty() || cell == "?") {
        f.columns[c].push_back(kNaN);
        f.missing[c].push_back(1);
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError("bad value '" + std::string(cell) + "' in column " + schema[c], lineno);
      }
      f.columns[c].push_back(v);
      f.missing[c].push_back(0);
    }
  }
  return f;
}

TimeSeriesFrame load_power_csv(const std::string& path, const std::vector<std::string>& schema,
                               std::size_t max_rows) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_power_csv(in, schema, max_rows);
}

void write_power_csv(std::ostream& out, const TimeSeriesFrame& frame) {
  out << "Date;Time";
  for (const auto& n : frame.names) out << ';' << n;
  out << '\n';
  using namespace std::chrono;
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    const auto s = frame.seconds[i];
    const auto nd = static_cast<int>(s >= 0 ? s / 86400 : (s - 86399) / 86400);
    const auto tod = s - static_cast<std::int64_t>(nd) * 86400;
    const year_month_day ymd{sys_days{days{nd}}};
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%02u/%02u/%04d;%02d:%02d:%02d", static_cast<unsigned>(ymd.day()),
                  static_cast<unsigned>(ymd.month()), static_cast<int>(ymd.year()),
                  static_cast<int>(tod / 3600), static_cast<int>(tod / 60 % 60),
                  static_cast<int>(tod % 60));
    out << buf;
    for (std::size_t c = 0; c < frame.width(); ++c) {
      out << ';';
      if (frame.missing[c][i]) {
        out << '?';
      } else {
        out << format_g17(frame.columns[c][i]);
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------- transforms

TimeSeriesFrame compute_elapsed_hours(const TimeSeriesFrame& frame) {
  std::vector<double> hours(frame.rows());
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    hours[i] = static_cast<double>(frame.seconds[i] - frame.seconds[0]) / 3600.0;
  }
  return frame.with_column(kElapsedColumn, std::move(hours), /*front=*/true);
}

InterpolationReport interpolate_missing(const TimeSeriesFrame& frame) {
  InterpolationReport rep;
  rep.frame = frame;
  std::size_t filled_total = 0;
  const std::size_t n = frame.rows();
  for (std::size_t c = 0; c < frame.width(); ++c) {
    auto& col = rep.frame.columns[c];
    auto& miss = rep.frame.missing[c];
    std::size_t filled = 0;
    std::size_t i = 0;
    while (i < n) {
      if (!miss[i]) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && miss[j]) ++j;
      if (i == 0 || j == n) {
        throw DataError("column '" + frame.names[c] + "' has a " + (i == 0 ? "leading" : "trailing") +
                        " missing run; trim the frame first");
      }
      const double t0 = static_cast<double>(frame.seconds[i - 1]);
      const double t1 = static_cast<double>(frame.seconds[j]);
      const double y0 = col[i - 1], y1 = col[j];
      for (std::size_t k = i; k < j; ++k) {
        const double w = (static_cast<double>(frame.seconds[k]) - t0) / (t1 - t0);
        col[k] = y0 + w * (y1 - y0);
        miss[k] = 0;
      }
      filled += j - i;
      i = j;
    }
    filled_total += filled;
    rep.fill_fraction.push_back(n ? static_cast<double>(filled) / static_cast<double>(n) : 0.0);
  }
  const double cells = static_cast<double>(n * frame.width());
  rep.overall_fraction = cells > 0 ? static_cast<double>(filled_total) / cells : 0.0;
  return rep;
}

TimeSeriesFrame trim_missing_edges(const TimeSeriesFrame& frame) {
  auto row_ok = [&](std::size_t i) {
    for (const auto& m : frame.missing)
      if (m[i]) return false;
    return true;
  };
  std::size_t b = 0, e = frame.rows();
  while (b < e && !row_ok(b)) ++b;
  while (e > b && !row_ok(e - 1)) --e;
  return frame.rows_slice(b, e - b);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  double ma = 0.0, mb = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    ma += a[i];
    mb += b[i];
    ++n;
  }
  if (n < 2) return kNaN;
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) continue;
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return kNaN;
  return sab / std::sqrt(saa * sbb);
}

ScreenReport correlation_screen(const TimeSeriesFrame& frame, double threshold,
                                std::vector<std::string> columns) {
  if (frame.rows() < 2) throw DataError("correlation screen needs at least 2 rows");
  if (columns.empty()) columns = frame.names;
  ScreenReport rep;
  std::vector<bool> usable(columns.size(), true);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto& col = frame.column(columns[i]);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : col) {
      if (std::isnan(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) {
      usable[i] = false;
      rep.warnings.push_back("column '" + columns[i] + "' has zero variance; excluded");
    }
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    for (std::size_t j = i + 1; j < columns.size(); ++j) {
      if (!usable[i] || !usable[j]) continue;
      const double r = pearson(frame.column(columns[i]), frame.column(columns[j]));
      CorrelationPair pr{columns[i], columns[j], r};
      rep.all.push_back(pr);
      if (std::fabs(r) >= threshold) {
        rep.flagged.push_back(pr);
        if (std::find(rep.dropped.begin(), rep.dropped.end(), columns[j]) == rep.dropped.end()) {
          rep.dropped.push_back(columns[j]);
        }
      }
    }
  }
  return rep;
}

double active_energy(double gap, double sm1, double sm2, double sm3) {
  return gap * 1000.0 / 60.0 - sm1 - sm2 - sm3;
}

std::vector<double> derive_active_energy(const TimeSeriesFrame& frame) {
  const auto& gap = frame.column("Global_active_power");
  const auto& s1 = frame.column("Sub_metering_1");
  const auto& s2 = frame.column("Sub_metering_2");
  const auto& s3 = frame.column("Sub_metering_3");
  std::vector<double> out(frame.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = active_energy(gap[i], s1[i], s2[i], s3[i]);
  return out;
}

// ---------------------------------------------------------------- normalization

NormalizationStats fit_normalization(const TimeSeriesFrame& frame, std::size_t begin,
                                     std::size_t count) {
  if (begin + count > frame.rows() || count == 0) throw DataError("normalization range invalid");
  NormalizationStats st;
  for (std::size_t c = 0; c < frame.width(); ++c) {
    const auto& col = frame.columns[c];
    double m = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) m += col[i];
    m /= static_cast<double>(count);
    double v = 0.0;
    for (std::size_t i = begin; i < begin + count; ++i) v += (col[i] - m) * (col[i] - m);
    const double sd = std::sqrt(v / static_cast<double>(count));
    if (!std::isfinite(m) || !std::isfinite(sd)) {
      throw DataError("column '" + frame.names[c] + "' has missing or non-finite values");
    }
    if (sd == 0.0) throw DataError("column '" + frame.names[c] + "' is constant; cannot normalize");
    st.names.push_back(frame.names[c]);
    st.mean.push_back(m);
    st.std.push_back(sd);
  }
  return st;
}

std::pair<TimeSeriesFrame, NormalizationStats> normalize(
    const TimeSeriesFrame& frame, const std::optional<NormalizationStats>& stats) {
  NormalizationStats st = stats ? *stats : fit_normalization(frame, 0, frame.rows());
  if (st.names != frame.names) throw DataError("normalization stats do not match frame columns");
  TimeSeriesFrame out = frame;
  for (std::size_t c = 0; c < frame.width(); ++c) {
    if (!(st.std[c] > 0.0)) throw DataError("column '" + st.names[c] + "' has zero std");
    for (auto& v : out.columns[c]) v = (v - st.mean[c]) / st.std[c];
  }
  return {std::move(out), std::move(st)};
}

TimeSeriesFrame denormalize(const TimeSeriesFrame& frame, const NormalizationStats& st) {
  if (st.names != frame.names) throw DataError("normalization stats do not match frame columns");
  TimeSeriesFrame out = frame;
  for (std::size_t c = 0; c < frame.width(); ++c)
    for (auto& v : out.columns[c]) v = v * st.std[c] + st.mean[c];
  return out;
}

void NormalizationStats::write(std::ostream& out) const {
  out << "column,mean,std\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    out << names[c] << ',' << format_g17(mean[c]) << ',' << format_g17(std[c]) << '\n';
  }
}

NormalizationStats NormalizationStats::read(std::istream& in) {
  NormalizationStats st;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    auto f = split_fields(strip_cr(line), ',');
    if (f.size() != 3) continue;
    st.names.emplace_back(f[0]);
    st.mean.push_back(std::stod(std::string(f[1])));
    st.std.push_back(std::stod(std::string(f[2])));
  }
  return st;
}

// ---------------------------------------------------------------- windows

LagWindowSet::LagWindowSet(Tensor x, Tensor y, std::vector<std::string> feature_names,
                           std::vector<std::string> target_names)
    : feature_names_(std::move(feature_names)), target_names_(std::move(target_names)) {
  if (x.rank() != 3 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw std::invalid_argument("LagWindowSet expects x (n,T,d) and y (n,p), got " +
                                shape_string(x.shape()) + " and " + shape_string(y.shape()));
  }
  count_ = x.dim(0);
  lag_ = x.dim(1);
  d_ = x.dim(2);
  p_ = y.dim(1);
  xdata_ = std::make_shared<const std::vector<double>>(x.vec());
  ydata_ = std::make_shared<const std::vector<double>>(y.vec());
}

LagWindowSet LagWindowSet::from_series(std::vector<double> inputs, std::vector<double> targets,
                                       std::size_t rows, std::size_t d, std::size_t p,
                                       std::size_t lag, std::vector<std::string> feature_names,
                                       std::vector<std::string> target_names) {
  if (rows <= lag) {
    throw DataError("insufficient data: " + std::to_string(rows) + " rows for lag " +
                    std::to_string(lag));
  }
  if (inputs.size() != rows * d || targets.size() != rows * p) {
    throw std::invalid_argument("series buffers do not match rows x columns");
  }
  LagWindowSet w;
  w.series_ = true;
  w.xdata_ = std::make_shared<const std::vector<double>>(std::move(inputs));
  w.ydata_ = std::make_shared<const std::vector<double>>(std::move(targets));
  w.count_ = rows - lag;
  w.lag_ = lag;
  w.d_ = d;
  w.p_ = p;
  w.feature_names_ = std::move(feature_names);
  w.target_names_ = std::move(target_names);
  return w;
}

double LagWindowSet::x(std::size_t i, std::size_t t, std::size_t k) const {
  if (series_) return (*xdata_)[(offset_ + i + t) * d_ + k];
  return (*xdata_)[((offset_ + i) * lag_ + t) * d_ + k];
}

double LagWindowSet::y(std::size_t i, std::size_t j) const {
  if (series_) return (*ydata_)[(offset_ + i + lag_) * p_ + j];
  return (*ydata_)[(offset_ + i) * p_ + j];
}

Tensor LagWindowSet::gather_x(const std::vector<std::size_t>& idx) const {
  Tensor out({idx.size(), lag_, d_});
  auto dst = out.data().begin();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (idx[b] >= count_) throw std::out_of_range("window index out of range");
    const std::size_t base =
        series_ ? (offset_ + idx[b]) * d_ : (offset_ + idx[b]) * lag_ * d_;
    dst = std::copy_n(xdata_->begin() + static_cast<std::ptrdiff_t>(base), lag_ * d_, dst);
  }
  return out;
}

Tensor LagWindowSet::gather_y(const std::vector<std::size_t>& idx) const {
  Tensor out({idx.size(), p_});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    if (idx[b] >= count_) throw std::out_of_range("window index out of range");
    for (std::size_t j = 0; j < p_; ++j) out[b * p_ + j] = y(idx[b], j);
  }
  return out;
}

Tensor LagWindowSet::batch_x(std::size_t begin, std::size_t count) const {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
  return gather_x(idx);
}

Tensor LagWindowSet::batch_y(std::size_t begin, std::size_t count) const {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = begin + i;
  return gather_y(idx);
}

Tensor LagWindowSet::last_step(std::size_t begin, std::size_t count) const {
  if (begin + count > count_) throw std::out_of_range("window range out of range");
  Tensor out({count, d_});
  for (std::size_t b = 0; b < count; ++b)
    for (std::size_t k = 0; k < d_; ++k) out[b * d_ + k] = x(begin + b, lag_ - 1, k);
  return out;
}

LagWindowSet LagWindowSet::subset(std::size_t begin, std::size_t count) const {
  if (begin + count > count_) {
    throw DataError("window range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                    ") exceeds " + std::to_string(count_) + " windows");
  }
  LagWindowSet out = *this;
  out.offset_ = offset_ + begin;
  out.count_ = count;
  return out;
}

LagWindowSet make_lag_windows(const TimeSeriesFrame& frame, std::size_t lag,
                              const std::vector<std::string>& inputs,
                              const std::vector<std::string>& targets) {
  if (lag == 0) throw DataError("lag must be positive");
  const std::size_t n = frame.rows();
  if (n <= lag) {
    throw DataError("insufficient data: " + std::to_string(n) + " rows for lag " +
                    std::to_string(lag));
  }
  auto interleave = [&](const std::vector<std::string>& cols) {
    std::vector<const std::vector<double>*> src;
    for (const auto& c : cols) {
      if (frame.missing[frame.index(c)].end() !=
          std::find(frame.missing[frame.index(c)].begin(), frame.missing[frame.index(c)].end(), 1)) {
        throw DataError("column '" + c + "' still has missing cells");
      }
      src.push_back(&frame.column(c));
    }
    std::vector<double> out(n * cols.size());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < cols.size(); ++k) out[i * cols.size() + k] = (*src[k])[i];
    return out;
  };
  return LagWindowSet::from_series(interleave(inputs), interleave(targets), n, inputs.size(),
                                   targets.size(), lag, inputs, targets);
}

SplitSpec SplitSpec::contiguous(std::size_t start, std::size_t n_train, std::size_t n_val,
                                std::size_t n_test) {
  SplitSpec s;
  s.train = {start, n_train};
  s.validation = {start + n_train, n_val};
  s.test = {start + n_train + n_val, n_test};
  return s;
}

void SplitSpec::validate(std::size_t available) const {
  if (train.end() > validation.begin || validation.end() > test.begin) {
    throw DataError("split ranges overlap or are out of chronological order");
  }
  if (test.end() > available) {
    throw DataError("split needs " + std::to_string(test.end()) + " windows, only " +
                    std::to_string(available) + " available");
  }
}

SplitWindows split(const LagWindowSet& windows, const SplitSpec& spec) {
  spec.validate(windows.size());
  return {windows.subset(spec.train.begin, spec.train.count),
          windows.subset(spec.validation.begin, spec.validation.count),
          windows.subset(spec.test.begin, spec.test.count)};
}

}  // namespace pdemts
