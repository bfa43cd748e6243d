#pragma once

// Household power CSV ingestion: parsing, repair, screening, normalization and
// lag windowing. Frames are values; every operation returns a new frame.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pdemts/tensor.hpp"

namespace pdemts {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line(line) {}
  std::size_t line;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string> kPowerSchema = {
    "Global_active_power", "Global_reactive_power", "Voltage",       "Global_intensity",
    "Sub_metering_1",      "Sub_metering_2",        "Sub_metering_3"};

inline const std::string kElapsedColumn = "elapsed_hours";

struct TimeSeriesFrame {
  std::vector<std::string> names;
  // Seconds since 1970-01-01 of the naive local timestamp.
  std::vector<std::int64_t> seconds;
  // Missing cells hold NaN and are flagged in `missing`.
  std::vector<std::vector<double>> columns;
  std::vector<std::vector<std::uint8_t>> missing;

  std::size_t rows() const { return seconds.size(); }
  std::size_t width() const { return names.size(); }
  std::size_t index(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const { return columns[index(name)]; }
  std::size_t missing_count() const;

  TimeSeriesFrame with_column(const std::string& name, std::vector<double> values,
                              bool front = false) const;
  TimeSeriesFrame without_column(const std::string& name) const;
  TimeSeriesFrame rows_slice(std::size_t begin, std::size_t count) const;
};

TimeSeriesFrame parse_power_csv(std::istream& in,
                                const std::vector<std::string>& schema = kPowerSchema,
                                std::size_t max_rows = 0);
TimeSeriesFrame load_power_csv(const std::string& path,
                               const std::vector<std::string>& schema = kPowerSchema,
                               std::size_t max_rows = 0);
// Inverse of parse_power_csv; decimals use 17 significant digits, missing is '?'.
void write_power_csv(std::ostream& out, const TimeSeriesFrame& frame);

TimeSeriesFrame compute_elapsed_hours(const TimeSeriesFrame& frame);

struct InterpolationReport {
  TimeSeriesFrame frame;
  std::vector<double> fill_fraction;  // per column of the input frame
  double overall_fraction = 0.0;      // filled cells / all cells
};

// Linear interpolation in time for each missing run. Leading or trailing runs
// throw DataError naming the column.
InterpolationReport interpolate_missing(const TimeSeriesFrame& frame);
// Drops leading and trailing rows that contain any missing cell.
TimeSeriesFrame trim_missing_edges(const TimeSeriesFrame& frame);

struct CorrelationPair {
  std::string a, b;
  double r = 0.0;
};

struct ScreenReport {
  std::vector<CorrelationPair> all;
  std::vector<CorrelationPair> flagged;  // |r| >= threshold
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;
};

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Pairwise-complete Pearson correlation over `columns` (all when empty).
ScreenReport correlation_screen(const TimeSeriesFrame& frame, double threshold,
                                std::vector<std::string> columns = {});

// X2 * 1000/60 - X5 - X6 - X7 on raw units; NaN where any input is missing.
std::vector<double> derive_active_energy(const TimeSeriesFrame& frame);
double active_energy(double gap, double sm1, double sm2, double sm3);

struct NormalizationStats {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> std;  // population

  void write(std::ostream& out) const;
  static NormalizationStats read(std::istream& in);
};

// Stats over rows [begin, begin + count) of every column.
NormalizationStats fit_normalization(const TimeSeriesFrame& frame, std::size_t begin,
                                     std::size_t count);
std::pair<TimeSeriesFrame, NormalizationStats> normalize(
    const TimeSeriesFrame& frame, const std::optional<NormalizationStats>& stats = std::nullopt);
TimeSeriesFrame denormalize(const TimeSeriesFrame& frame, const NormalizationStats& stats);

// Supervised windows. Window i covers series rows i..i+T-1 of the inputs and
// its target is series row i+T. Series-backed sets share the underlying rows
// and materialize batches on demand.
class LagWindowSet {
 public:
  LagWindowSet() = default;
  // x: (n, T, d), y: (n, p)
  LagWindowSet(Tensor x, Tensor y, std::vector<std::string> feature_names,
               std::vector<std::string> target_names);

  static LagWindowSet from_series(std::vector<double> inputs, std::vector<double> targets,
                                  std::size_t rows, std::size_t d, std::size_t p, std::size_t lag,
                                  std::vector<std::string> feature_names,
                                  std::vector<std::string> target_names);

  std::size_t size() const { return count_; }
  std::size_t lag() const { return lag_; }
  std::size_t d() const { return d_; }
  std::size_t p() const { return p_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::string>& target_names() const { return target_names_; }
  // Series row index of window i's first row (series-backed sets only).
  std::size_t first_row(std::size_t i) const { return offset_ + i; }

  double x(std::size_t i, std::size_t t, std::size_t k) const;
  double y(std::size_t i, std::size_t j) const;

  Tensor batch_x(std::size_t begin, std::size_t count) const;
  Tensor batch_y(std::size_t begin, std::size_t count) const;
  Tensor gather_x(const std::vector<std::size_t>& idx) const;
  Tensor gather_y(const std::vector<std::size_t>& idx) const;
  Tensor all_x() const { return batch_x(0, size()); }
  Tensor all_y() const { return batch_y(0, size()); }
  // Last-step inputs, (count, d).
  Tensor last_step(std::size_t begin, std::size_t count) const;

  LagWindowSet subset(std::size_t begin, std::size_t count) const;

 private:
  bool series_ = false;
  std::shared_ptr<const std::vector<double>> xdata_, ydata_;
  std::size_t offset_ = 0, count_ = 0, lag_ = 0, d_ = 0, p_ = 0;
  std::vector<std::string> feature_names_, target_names_;
};

LagWindowSet make_lag_windows(const TimeSeriesFrame& frame, std::size_t lag,
                              const std::vector<std::string>& inputs,
                              const std::vector<std::string>& targets);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t count = 0;
  std::size_t end() const { return begin + count; }
};

struct SplitSpec {
  IndexRange train, validation, test;
  static SplitSpec contiguous(std::size_t start, std::size_t n_train, std::size_t n_val,
                              std::size_t n_test);
  void validate(std::size_t available) const;
};

struct SplitWindows {
  LagWindowSet train, validation, test;
};

SplitWindows split(const LagWindowSet& windows, const SplitSpec& spec);

}  // namespace pdemts
